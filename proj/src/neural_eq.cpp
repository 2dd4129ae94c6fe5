#include "neq/neural_eq.hpp"

#include <cmath>
#include <stdexcept>

#include "neq/rng.hpp"

namespace neq {

using MapRM = Eigen::Map<RMat>;
using CMapRM = Eigen::Map<const RMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

void NeuralEqConfig::validate() const {
    if (T < 1 || D < 1 || D > T) throw std::invalid_argument("NeuralEqConfig: need 1 <= D <= T");
    if (N < 1) throw std::invalid_argument("NeuralEqConfig: need N >= 1");
    if (mod_order != 2 && mod_order != 4)
        throw std::invalid_argument("NeuralEqConfig: modulation order must be 2 or 4");
}

void MlpBaselineConfig::validate() const {
    if (hidden1 < 1 || hidden2 < 1)
        throw std::invalid_argument("MlpBaselineConfig: hidden sizes must be positive");
    if (T < 1) throw std::invalid_argument("MlpBaselineConfig: need T >= 1");
    if (mod_order != 2 && mod_order != 4)
        throw std::invalid_argument("MlpBaselineConfig: modulation order must be 2 or 4");
}

void Model::init_params(std::uint64_t seed) {
    store_.allocate();
    CounterRng rng(seed);
    for (std::size_t ti = 0; ti < store_.tensors().size(); ++ti) {
        const TensorInfo& info = store_.tensors()[ti];
        if (!info.weight) continue;
        const double bound = std::sqrt(6.0 / static_cast<double>(info.rows + info.cols));
        double* p = store_.data(ti);
        for (std::size_t i = 0; i < info.size(); ++i) p[i] = (2.0 * rng.uniform01() - 1.0) * bound;
    }
}

std::vector<double> Model::forward_infer(const std::vector<double>& window) const {
    if (static_cast<int>(window.size()) != window_len())
        throw std::invalid_argument("forward_infer: window length mismatch");
    RMat x(1, window_len());
    for (int i = 0; i < window_len(); ++i) x(0, i) = window[static_cast<std::size_t>(i)];
    Cache cache;
    forward_batch(x, cache);
    std::vector<double> out(static_cast<std::size_t>(n_classes()));
    for (int c = 0; c < n_classes(); ++c) out[static_cast<std::size_t>(c)] = cache.probs(0, c);
    return out;
}

namespace {

// tanh via the vectorized double exp; the derivative is exactly 1 - t^2.
void tanh_inplace(Eigen::ArrayXd& m) { m = 1.0 - 2.0 / ((2.0 * m).exp() + 1.0); }
void tanh_inplace(RMat& m) { m.array() = 1.0 - 2.0 / ((2.0 * m.array()).exp() + 1.0); }

void softmax_rows(RMat& logits, RMat& probs) {
    probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        probs.row(r) = (logits.row(r).array() - m).exp();
        probs.row(r) /= probs.row(r).sum();
    }
}

}  // namespace

NeuralEqModel::NeuralEqModel(NeuralEqConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.N;
    auto add_stage = [&](const std::string& prefix, int group) {
        StageOffsets s;
        s.wp = store_.tensors().size();
        store_.add(prefix + ".wp", 1, 1, true, false, group);
        s.bp = store_.add(prefix + ".bp", 1, 1, false, false, group);
        s.u = store_.add(prefix + ".u", 1, 1, true, false, group);
        s.w1 = store_.add(prefix + ".W1", n, n, true, true, group);
        s.v = store_.add(prefix + ".v", n, 1, true, true, group);
        s.c1 = store_.add(prefix + ".c1", n, 1, false, false, group);
        s.w2 = store_.add(prefix + ".W2", n, n, true, true, group);
        s.c2 = store_.add(prefix + ".c2", n, 1, false, false, group);
        return s;
    };
    // Forward stages consume x_1..x_D; backward stages x_T down to x_{D+1}.
    for (int i = 0; i < cfg_.D; ++i) fwd_.push_back(add_stage("f" + std::to_string(i + 1), i));
    for (int k = 0; k < cfg_.T - cfg_.D; ++k)
        bwd_.push_back(add_stage("b" + std::to_string(cfg_.T - k), cfg_.T - 1 - k));
    a0_ = store_.add("a0", n, 1, false, false, -1);
    b0_ = store_.add("b0", n, 1, false, false, -1);
    wg1_ = store_.add("head.Wg1", n, 2 * n, true, true, cfg_.T);
    cg1_ = store_.add("head.cg1", n, 1, false, false, cfg_.T);
    wg2_ = store_.add("head.Wg2", cfg_.mod_order, n, true, true, cfg_.T);
    cg2_ = store_.add("head.cg2", cfg_.mod_order, 1, false, false, cfg_.T);
    store_.allocate();
    if (store_.total() != param_count(cfg_))
        throw std::logic_error("NeuralEqModel: registry size disagrees with the closed form");
}

void NeuralEqModel::forward_batch(const RMat& x, Cache& cache) const {
    if (static_cast<int>(x.cols()) != cfg_.T)
        throw std::invalid_argument("forward_batch: window length mismatch");
    const Eigen::Index batch = x.rows();
    const int n = cfg_.N;
    const int n_fwd = cfg_.D;
    const int n_bwd = cfg_.T - cfg_.D;

    cache.fwd_in.resize(static_cast<std::size_t>(n_fwd));
    cache.fwd_hid.resize(static_cast<std::size_t>(n_fwd));
    cache.fwd_m0.resize(static_cast<std::size_t>(n_fwd));
    cache.bwd_in.resize(static_cast<std::size_t>(n_bwd));
    cache.bwd_hid.resize(static_cast<std::size_t>(n_bwd));
    cache.bwd_m0.resize(static_cast<std::size_t>(n_bwd));

    auto run_chain = [&](const std::vector<StageOffsets>& stages, std::vector<RMat>& ins,
                         std::vector<RMat>& hids, std::vector<Eigen::ArrayXd>& m0s,
                         std::size_t init_vec, bool forward_dir, RMat& final_state) {
        RMat& state = cache.state;
        state = CMapVec(store_.values.data() + store_.tensors()[init_vec].offset, n)
                    .transpose()
                    .replicate(batch, 1);
        for (std::size_t si = 0; si < stages.size(); ++si) {
            const StageOffsets& s = stages[si];
            const int col = forward_dir ? static_cast<int>(si) : cfg_.T - 1 - static_cast<int>(si);
            const double wp = store_.values[store_.tensors()[s.wp].offset];
            const double bp = store_.values[store_.tensors()[s.bp].offset];
            const double u = store_.values[store_.tensors()[s.u].offset];
            CMapRM w1(store_.values.data() + store_.tensors()[s.w1].offset, n, n);
            CMapVec v(store_.values.data() + store_.tensors()[s.v].offset, n);
            CMapVec c1(store_.values.data() + store_.tensors()[s.c1].offset, n);
            CMapRM w2(store_.values.data() + store_.tensors()[s.w2].offset, n, n);
            CMapVec c2(store_.values.data() + store_.tensors()[s.c2].offset, n);

            ins[si] = state;
            m0s[si] = wp * x.col(col).array() + bp;
            tanh_inplace(m0s[si]);
            hids[si].resize(batch, n);
            hids[si].noalias() = state * w1.transpose();
            hids[si].noalias() += (m0s[si] * u).matrix() * v.transpose();
            hids[si].rowwise() += c1.transpose();
            tanh_inplace(hids[si]);
            state.noalias() = hids[si] * w2.transpose();
            state.rowwise() += c2.transpose();
            tanh_inplace(state);
        }
        final_state = state;
    };

    run_chain(fwd_, cache.fwd_in, cache.fwd_hid, cache.fwd_m0, a0_, true, cache.a_final);
    run_chain(bwd_, cache.bwd_in, cache.bwd_hid, cache.bwd_m0, b0_, false, cache.b_final);

    cache.cat.resize(batch, 2 * n);
    cache.cat.leftCols(n) = cache.a_final;
    cache.cat.rightCols(n) = cache.b_final;

    CMapRM wg1(store_.values.data() + store_.tensors()[wg1_].offset, n, 2 * n);
    CMapVec cg1(store_.values.data() + store_.tensors()[cg1_].offset, n);
    CMapRM wg2(store_.values.data() + store_.tensors()[wg2_].offset, cfg_.mod_order, n);
    CMapVec cg2(store_.values.data() + store_.tensors()[cg2_].offset, cfg_.mod_order);

    cache.g.resize(batch, n);
    cache.g.noalias() = cache.cat * wg1.transpose();
    cache.g.rowwise() += cg1.transpose();
    tanh_inplace(cache.g);
    cache.logits.resize(batch, cfg_.mod_order);
    cache.logits.noalias() = cache.g * wg2.transpose();
    cache.logits.rowwise() += cg2.transpose();
    softmax_rows(cache.logits, cache.probs);
}

void NeuralEqModel::backward_batch(const RMat& x, const Cache& cache, const RMat& dlogits,
                                   std::vector<double>& grad) const {
    const int n = cfg_.N;
    grad.assign(store_.total(), 0.0);

    const auto off = [&](std::size_t ti) { return store_.tensors()[ti].offset; };

    // Head.
    RMat dcat;
    {
        CMapRM wg1(store_.values.data() + off(wg1_), n, 2 * n);
        CMapRM wg2(store_.values.data() + off(wg2_), cfg_.mod_order, n);
        MapRM gwg2(grad.data() + off(wg2_), cfg_.mod_order, n);
        MapVec gcg2(grad.data() + off(cg2_), cfg_.mod_order);
        MapRM gwg1(grad.data() + off(wg1_), n, 2 * n);
        MapVec gcg1(grad.data() + off(cg1_), n);

        gwg2.noalias() += dlogits.transpose() * cache.g;
        gcg2 += dlogits.colwise().sum().transpose();
        RMat dg = dlogits * wg2;
        RMat dgpre = dg.array() * (1.0 - cache.g.array().square());
        gwg1.noalias() += dgpre.transpose() * cache.cat;
        gcg1 += dgpre.colwise().sum().transpose();
        dcat = dgpre * wg1;
    }

    RMat& dstate = cache.state;   // reused scratch, same shape as the batch
    RMat& dpre = cache.scratch1;
    RMat& dhid = cache.scratch2;
    auto run_chain = [&](const std::vector<StageOffsets>& stages, const std::vector<RMat>& ins,
                         const std::vector<RMat>& hids, const std::vector<Eigen::ArrayXd>& m0s,
                         std::size_t init_vec, bool forward_dir, const RMat& final_state) {
        for (int si = static_cast<int>(stages.size()) - 1; si >= 0; --si) {
            const StageOffsets& s = stages[static_cast<std::size_t>(si)];
            const int col = forward_dir ? si : cfg_.T - 1 - si;
            const double u = store_.values[off(s.u)];
            CMapRM w1(store_.values.data() + off(s.w1), n, n);
            CMapVec v(store_.values.data() + off(s.v), n);
            CMapRM w2(store_.values.data() + off(s.w2), n, n);
            const RMat& a_out = (si + 1 < static_cast<int>(stages.size()))
                                    ? ins[static_cast<std::size_t>(si + 1)]
                                    : final_state;
            const RMat& hid = hids[static_cast<std::size_t>(si)];
            const RMat& a_in = ins[static_cast<std::size_t>(si)];
            const Eigen::ArrayXd& m0 = m0s[static_cast<std::size_t>(si)];

            dpre = dstate.array() * (1.0 - a_out.array().square());
            MapRM gw2(grad.data() + off(s.w2), n, n);
            MapVec gc2(grad.data() + off(s.c2), n);
            gw2.noalias() += dpre.transpose() * hid;
            gc2 += dpre.colwise().sum().transpose();

            dhid.resize(dpre.rows(), n);
            dhid.noalias() = dpre * w2;
            dpre = dhid.array() * (1.0 - hid.array().square());
            MapRM gw1(grad.data() + off(s.w1), n, n);
            MapVec gc1(grad.data() + off(s.c1), n);
            MapVec gv(grad.data() + off(s.v), n);
            gw1.noalias() += dpre.transpose() * a_in;
            gc1 += dpre.colwise().sum().transpose();
            gv.noalias() += dpre.transpose() * (m0 * u).matrix();

            Eigen::VectorXd dm = dpre * v;
            dstate.noalias() = dpre * w1;

            grad[off(s.u)] += (dm.array() * m0).sum();
            Eigen::ArrayXd du1 = dm.array() * u * (1.0 - m0.square());
            grad[off(s.wp)] += (du1 * x.col(col).array()).sum();
            grad[off(s.bp)] += du1.sum();
        }
        MapVec ginit(grad.data() + off(init_vec), n);
        ginit += dstate.colwise().sum().transpose();
    };

    dstate = dcat.leftCols(n);
    run_chain(fwd_, cache.fwd_in, cache.fwd_hid, cache.fwd_m0, a0_, true, cache.a_final);
    dstate = dcat.rightCols(n);
    run_chain(bwd_, cache.bwd_in, cache.bwd_hid, cache.bwd_m0, b0_, false, cache.b_final);
}

MlpModel::MlpModel(MlpBaselineConfig cfg, int D) : cfg_(cfg), d_(D) {
    cfg_.validate();
    if (D < 1 || D > cfg_.T) throw std::invalid_argument("MlpModel: need 1 <= D <= T");
    w1_ = store_.add("mlp.W1", cfg_.hidden1, cfg_.T, true, true, 0);
    b1_ = store_.add("mlp.b1", cfg_.hidden1, 1, false, false, 0);
    w2_ = store_.add("mlp.W2", cfg_.hidden2, cfg_.hidden1, true, true, 1);
    b2_ = store_.add("mlp.b2", cfg_.hidden2, 1, false, false, 1);
    wo_ = store_.add("mlp.Wo", cfg_.mod_order, cfg_.hidden2, true, true, 2);
    bo_ = store_.add("mlp.bo", cfg_.mod_order, 1, false, false, 2);
    store_.allocate();
    if (store_.total() != mlp_param_count(cfg_))
        throw std::logic_error("MlpModel: registry size disagrees with the closed form");
}

void MlpModel::forward_batch(const RMat& x, Cache& cache) const {
    if (static_cast<int>(x.cols()) != cfg_.T)
        throw std::invalid_argument("forward_batch: window length mismatch");
    const auto off = [&](std::size_t ti) { return store_.tensors()[ti].offset; };
    CMapRM w1(store_.values.data() + off(w1_), cfg_.hidden1, cfg_.T);
    CMapVec b1(store_.values.data() + off(b1_), cfg_.hidden1);
    CMapRM w2(store_.values.data() + off(w2_), cfg_.hidden2, cfg_.hidden1);
    CMapVec b2(store_.values.data() + off(b2_), cfg_.hidden2);
    CMapRM wo(store_.values.data() + off(wo_), cfg_.mod_order, cfg_.hidden2);
    CMapVec bo(store_.values.data() + off(bo_), cfg_.mod_order);

    RMat pre = x * w1.transpose();
    pre.rowwise() += b1.transpose();
    cache.h1 = pre.array().tanh();
    RMat pre2 = cache.h1 * w2.transpose();
    pre2.rowwise() += b2.transpose();
    cache.h2 = pre2.array().tanh();
    cache.logits = cache.h2 * wo.transpose();
    cache.logits.rowwise() += bo.transpose();
    softmax_rows(cache.logits, cache.probs);
}

void MlpModel::backward_batch(const RMat& x, const Cache& cache, const RMat& dlogits,
                              std::vector<double>& grad) const {
    grad.assign(store_.total(), 0.0);
    const auto off = [&](std::size_t ti) { return store_.tensors()[ti].offset; };
    CMapRM w2(store_.values.data() + off(w2_), cfg_.hidden2, cfg_.hidden1);
    CMapRM wo(store_.values.data() + off(wo_), cfg_.mod_order, cfg_.hidden2);
    MapRM gwo(grad.data() + off(wo_), cfg_.mod_order, cfg_.hidden2);
    MapVec gbo(grad.data() + off(bo_), cfg_.mod_order);
    MapRM gw2(grad.data() + off(w2_), cfg_.hidden2, cfg_.hidden1);
    MapVec gb2(grad.data() + off(b2_), cfg_.hidden2);
    MapRM gw1(grad.data() + off(w1_), cfg_.hidden1, cfg_.T);
    MapVec gb1(grad.data() + off(b1_), cfg_.hidden1);

    gwo.noalias() += dlogits.transpose() * cache.h2;
    gbo += dlogits.colwise().sum().transpose();
    RMat dh2 = dlogits * wo;
    RMat dpre2 = dh2.array() * (1.0 - cache.h2.array().square());
    gw2.noalias() += dpre2.transpose() * cache.h1;
    gb2 += dpre2.colwise().sum().transpose();
    RMat dh1 = dpre2 * w2;
    RMat dpre1 = dh1.array() * (1.0 - cache.h1.array().square());
    gw1.noalias() += dpre1.transpose() * x;
    gb1 += dpre1.colwise().sum().transpose();
}

std::uint64_t param_count(const NeuralEqConfig& cfg) {
    cfg.validate();
    const std::uint64_t n = static_cast<std::uint64_t>(cfg.N);
    const std::uint64_t t = static_cast<std::uint64_t>(cfg.T);
    const std::uint64_t c = static_cast<std::uint64_t>(cfg.mod_order);
    return t * (2 * n * n + 3 * n + 3) + 2 * n + (2 * n * n + n) + (c * n + c);
}

std::uint64_t mlp_param_count(const MlpBaselineConfig& cfg) {
    cfg.validate();
    const std::uint64_t t = static_cast<std::uint64_t>(cfg.T);
    const std::uint64_t h1 = static_cast<std::uint64_t>(cfg.hidden1);
    const std::uint64_t h2 = static_cast<std::uint64_t>(cfg.hidden2);
    const std::uint64_t c = static_cast<std::uint64_t>(cfg.mod_order);
    return t * h1 + h1 + h1 * h2 + h2 + h2 * c + c;
}

OpCount op_count(const NeuralEqConfig& cfg) {
    cfg.validate();
    const std::uint64_t n = static_cast<std::uint64_t>(cfg.N);
    OpCount c;
    c.multiplies = 2 * n * n + n;
    c.adds = 2 * n * n + n;
    c.tanhs = 3 * n;
    return c;
}

SymbolStream predict_stream(const Model& model, const ObservedStream& x, int pre) {
    const int t_len = model.window_len();
    const int d = model.target_pos();
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(t_len))
        throw std::invalid_argument("predict_stream: stream shorter than one window");
    const Modulation mod = Modulation::by_order(model.n_classes());

    SymbolStream out;
    out.indices.resize(n);
    // Slicer fallback everywhere; windowed decisions overwrite below.
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = std::min(j + static_cast<std::size_t>(pre), n - 1);
        out.indices[j] = static_cast<std::uint8_t>(slice_index(mod, x.samples[src]));
    }

    const std::size_t n_windows = n - static_cast<std::size_t>(t_len) + 1;
    const std::ptrdiff_t label_off = d - 1 - pre;
    constexpr std::size_t kChunk = 4096;
    Cache cache;
    RMat xw;
    for (std::size_t base = 0; base < n_windows; base += kChunk) {
        const std::size_t count = std::min(kChunk, n_windows - base);
        xw.resize(static_cast<Eigen::Index>(count), t_len);
        for (std::size_t r = 0; r < count; ++r)
            for (int c = 0; c < t_len; ++c)
                xw(static_cast<Eigen::Index>(r), c) = x.samples[base + r + static_cast<std::size_t>(c)];
        model.forward_batch(xw, cache);
        for (std::size_t r = 0; r < count; ++r) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(base + r) + label_off;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            int best = 0;
            for (int c = 1; c < model.n_classes(); ++c)
                if (cache.probs(static_cast<Eigen::Index>(r), c) >
                    cache.probs(static_cast<Eigen::Index>(r), best))
                    best = c;
            out.indices[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

std::pair<std::size_t, std::size_t> predict_valid_range(const Model& model, int pre, std::size_t n) {
    const int t_len = model.window_len();
    const int d = model.target_pos();
    if (n < static_cast<std::size_t>(t_len)) return {0, 0};
    const std::ptrdiff_t label_off = d - 1 - pre;
    const std::ptrdiff_t first = std::max<std::ptrdiff_t>(0, label_off);
    const std::ptrdiff_t last =
        static_cast<std::ptrdiff_t>(n) - t_len + label_off;  // decided by the final window
    if (last < first) return {0, 0};
    return {static_cast<std::size_t>(first),
            std::min(static_cast<std::size_t>(last + 1), n)};
}

}  // namespace neq
