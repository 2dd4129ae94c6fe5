#include "neq/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <stdexcept>
#include <tuple>
#include <thread>

#include "neq/rng.hpp"

namespace neq {

namespace {

// Stream-id namespaces for (seed, tag, index) derivations.
constexpr std::uint64_t kTagInit = 0x696e6974;   // parameter init
constexpr std::uint64_t kTagTrain = 0x747261;    // training batches
constexpr std::uint64_t kTagValid = 0x76616c;    // validation stream
constexpr std::uint64_t kTagEval = 0x6576616c;   // BER evaluation shards

constexpr std::size_t kEvalShard = 65536;

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (train_symbols < static_cast<std::uint64_t>(batch_size) ||
        valid_symbols < static_cast<std::uint64_t>(batch_size))
        throw std::invalid_argument("TrainConfig: budgets must be at least one batch");
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (valid_every < 1) throw std::invalid_argument("TrainConfig: valid_every must be positive");
}

double ce_loss(const std::vector<double>& probabilities, int label) {
    if (label < 0 || label >= static_cast<int>(probabilities.size()))
        throw std::invalid_argument("ce_loss: label out of range");
    return -std::log(std::max(probabilities[static_cast<std::size_t>(label)], 1e-30));
}

void AdamState::init(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
}

void adam_step(ParamStore& store, const std::vector<double>& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (grad.size() != store.values.size() || state.m.size() != grad.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    for (const TensorInfo& info : store.tensors())
        for (std::size_t i = info.offset; i < info.offset + info.size(); ++i)
            if (!std::isfinite(grad[i]))
                throw std::runtime_error("adam_step: non-finite gradient in tensor " + info.name);

    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = store.mask[i] ? grad[i] : 0.0;
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double mh = state.m[i] / bc1;
        const double vh = state.v[i] / bc2;
        store.values[i] -= lr * mh / (std::sqrt(vh) + eps);
        if (!store.mask[i]) store.values[i] = 0.0;
    }
}

BatchGenerator::BatchGenerator(Channel ch, Modulation mod, double sigma, int T, int D,
                               std::uint64_t seed, std::uint64_t tag)
    : ch_(std::move(ch)), mod_(std::move(mod)), sigma_(sigma), T_(T), D_(D), seed_(seed), tag_(tag) {}

void BatchGenerator::next(std::size_t batch, RMat& x, std::vector<std::uint8_t>& labels) {
    const std::size_t warm = static_cast<std::size_t>(ch_.length());
    const std::size_t len = batch + static_cast<std::size_t>(T_) + warm;
    const std::uint64_t shard_key = mix_key(seed_, tag_, shard_++);
    const SymbolStream z = random_symbols(len, mod_, mix_key(shard_key, 0));
    const std::vector<double> clean = apply_channel(z, mod_, ch_);
    const ObservedStream obs = add_awgn(clean, sigma_, mix_key(shard_key, 1));

    x.resize(static_cast<Eigen::Index>(batch), T_);
    labels.resize(batch);
    const std::ptrdiff_t label_off = D_ - 1 - ch_.pre_cursors;
    for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t k = warm + r;
        for (int c = 0; c < T_; ++c)
            x(static_cast<Eigen::Index>(r), c) = obs.samples[k + static_cast<std::size_t>(c)];
        labels[r] = z.indices[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + label_off)];
    }
}

double batch_loss_and_dlogits(const RMat& probs, const std::vector<std::uint8_t>& labels,
                              RMat& dlogits) {
    const Eigen::Index batch = probs.rows();
    dlogits = probs / static_cast<double>(batch);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        loss -= std::log(std::max(probs(r, label), 1e-30));
        dlogits(r, label) -= 1.0 / static_cast<double>(batch);
    }
    return loss / static_cast<double>(batch);
}

double windowed_ber(const Model& model, const ObservedStream& x, const SymbolStream& z, int pre,
                    std::size_t warmup) {
    const int t_len = model.window_len();
    const int d = model.target_pos();
    const int classes = model.n_classes();
    const Modulation mod = Modulation::by_order(classes);
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(t_len)) return 1.0;
    const std::size_t n_windows = n - static_cast<std::size_t>(t_len) + 1;
    const std::ptrdiff_t label_off = d - 1 - pre;

    std::uint64_t errs = 0, bits = 0;
    constexpr std::size_t kChunk = 8192;
    Cache cache;
    RMat xw;
    for (std::size_t base = warmup; base < n_windows; base += kChunk) {
        const std::size_t count = std::min(kChunk, n_windows - base);
        xw.resize(static_cast<Eigen::Index>(count), t_len);
        for (std::size_t r = 0; r < count; ++r)
            for (int c = 0; c < t_len; ++c)
                xw(static_cast<Eigen::Index>(r), c) = x.samples[base + r + static_cast<std::size_t>(c)];
        model.forward_batch(xw, cache);
        for (std::size_t r = 0; r < count; ++r) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(base + r) + label_off;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(z.size())) continue;
            int best = 0;
            for (int c = 1; c < classes; ++c)
                if (cache.probs(static_cast<Eigen::Index>(r), c) >
                    cache.probs(static_cast<Eigen::Index>(r), best))
                    best = c;
            errs += static_cast<std::uint64_t>(
                gray_bit_distance(best, z.indices[static_cast<std::size_t>(j)]));
            bits += static_cast<std::uint64_t>(mod.bits_per_symbol());
        }
    }
    return bits == 0 ? 1.0 : static_cast<double>(errs) / static_cast<double>(bits);
}

TrainResult train(Model& model, const TrainConfig& cfg, const Channel& ch, const Modulation& mod,
                  TrainerState* state) {
    cfg.validate();
    const double sigma = sigma_for_snr(ch, mod, cfg.snr_db);
    const std::uint64_t total_steps =
        std::max<std::uint64_t>(1, cfg.train_symbols / static_cast<std::uint64_t>(cfg.batch_size));

    TrainerState local;
    TrainerState& st = state ? *state : local;
    if (st.next_step == 1) {
        model.init_params(mix_key(cfg.seed, kTagInit));
        st.adam.init(model.store().total());
        st.best_values = model.store().values;
        st.best_mask = model.store().mask;
        st.best_valid_ber = 1.0;
        st.have_best = false;
        st.trace.clear();
    }

    // Fixed validation stream, independent of the training shards.
    const std::uint64_t vkey = mix_key(cfg.seed, kTagValid, 0);
    const SymbolStream vz = random_symbols(cfg.valid_symbols, mod, mix_key(vkey, 0));
    const ObservedStream vx = add_awgn(apply_channel(vz, mod, ch), sigma, mix_key(vkey, 1));
    const auto warmup = static_cast<std::size_t>(ch.length());

    BatchGenerator gen(ch, mod, sigma, model.window_len(), model.target_pos(), cfg.seed, kTagTrain);
    gen.skip_to(st.next_step - 1);

    TrainResult result;
    Cache cache;
    RMat dlogits;
    std::vector<std::uint8_t> labels;
    std::vector<double> grad;
    RMat x;

    std::uint64_t step = st.next_step;
    for (; step <= total_steps; ++step) {
        gen.next(static_cast<std::size_t>(cfg.batch_size), x, labels);
        model.forward_batch(x, cache);
        const double loss = batch_loss_and_dlogits(cache.probs, labels, dlogits);
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }
        model.backward_batch(x, cache, dlogits, grad);
        adam_step(model.store(), grad, st.adam, cfg.learning_rate, cfg.beta1, cfg.beta2,
                  cfg.epsilon);

        TraceRow row;
        row.step = step;
        row.loss = loss;
        if (step % static_cast<std::uint64_t>(cfg.valid_every) == 0 || step == total_steps) {
            const double vber = windowed_ber(model, vx, vz, ch.pre_cursors, warmup);
            row.valid_ber = vber;
            row.has_valid = true;
            if (!st.have_best || vber < st.best_valid_ber) {
                st.best_valid_ber = vber;
                st.best_values = model.store().values;
                st.best_mask = model.store().mask;
                st.have_best = true;
            }
        }
        st.trace.push_back(row);
        if (cfg.stop_after_steps > 0 && step - st.next_step + 1 >= cfg.stop_after_steps) {
            ++step;
            break;
        }
    }
    st.next_step = step;

    result.steps_run = st.trace.empty() ? 0 : st.trace.back().step;
    result.shards_consumed = gen.shards_consumed();
    result.trace = st.trace;
    result.valid_ber = st.have_best ? st.best_valid_ber : 1.0;
    result.complete = result.diverged || st.next_step > total_steps;
    // Hand back the best-validation parameters; a paused run keeps its
    // current parameters in the model so it can be resumed.
    if (result.complete) {
        model.store().values = st.best_values;
        model.store().mask = st.best_mask;
    }
    return result;
}

std::pair<double, double> wilson_interval(std::uint64_t errors, std::uint64_t total) {
    if (total == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    const double lo = errors == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = errors == total ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

int max_threads() {
    if (const char* env = std::getenv("NEQ_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

BerPoint evaluate_ber(const EqualizerFn& equalizer, const Channel& ch, const Modulation& mod,
                      double snr_db, std::uint64_t n_symbols, std::uint64_t seed,
                      const std::string& id) {
    return evaluate_ber_with_sigma(equalizer, ch, mod, sigma_for_snr(ch, mod, snr_db), snr_db,
                                   n_symbols, seed, id);
}

BerPoint evaluate_ber_with_sigma(const EqualizerFn& equalizer, const Channel& ch,
                                 const Modulation& mod, double sigma, double snr_db,
                                 std::uint64_t n_symbols, std::uint64_t seed,
                                 const std::string& id) {
    if (n_symbols < 1000) throw std::invalid_argument("evaluate_ber: need at least 1000 symbols");
    const auto warmup = static_cast<std::size_t>(ch.length());
    const std::size_t n_shards = static_cast<std::size_t>((n_symbols + kEvalShard - 1) / kEvalShard);

    struct ShardCount {
        std::uint64_t errs = 0, bits = 0;
    };
    auto run_shard = [&](std::size_t s) {
        const std::size_t len = static_cast<std::size_t>(
            std::min<std::uint64_t>(kEvalShard, n_symbols - static_cast<std::uint64_t>(s) * kEvalShard));
        const std::uint64_t skey = mix_key(seed, kTagEval, s);
        const SymbolStream z = random_symbols(len, mod, mix_key(skey, 0));
        const ObservedStream x = add_awgn(apply_channel(z, mod, ch), sigma, mix_key(skey, 1));
        const EqOutput out = equalizer(x);
        ShardCount count;
        const std::size_t begin = std::max(out.valid_begin, warmup);
        const std::size_t end = std::min(out.valid_end, len);
        for (std::size_t t = begin; t < end; ++t)
            count.errs += static_cast<std::uint64_t>(
                gray_bit_distance(z.indices[t], out.decisions.indices[t]));
        if (end > begin)
            count.bits = (end - begin) * static_cast<std::uint64_t>(mod.bits_per_symbol());
        return count;
    };

    std::vector<ShardCount> counts(n_shards);
    const int threads = std::min<int>(max_threads(), static_cast<int>(n_shards));
    if (threads <= 1) {
        for (std::size_t s = 0; s < n_shards; ++s) counts[s] = run_shard(s);
    } else {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::future<void>> workers;
        workers.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w)
            workers.push_back(std::async(std::launch::async, [&] {
                for (std::size_t s = cursor.fetch_add(1); s < n_shards; s = cursor.fetch_add(1))
                    counts[s] = run_shard(s);
            }));
        for (auto& f : workers) f.get();
    }

    BerPoint point;
    point.snr_db = snr_db;
    point.equalizer_id = id;
    point.seed = seed;
    for (const ShardCount& c : counts) {
        point.bit_errors += c.errs;
        point.total_bits += c.bits;
    }
    point.ber = point.total_bits == 0
                    ? 0.0
                    : static_cast<double>(point.bit_errors) / static_cast<double>(point.total_bits);
    std::tie(point.ci_low, point.ci_high) = wilson_interval(point.bit_errors, point.total_bits);
    return point;
}

}  // namespace neq
