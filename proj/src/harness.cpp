#include "neq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "neq/rng.hpp"

namespace neq {

namespace {

constexpr std::uint64_t kTagSkew = 0x736b6577;
constexpr std::uint64_t kTagRobEval = 0x726f62;

std::size_t state_count_or_zero(const Channel& ch, const Modulation& mod, std::size_t cap) {
    std::size_t n = 1;
    for (int i = 0; i < ch.length(); ++i) {
        if (n > cap / static_cast<std::size_t>(mod.order)) return 0;
        n *= static_cast<std::size_t>(mod.order);
    }
    return n;
}

std::shared_ptr<const Model> prepare_model(const EqualizerSpec& spec, const Channel& ch,
                                           const Modulation& mod, const TrainConfig& train_cfg,
                                           std::vector<TraceRow>* trace_out) {
    if (spec.kind == EqKind::NeuralEq && !spec.checkpoint.empty()) {
        auto model = std::make_shared<NeuralEqModel>(load_checkpoint(spec.checkpoint));
        if (model->config().mod_order != mod.order)
            throw std::invalid_argument("checkpoint modulation does not match the sweep");
        return model;
    }
    std::shared_ptr<Model> model;
    if (spec.kind == EqKind::NeuralEq) {
        NeuralEqConfig cfg = spec.neq;
        cfg.mod_order = mod.order;
        model = std::make_shared<NeuralEqModel>(cfg);
    } else {
        MlpBaselineConfig cfg = spec.mlp;
        cfg.mod_order = mod.order;
        model = std::make_shared<MlpModel>(cfg, spec.neq.D);
    }
    const TrainResult result = train(*model, train_cfg, ch, mod);
    if (trace_out) *trace_out = result.trace;
    return model;
}

}  // namespace

void SweepSpec::validate() const {
    channel.validate();
    if (snr_db.empty()) throw std::invalid_argument("sweep: empty SNR list");
    for (std::size_t i = 1; i < snr_db.size(); ++i)
        if (snr_db[i] <= snr_db[i - 1])
            throw std::invalid_argument("sweep: SNR list must be strictly increasing");
    if (roster.empty()) throw std::invalid_argument("sweep: empty equalizer roster");
}

EqualizerFn make_equalizer(const EqualizerSpec& spec, const Channel& ch, const Modulation& mod,
                           double sigma, std::shared_ptr<const Model> trained) {
    const auto len = static_cast<std::size_t>(ch.length());
    switch (spec.kind) {
        case EqKind::Slicer: {
            const auto pre = static_cast<std::size_t>(ch.pre_cursors);
            const double main = ch.main_tap();
            const double scale = main != 0.0 ? 1.0 / main : 1.0;
            return [mod, pre, scale](const ObservedStream& x) {
                EqOutput out;
                const std::size_t n = x.size();
                out.decisions.indices.resize(n);
                for (std::size_t t = 0; t + pre < n; ++t)
                    out.decisions.indices[t] = static_cast<std::uint8_t>(
                        slice_index(mod, x.samples[t + pre] * scale));
                out.valid_begin = 0;
                out.valid_end = n > pre ? n - pre : 0;
                return out;
            };
        }
        case EqKind::Ffe: {
            const int cursor = spec.ffe_cursor >= 0 ? spec.ffe_cursor
                                                    : default_ffe_cursor(ch, spec.ffe_taps);
            const FfeTaps taps = design_mmse_ffe(ch, mod, sigma, spec.ffe_taps, cursor);
            return [taps, mod](const ObservedStream& x) {
                EqOutput out;
                const std::vector<double> y = ffe_apply(taps, x.samples);
                out.decisions.indices.resize(y.size());
                for (std::size_t t = 0; t < y.size(); ++t)
                    out.decisions.indices[t] = static_cast<std::uint8_t>(slice_index(mod, y[t]));
                const auto n_taps = static_cast<std::size_t>(taps.taps.size());
                const auto cur = static_cast<std::size_t>(taps.cursor);
                out.valid_begin = n_taps > cur + 1 ? n_taps - 1 - cur : 0;
                out.valid_end = y.size() > cur ? y.size() - cur : 0;
                return out;
            };
        }
        case EqKind::Dfe: {
            const DfeConfig cfg = design_ffe_dfe(ch, mod, sigma, spec.dfe_ff, spec.dfe_fb);
            return [cfg, mod](const ObservedStream& x) {
                EqOutput out;
                out.decisions = dfe_run(cfg, x.samples, mod);
                const auto n_taps = static_cast<std::size_t>(cfg.ff.taps.size());
                const auto cur = static_cast<std::size_t>(cfg.ff.cursor);
                out.valid_begin = n_taps > cur + 1 ? n_taps - 1 - cur : 0;
                out.valid_end = x.size() > cur ? x.size() - cur : 0;
                return out;
            };
        }
        case EqKind::Fb: {
            auto hmm = std::make_shared<const Hmm>(build_hmm(ch, mod, sigma, spec.fb_state_cap));
            const std::size_t overlap =
                spec.fb_overlap > 0 ? spec.fb_overlap : default_fb_overlap(ch);
            const std::size_t block = std::max(spec.fb_block, 2 * overlap + 1);
            return [hmm, block, overlap, len](const ObservedStream& x) {
                EqOutput out;
                out.decisions = fb_decode(*hmm, x, block, overlap);
                out.valid_begin = 0;
                out.valid_end = x.size() > len ? x.size() - len : 0;
                return out;
            };
        }
        case EqKind::NeuralEq:
        case EqKind::Mlp: {
            if (!trained) throw std::logic_error("make_equalizer: neural roster entry without a model");
            const int pre = ch.pre_cursors;
            return [trained, pre](const ObservedStream& x) {
                EqOutput out;
                out.decisions = predict_stream(*trained, x, pre);
                std::tie(out.valid_begin, out.valid_end) =
                    predict_valid_range(*trained, pre, x.size());
                return out;
            };
        }
    }
    throw std::logic_error("make_equalizer: unknown equalizer kind");
}

SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    SweepResult result;

    TrainConfig train_cfg = spec.train;
    if (!spec.train_snr_set)
        train_cfg.snr_db = spec.snr_db[(spec.snr_db.size() - 1) / 2];  // lower median

    // Neural models are trained once and reused at every SNR point.
    std::vector<std::shared_ptr<const Model>> models(spec.roster.size());
    std::vector<bool> skipped(spec.roster.size(), false);
    for (std::size_t r = 0; r < spec.roster.size(); ++r) {
        const EqualizerSpec& eq = spec.roster[r];
        if (eq.kind == EqKind::NeuralEq || eq.kind == EqKind::Mlp)
            models[r] = prepare_model(eq, spec.channel, spec.mod, train_cfg, &result.train_trace);
        if (eq.kind == EqKind::Fb &&
            state_count_or_zero(spec.channel, spec.mod, eq.fb_state_cap) == 0) {
            skipped[r] = true;
            result.warnings.push_back("fb skipped: " + std::to_string(spec.mod.order) + "^" +
                                      std::to_string(spec.channel.length()) +
                                      " states exceed the cap of " +
                                      std::to_string(eq.fb_state_cap));
        }
    }

    for (std::size_t i = 0; i < spec.snr_db.size(); ++i) {
        const double snr = spec.snr_db[i];
        const double sigma = sigma_for_snr(spec.channel, spec.mod, snr);
        const std::uint64_t point_seed = mix_key(spec.seed, i);
        for (std::size_t r = 0; r < spec.roster.size(); ++r) {
            if (skipped[r]) continue;
            const EqualizerFn fn = make_equalizer(spec.roster[r], spec.channel, spec.mod, sigma,
                                                  models[r]);
            result.points.push_back(evaluate_ber(fn, spec.channel, spec.mod, snr,
                                                 spec.symbols_per_point, point_seed,
                                                 spec.roster[r].id));
        }
    }
    return result;
}

Channel skew_channel(const Channel& ch, double p, std::uint64_t seed) {
    if (p < 0.0) throw std::invalid_argument("skew_channel: negative skew fraction");
    Channel out = ch;
    if (p == 0.0) return out;
    double max_mag = 0.0;
    for (double t : ch.taps) max_mag = std::max(max_mag, std::abs(t));
    const double sigma = max_mag * p;
    CounterRng rng(seed);
    for (double& t : out.taps) t += sigma * rng.gaussian();
    return out;
}

std::vector<RobustnessRow> robustness_experiment(const SkewSpec& spec,
                                                 const std::vector<EqualizerSpec>& roster) {
    spec.base.validate();
    if (spec.trials < 1) throw std::invalid_argument("robustness: need at least one trial");
    for (double p : spec.p_values)
        if (p < 0.0) throw std::invalid_argument("robustness: negative skew fraction");

    const double sigma = sigma_for_snr(spec.base, spec.mod, spec.snr_db);
    TrainConfig train_cfg = spec.train;
    train_cfg.snr_db = spec.snr_db;

    // Designs and models come from the base channel only.
    std::vector<std::shared_ptr<const Model>> models(roster.size());
    std::vector<EqualizerFn> fns(roster.size());
    for (std::size_t r = 0; r < roster.size(); ++r) {
        if (roster[r].kind == EqKind::NeuralEq || roster[r].kind == EqKind::Mlp)
            models[r] = prepare_model(roster[r], spec.base, spec.mod, train_cfg, nullptr);
        fns[r] = make_equalizer(roster[r], spec.base, spec.mod, sigma, models[r]);
    }

    std::vector<RobustnessRow> rows;
    for (std::size_t pi = 0; pi < spec.p_values.size(); ++pi) {
        const double p = spec.p_values[pi];
        std::vector<std::vector<double>> bers(roster.size());
        for (int trial = 0; trial < spec.trials; ++trial) {
            const Channel skewed = skew_channel(
                spec.base, p, mix_key(mix_key(spec.seed, kTagSkew, pi), static_cast<std::uint64_t>(trial)));
            const std::uint64_t eval_seed =
                mix_key(mix_key(spec.seed, kTagRobEval, pi), static_cast<std::uint64_t>(trial));
            for (std::size_t r = 0; r < roster.size(); ++r) {
                const BerPoint point =
                    evaluate_ber_with_sigma(fns[r], skewed, spec.mod, sigma, spec.snr_db,
                                            spec.symbols_per_trial, eval_seed, roster[r].id);
                bers[r].push_back(point.ber);
            }
        }
        for (std::size_t r = 0; r < roster.size(); ++r) {
            RobustnessRow row;
            row.p = p;
            row.equalizer_id = roster[r].id;
            double mean = 0.0;
            for (double b : bers[r]) mean += b;
            mean /= static_cast<double>(bers[r].size());
            double var = 0.0;
            for (double b : bers[r]) var += (b - mean) * (b - mean);
            row.mean_ber = mean;
            row.std_ber = bers[r].size() > 1
                              ? std::sqrt(var / static_cast<double>(bers[r].size() - 1))
                              : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

GridResult grid_search_width(const Channel& ch, const Modulation& mod, double snr_db,
                             const std::vector<int>& candidates, TrainConfig cfg, int T, int D) {
    if (candidates.empty()) throw std::invalid_argument("grid_search_width: empty candidate list");
    cfg.snr_db = snr_db;
    GridResult result;
    bool any_ok = false;
    for (int n : candidates) {
        GridRow row;
        row.n = n;
        NeuralEqConfig net_cfg{T, D, n, mod.order};
        row.params = param_count(net_cfg);
        try {
            NeuralEqModel model(net_cfg);
            const TrainResult tr = train(model, cfg, ch, mod);
            row.valid_ber = tr.valid_ber;
            any_ok = true;
        } catch (const std::exception&) {
            row.failed = true;
        }
        result.rows.push_back(row);
    }
    if (!any_ok) throw std::runtime_error("grid_search_width: every candidate failed to train");
    const GridRow* best = nullptr;
    for (const GridRow& row : result.rows) {
        if (row.failed) continue;
        if (!best || row.valid_ber < best->valid_ber ||
            (row.valid_ber == best->valid_ber && row.n < best->n))
            best = &row;
    }
    result.best_n = best->n;
    return result;
}

}  // namespace neq
