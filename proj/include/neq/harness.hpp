#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neq/checkpoint.hpp"
#include "neq/hmm_fb.hpp"
#include "neq/linear_eq.hpp"
#include "neq/pruning.hpp"
#include "neq/trainer.hpp"

namespace neq {

enum class EqKind { Slicer, Ffe, Dfe, Fb, NeuralEq, Mlp };

struct EqualizerSpec {
    EqKind kind = EqKind::Slicer;
    std::string id = "slicer";
    int ffe_taps = 8;
    int ffe_cursor = -1;  // -1 = default_ffe_cursor
    int dfe_ff = 8;
    int dfe_fb = 3;
    std::size_t fb_block = 4096;
    std::size_t fb_overlap = 0;  // 0 = default_fb_overlap
    std::size_t fb_state_cap = kDefaultStateCap;
    NeuralEqConfig neq;
    MlpBaselineConfig mlp;
    std::string checkpoint;  // optional NEQ1 path; trained in-process if empty
};

struct SweepSpec {
    Channel channel;
    Modulation mod;
    std::vector<double> snr_db;
    std::vector<EqualizerSpec> roster;
    std::uint64_t symbols_per_point = 1'000'000;
    std::uint64_t seed = 1;
    TrainConfig train;
    bool train_snr_set = false;  // otherwise neural models train at the median SNR

    void validate() const;
};

struct SweepResult {
    std::vector<BerPoint> points;  // (snr point, roster entry) order
    std::vector<std::string> warnings;
    std::vector<TraceRow> train_trace;  // from the last neural model trained
};

// Equalizer bound to a channel/noise design, exposing its valid decision span.
EqualizerFn make_equalizer(const EqualizerSpec& spec, const Channel& ch, const Modulation& mod,
                           double sigma, std::shared_ptr<const Model> trained);

// Trains neural roster entries once (median SNR unless overridden), then
// evaluates every equalizer at every SNR with a common per-point seed. FB is
// downgraded to a warning when the channel exceeds the state cap.
SweepResult run_sweep(const SweepSpec& spec);

// Per-tap i.i.d. Gaussian perturbation with sigma = max|h| * p.
Channel skew_channel(const Channel& ch, double p, std::uint64_t seed);

struct SkewSpec {
    Channel base;
    Modulation mod;
    std::vector<double> p_values{0.0, 0.01, 0.02};
    int trials = 20;
    double snr_db = 12.0;
    std::uint64_t symbols_per_trial = 400'000;
    std::uint64_t seed = 1;
    TrainConfig train;
};

struct RobustnessRow {
    double p = 0.0;
    std::string equalizer_id;
    double mean_ber = 0.0;
    double std_ber = 0.0;
};

// Equalizers are designed/trained on the base channel only, then evaluated on
// freshly skewed channels (noise level fixed at the base design point).
std::vector<RobustnessRow> robustness_experiment(const SkewSpec& spec,
                                                 const std::vector<EqualizerSpec>& roster);

struct GridRow {
    int n = 0;
    double valid_ber = 1.0;
    std::uint64_t params = 0;
    bool failed = false;
};

struct GridResult {
    int best_n = 0;
    std::vector<GridRow> rows;
};

// Trains one NeuralEQ per candidate width at a fixed budget/seed; best
// validation BER wins, ties to the smaller width.
GridResult grid_search_width(const Channel& ch, const Modulation& mod, double snr_db,
                             const std::vector<int>& candidates, TrainConfig cfg, int T, int D);

}  // namespace neq
