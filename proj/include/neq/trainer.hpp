#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neq/neural_eq.hpp"
#include "neq/signal_model.hpp"

namespace neq {

struct TrainConfig {
    int batch_size = 8192;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t train_symbols = 20'000'000;   // desk-scale defaults
    std::uint64_t valid_symbols = 2'000'000;
    std::uint64_t test_symbols = 10'000'000;
    double snr_db = 14.0;
    std::uint64_t seed = 1;
    int valid_every = 100;               // batches between validation passes
    std::uint64_t stop_after_steps = 0;  // 0 = run to completion

    void validate() const;
};

struct BerPoint {
    double snr_db = 0.0;
    std::string equalizer_id;
    std::uint64_t bit_errors = 0;
    std::uint64_t total_bits = 0;
    double ber = 0.0;
    double ci_low = 0.0;   // 95% Wilson interval
    double ci_high = 0.0;
    std::uint64_t seed = 0;
};

// -log p[label], clamped at p >= 1e-30.
double ce_loss(const std::vector<double>& probabilities, int label);

struct AdamState {
    std::vector<double> m, v;
    std::uint64_t t = 0;

    void init(std::size_t n);
};

// Standard bias-corrected Adam on the flat parameter buffer. Masked entries
// see zero gradient and stay exactly zero. Throws on non-finite gradients.
void adam_step(ParamStore& store, const std::vector<double>& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Freshly generated training windows. Every call consumes a new deterministic
// shard keyed by (seed, tag, shard index); shards are never revisited.
class BatchGenerator {
  public:
    BatchGenerator(Channel ch, Modulation mod, double sigma, int T, int D, std::uint64_t seed,
                   std::uint64_t tag);

    void next(std::size_t batch, RMat& x, std::vector<std::uint8_t>& labels);
    std::uint64_t shards_consumed() const { return shard_; }
    void skip_to(std::uint64_t shard) { shard_ = shard; }

  private:
    Channel ch_;
    Modulation mod_;
    double sigma_;
    int T_, D_;
    std::uint64_t seed_, tag_, shard_ = 0;
};

struct TraceRow {
    std::uint64_t step = 0;
    double loss = 0.0;
    double valid_ber = 0.0;
    bool has_valid = false;
};

// Resumable optimizer state; batches derive from the step index alone, so a
// run continued from this state is bit-identical to an uninterrupted one.
struct TrainerState {
    AdamState adam;
    std::uint64_t next_step = 1;
    std::vector<double> best_values;
    std::vector<std::uint8_t> best_mask;
    double best_valid_ber = 1.0;
    bool have_best = false;
    std::vector<TraceRow> trace;
};

struct TrainResult {
    double valid_ber = 1.0;  // best validation BER; model holds those params
    std::vector<TraceRow> trace;
    bool diverged = false;
    bool complete = false;
    std::uint64_t steps_run = 0;
    std::uint64_t shards_consumed = 0;
};

// Single-epoch streaming training: one Adam step per fresh batch, periodic
// validation, best-validation model selection. Deterministic per seed.
TrainResult train(Model& model, const TrainConfig& cfg, const Channel& ch, const Modulation& mod,
                  TrainerState* state = nullptr);

// Mean CE over a batch and the matching dlogits = (p - onehot)/B.
double batch_loss_and_dlogits(const RMat& probs, const std::vector<std::uint8_t>& labels,
                              RMat& dlogits);

// Gray-coded BER of argmax window decisions, skipping the first `warmup`
// window positions.
double windowed_ber(const Model& model, const ObservedStream& x, const SymbolStream& z, int pre,
                    std::size_t warmup);

struct EqOutput {
    SymbolStream decisions;
    std::size_t valid_begin = 0;
    std::size_t valid_end = 0;
};

using EqualizerFn = std::function<EqOutput(const ObservedStream&)>;

// Monte-Carlo BER over deterministic 64k-symbol shards; warm-up and the
// equalizer's own edge exclusions are left out of the counts.
BerPoint evaluate_ber(const EqualizerFn& equalizer, const Channel& ch, const Modulation& mod,
                      double snr_db, std::uint64_t n_symbols, std::uint64_t seed,
                      const std::string& id);

// As above with an explicit noise level; snr_db is only the reported label.
BerPoint evaluate_ber_with_sigma(const EqualizerFn& equalizer, const Channel& ch,
                                 const Modulation& mod, double sigma, double snr_db,
                                 std::uint64_t n_symbols, std::uint64_t seed,
                                 const std::string& id);

// 95% Wilson score interval for e errors in n bits.
std::pair<double, double> wilson_interval(std::uint64_t errors, std::uint64_t total);

// Parallelism cap from NEQ_THREADS (default: hardware concurrency).
int max_threads();

}  // namespace neq
