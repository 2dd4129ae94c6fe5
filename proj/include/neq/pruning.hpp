#pragma once

#include <cstdint>
#include <vector>

#include "neq/trainer.hpp"

namespace neq {

enum class PruneSchedule {
    Geometric,  // each step removes fraction * currently-remaining weights
    Linear,     // each step removes fraction * original weight count
};

struct PruneIteration {
    double global_sparsity = 0.0;
    std::vector<double> layer_sparsity;
    double normalized_ber = 0.0;
};

struct PruneReport {
    double baseline_ber = 0.0;
    std::vector<PruneIteration> iterations;
};

// Masks the floor(fraction * pool) smallest-magnitude unmasked weights,
// globally across prunable tensors; magnitude ties go to the lower flat
// index. Returns the number of newly masked weights (0 = nothing left).
std::size_t prune_step(Model& model, double fraction,
                       PruneSchedule schedule = PruneSchedule::Geometric);

// Per-layer masked fraction in network order: forward stages, backward
// stages (as laid out left to right), then the merge head.
std::vector<double> layer_sparsity(const Model& model);

// Prune 10% / fine-tune cycles until the target global sparsity; BER after
// each cycle is evaluated on a fixed stream and normalized by the input
// model's BER.
PruneReport iterative_prune(Model& model, const TrainConfig& train_cfg, const Channel& ch,
                            const Modulation& mod, double target_sparsity, int finetune_batches,
                            PruneSchedule schedule = PruneSchedule::Geometric,
                            double prune_fraction = 0.10);

}  // namespace neq
