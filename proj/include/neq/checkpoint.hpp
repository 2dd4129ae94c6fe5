#pragma once

#include <string>

#include "neq/neural_eq.hpp"

namespace neq {

// NEQ1 binary checkpoint: magic "NEQ1", version u32, then T, D, N, mod_order
// as u32, all tensors as little-endian f64 in registry order (forward stages
// 1..D, backward stages T..D+1, a0, b0, head), then the mask as packed bits.
void save_checkpoint(const std::string& path, const NeuralEqModel& model);
NeuralEqModel load_checkpoint(const std::string& path);

}  // namespace neq
