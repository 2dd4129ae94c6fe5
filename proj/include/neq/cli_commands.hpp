#pragma once

#include <string>

#include "neq/run_config.hpp"

namespace neq {

// Each command writes its artifacts atomically under out_dir plus a manifest
// echoing the fully resolved configuration. Returns a process exit code.
int cmd_sweep(const RunConfig& cfg, const std::string& out_dir);
int cmd_train(const RunConfig& cfg, const std::string& out_dir);
int cmd_prune(const RunConfig& cfg, const std::string& out_dir);
int cmd_robustness(const RunConfig& cfg, const std::string& out_dir);
int cmd_gridsearch(const RunConfig& cfg, const std::string& out_dir);

// Exponential-decay tap profile calibrated to the requested loss (dB) between
// the DC and half-symbol-rate bins of the tap DFT.
int cmd_gen_channel(double loss_db, int taps, int pre_cursors, const std::string& out_path);

}  // namespace neq
