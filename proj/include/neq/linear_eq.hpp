#pragma once

#include <string>
#include <vector>

#include "neq/signal_model.hpp"

namespace neq {

// FIR equalizer; output sample t multiplies x[t + cursor - k] by taps[k], so
// the combined channel+FFE pulse is designed to peak at index `cursor`.
struct FfeTaps {
    std::vector<double> taps;
    int cursor = 0;
};

struct DfeConfig {
    FfeTaps ff;
    std::vector<double> fb;  // applied to past decisions, most recent first
};

struct DesignInfo {
    bool ls_fallback = false;  // normal equations were singular
    double residual = 0.0;
};

// Default decision delay: pre_cursors + 2, clamped into [0, n_taps).
int default_ffe_cursor(const Channel& ch, int n_taps);

// Wiener solution of (R_hh + sigma^2/E[level^2] I) w = h(cursor - k).
FfeTaps design_mmse_ffe(const Channel& ch, const Modulation& mod, double sigma, int n_taps,
                        int cursor, DesignInfo* info = nullptr);

// Output t is the decision statistic for symbol t; out-of-range input is 0.
std::vector<double> ffe_apply(const FfeTaps& taps, const std::vector<double>& x);

// FFE + decision feedback with a nearest-level slicer. Pre-stream decisions
// contribute amplitude 0, matching the cold-channel convolution edges.
SymbolStream dfe_run(const DfeConfig& cfg, const std::vector<double>& x, const Modulation& mod);

// FFE ignores the first n_fb post-cursor positions (handed to feedback);
// feedback taps are the residual post-cursors of the equalized pulse.
DfeConfig design_ffe_dfe(const Channel& ch, const Modulation& mod, double sigma, int n_ff,
                         int n_fb, DesignInfo* info = nullptr);

// Combined pulse conv(w, h), aligned so index `cursor` is the decision sample.
std::vector<double> equalized_pulse(const FfeTaps& taps, const Channel& ch);

// Channel-style text format: line 1 = cursor, then the taps.
void save_ffe(const std::string& path, const FfeTaps& taps);
FfeTaps load_ffe(const std::string& path);
// Line 1 = cursor, line 2 = feedback count, then ff taps followed by fb taps.
void save_dfe(const std::string& path, const DfeConfig& cfg);
DfeConfig load_dfe(const std::string& path);

}  // namespace neq
