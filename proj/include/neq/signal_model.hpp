#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "neq/channel.hpp"
#include "neq/modulation.hpp"

namespace neq {

struct SymbolStream {
    std::vector<std::uint8_t> indices;  // level indices in [0, order)
    std::uint64_t seed = 0;

    std::size_t size() const { return indices.size(); }
};

struct ObservedStream {
    std::vector<double> samples;
    double sigma = 0.0;

    std::size_t size() const { return samples.size(); }
};

// Sliding windows of T received samples with the aligned transmit label.
// Window k covers x[k .. k+T-1] and is labeled z[k + D - 1 - pre].
struct WindowBatch {
    std::vector<double> xs;             // count * T, row-major
    std::vector<std::uint8_t> labels;   // count
    int T = 0;
    std::size_t count = 0;
    std::size_t first_window = 0;       // k of row 0

    const double* window(std::size_t row) const { return xs.data() + row * static_cast<std::size_t>(T); }
};

SymbolStream random_symbols(std::size_t count, const Modulation& mod, std::uint64_t seed);

// Same-length causal convolution; symbols before the stream start count as 0.
std::vector<double> apply_channel(const SymbolStream& z, const Modulation& mod, const Channel& ch);

// sigma with 10*log10(P_rx / sigma^2) = snr_db and P_rx = sum(taps^2) * E[level^2].
double sigma_for_snr(const Channel& ch, const Modulation& mod, double snr_db);

ObservedStream add_awgn(const std::vector<double>& signal, double sigma, std::uint64_t seed);

// Gray-coded bit errors between two equal-length index streams.
std::pair<std::uint64_t, std::uint64_t> bit_errors(const SymbolStream& truth,
                                                   const SymbolStream& decisions,
                                                   const Modulation& mod);

WindowBatch make_windows(const ObservedStream& x, const SymbolStream& z, int T, int D, int pre);

}  // namespace neq
