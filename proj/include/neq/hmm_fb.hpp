#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "neq/signal_model.hpp"

namespace neq {

struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;

// ISI-channel HMM: a hidden state is the tuple of the last |h| transmitted
// level indices. State ids are base-|MOD| numbers with digit 0 the newest
// symbol, so successors and predecessors follow from digit shifts.
struct Hmm {
    Modulation mod;
    Channel channel;
    double sigma = 0.0;
    std::size_t n_states = 0;
    std::vector<double> outputs;          // noiseless output per state
    std::vector<std::uint32_t> successors;  // n_states * order

    std::size_t successor(std::size_t state, int symbol) const {
        return successors[state * static_cast<std::size_t>(mod.order) + static_cast<std::size_t>(symbol)];
    }
    int newest_symbol(std::size_t state) const {
        return static_cast<int>(state % static_cast<std::size_t>(mod.order));
    }
    // History digits, newest first: entry i is the symbol sent i steps ago.
    std::vector<int> history(std::size_t state) const;
};

Hmm build_hmm(const Channel& ch, const Modulation& mod, double sigma,
              std::size_t state_cap = kDefaultStateCap);

// Gaussian observation density of Eq-style emission: N(state_output, sigma^2).
double emission(double x, double state_output, double sigma);

// Row-normalized recursion values plus the per-step normalization factors.
// Un-normalized row t is row(t) * prod(scales[0..t]).
struct ScaledMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
    std::vector<double> scales;  // one per row

    double at(std::size_t t, std::size_t i) const { return values[t * cols + i]; }
};

ScaledMatrix forward(const Hmm& hmm, const std::vector<double>& x);
ScaledMatrix backward(const Hmm& hmm, const std::vector<double>& x);

struct SymbolPosteriors {
    std::size_t steps = 0;
    int order = 0;
    std::vector<double> p;  // steps * order, rows sum to 1

    double at(std::size_t t, int m) const { return p[t * static_cast<std::size_t>(order) + static_cast<std::size_t>(m)]; }
};

SymbolPosteriors posterior_symbols(const Hmm& hmm, const std::vector<double>& x);

// MAP symbol decisions over overlapping blocks; only interior decisions of
// each block are kept. Streams shorter than one block decode in one piece.
SymbolStream fb_decode(const Hmm& hmm, const ObservedStream& x, std::size_t block, std::size_t overlap);

std::size_t default_fb_overlap(const Channel& ch);

void export_posteriors_csv(std::ostream& out, const SymbolPosteriors& post);

}  // namespace neq
