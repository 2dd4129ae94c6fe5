#include "neq/hmm_fb.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace neq {

std::vector<int> Hmm::history(std::size_t state) const {
    std::vector<int> h(channel.taps.size());
    const auto order = static_cast<std::size_t>(mod.order);
    for (auto& d : h) {
        d = static_cast<int>(state % order);
        state /= order;
    }
    return h;
}

Hmm build_hmm(const Channel& ch, const Modulation& mod, double sigma, std::size_t state_cap) {
    ch.validate();
    if (sigma <= 0.0) throw std::invalid_argument("build_hmm: sigma must be positive");
    const auto order = static_cast<std::size_t>(mod.order);
    const int len = ch.length();
    // Overflow-safe state count.
    std::size_t n = 1;
    for (int i = 0; i < len; ++i) {
        if (n > state_cap / order)
            throw capacity_error("build_hmm: " + std::to_string(mod.order) + "^" +
                                 std::to_string(len) + " states exceed the cap of " +
                                 std::to_string(state_cap));
        n *= order;
    }
    if (n > state_cap)
        throw capacity_error("build_hmm: " + std::to_string(n) + " states exceed the cap of " +
                             std::to_string(state_cap));

    Hmm hmm;
    hmm.mod = mod;
    hmm.channel = ch;
    hmm.sigma = sigma;
    hmm.n_states = n;
    hmm.outputs.resize(n);
    hmm.successors.resize(n * order);

    const std::size_t hist_mod = n / order;  // order^(len-1)
    for (std::size_t s = 0; s < n; ++s) {
        double out = 0.0;
        std::size_t digits = s;
        for (int i = 0; i < len; ++i) {
            out += ch.taps[static_cast<std::size_t>(i)] * mod.levels[digits % order];
            digits /= order;
        }
        hmm.outputs[s] = out;
        const std::size_t shifted = (s % hist_mod) * order;
        for (std::size_t m = 0; m < order; ++m)
            hmm.successors[s * order + m] = static_cast<std::uint32_t>(shifted + m);
    }
    return hmm;
}

double emission(double x, double state_output, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("emission: sigma must be positive");
    const double d = (x - state_output) / sigma;
    return std::exp(-0.5 * d * d) / (sigma * 2.5066282746310005024);
}

namespace {

void fill_emissions(const Hmm& hmm, double x, std::vector<double>& e) {
    const double inv_sigma = 1.0 / hmm.sigma;
    const double norm = inv_sigma / 2.5066282746310005024;
    const std::size_t n = hmm.n_states;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (x - hmm.outputs[i]) * inv_sigma;
        e[i] = std::exp(-0.5 * d * d) * norm;
    }
}

double normalize_row(double* row, std::size_t n, std::size_t t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += row[i];
    if (!(sum > 0.0) || !std::isfinite(sum))
        throw numerical_error("forward-backward underflow at step " + std::to_string(t));
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < n; ++i) row[i] *= inv;
    return sum;
}

}  // namespace

ScaledMatrix forward(const Hmm& hmm, const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("forward: empty observation sequence");
    const std::size_t n = hmm.n_states;
    const std::size_t steps = x.size();
    const auto order = static_cast<std::size_t>(hmm.mod.order);
    const std::size_t hist_mod = n / order;
    const double trans = 1.0 / static_cast<double>(order);

    ScaledMatrix a;
    a.rows = steps;
    a.cols = n;
    a.values.resize(steps * n);
    a.scales.resize(steps);

    std::vector<double> e(n);
    fill_emissions(hmm, x[0], e);
    const double prior = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) a.values[i] = prior * e[i];
    a.scales[0] = normalize_row(a.values.data(), n, 0);

    for (std::size_t t = 1; t < steps; ++t) {
        fill_emissions(hmm, x[t], e);
        const double* prev = a.values.data() + (t - 1) * n;
        double* cur = a.values.data() + t * n;
        // Predecessors of state i share the digit prefix i/order and differ in
        // their oldest symbol, which lives at stride hist_mod.
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = i / order;
            double acc = 0.0;
            for (std::size_t d = 0; d < order; ++d) acc += prev[base + d * hist_mod];
            cur[i] = acc * trans * e[i];
        }
        a.scales[t] = normalize_row(cur, n, t);
    }
    return a;
}

ScaledMatrix backward(const Hmm& hmm, const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("backward: empty observation sequence");
    const std::size_t n = hmm.n_states;
    const std::size_t steps = x.size();
    const auto order = static_cast<std::size_t>(hmm.mod.order);
    const std::size_t hist_mod = n / order;
    const double trans = 1.0 / static_cast<double>(order);

    ScaledMatrix b;
    b.rows = steps;
    b.cols = n;
    b.values.resize(steps * n);
    b.scales.resize(steps);

    double* last = b.values.data() + (steps - 1) * n;
    std::fill(last, last + n, 1.0);
    b.scales[steps - 1] = normalize_row(last, n, steps - 1);

    std::vector<double> e(n);
    for (std::size_t t = steps - 1; t > 0; --t) {
        fill_emissions(hmm, x[t], e);
        const double* next = b.values.data() + t * n;
        double* cur = b.values.data() + (t - 1) * n;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t shifted = (j % hist_mod) * order;
            double acc = 0.0;
            for (std::size_t m = 0; m < order; ++m) {
                const std::size_t i = shifted + m;
                acc += next[i] * e[i];
            }
            cur[j] = acc * trans;
        }
        b.scales[t - 1] = normalize_row(cur, n, t - 1);
    }
    return b;
}

SymbolPosteriors posterior_symbols(const Hmm& hmm, const std::vector<double>& x) {
    const ScaledMatrix a = forward(hmm, x);
    const ScaledMatrix b = backward(hmm, x);
    const std::size_t n = hmm.n_states;
    const std::size_t steps = x.size();
    const auto order = static_cast<std::size_t>(hmm.mod.order);

    SymbolPosteriors post;
    post.steps = steps;
    post.order = hmm.mod.order;
    post.p.assign(steps * order, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        const double* at = a.values.data() + t * n;
        const double* bt = b.values.data() + t * n;
        double* row = post.p.data() + t * order;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = at[i] * bt[i];
            row[i % order] += g;
            total += g;
        }
        if (!(total > 0.0) || !std::isfinite(total))
            throw numerical_error("posterior underflow at step " + std::to_string(t));
        const double inv = 1.0 / total;
        for (std::size_t m = 0; m < order; ++m) row[m] *= inv;
    }
    return post;
}

namespace {

inline int argmax_symbol(const double* row, int order) {
    int best = 0;
    for (int m = 1; m < order; ++m)
        if (row[m] > row[best]) best = m;
    return best;
}

}  // namespace

SymbolStream fb_decode(const Hmm& hmm, const ObservedStream& x, std::size_t block, std::size_t overlap) {
    if (block <= 2 * overlap) throw std::invalid_argument("fb_decode: need block > 2*overlap");
    if (overlap < static_cast<std::size_t>(hmm.channel.length()))
        throw std::invalid_argument("fb_decode: overlap must cover the channel memory");
    const std::size_t n = x.size();
    SymbolStream out;
    out.indices.resize(n);
    if (n == 0) return out;

    const int order = hmm.mod.order;
    std::vector<double> chunk;
    std::size_t start = 0;
    std::size_t decided = 0;
    while (decided < n) {
        const std::size_t end = std::min(start + block, n);
        chunk.assign(x.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     x.samples.begin() + static_cast<std::ptrdiff_t>(end));
        const SymbolPosteriors post = posterior_symbols(hmm, chunk);
        const std::size_t keep_end = (end == n) ? n : end - overlap;
        for (std::size_t t = decided; t < keep_end; ++t)
            out.indices[t] = static_cast<std::uint8_t>(
                argmax_symbol(post.p.data() + (t - start) * static_cast<std::size_t>(order), order));
        decided = keep_end;
        if (end == n) break;
        start = end - 2 * overlap;
    }
    return out;
}

std::size_t default_fb_overlap(const Channel& ch) {
    return std::max<std::size_t>(4 * static_cast<std::size_t>(ch.length()), 16);
}

void export_posteriors_csv(std::ostream& out, const SymbolPosteriors& post) {
    out << "t,symbol,probability\n";
    char buf[40];
    for (std::size_t t = 0; t < post.steps; ++t)
        for (int m = 0; m < post.order; ++m) {
            std::snprintf(buf, sizeof buf, "%.17g", post.at(t, m));
            out << t << ',' << m << ',' << buf << "\n";
        }
}

}  // namespace neq
