#include "neq/signal_model.hpp"

#include <cmath>
#include <stdexcept>

#include "neq/rng.hpp"

namespace neq {

SymbolStream random_symbols(std::size_t count, const Modulation& mod, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("random_symbols: empty stream requested");
    SymbolStream z;
    z.seed = seed;
    z.indices.resize(count);
    CounterRng rng(seed);
    const auto order = static_cast<std::uint32_t>(mod.order);
    for (auto& s : z.indices) s = static_cast<std::uint8_t>(rng.uniform_below(order));
    return z;
}

std::vector<double> apply_channel(const SymbolStream& z, const Modulation& mod, const Channel& ch) {
    const std::size_t n = z.size();
    const int len = ch.length();
    std::vector<double> y(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        const int imax = static_cast<int>(std::min<std::size_t>(t + 1, static_cast<std::size_t>(len)));
        for (int i = 0; i < imax; ++i)
            acc += ch.taps[static_cast<std::size_t>(i)] * mod.levels[z.indices[t - static_cast<std::size_t>(i)]];
        y[t] = acc;
    }
    return y;
}

double sigma_for_snr(const Channel& ch, const Modulation& mod, double snr_db) {
    if (!std::isfinite(snr_db)) throw std::invalid_argument("sigma_for_snr: snr_db must be finite");
    const double p_rx = ch.tap_power() * mod.mean_level_power();
    return std::sqrt(p_rx / std::pow(10.0, snr_db / 10.0));
}

ObservedStream add_awgn(const std::vector<double>& signal, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_awgn: negative sigma");
    ObservedStream x;
    x.sigma = sigma;
    x.samples = signal;
    if (sigma > 0.0) {
        CounterRng rng(seed);
        for (auto& s : x.samples) s += sigma * rng.gaussian();
    }
    return x;
}

std::pair<std::uint64_t, std::uint64_t> bit_errors(const SymbolStream& truth,
                                                   const SymbolStream& decisions,
                                                   const Modulation& mod) {
    if (truth.size() != decisions.size())
        throw std::invalid_argument("bit_errors: stream length mismatch");
    std::uint64_t errs = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        errs += static_cast<std::uint64_t>(gray_bit_distance(truth.indices[i], decisions.indices[i]));
    const std::uint64_t total = truth.size() * static_cast<std::uint64_t>(mod.bits_per_symbol());
    return {errs, total};
}

WindowBatch make_windows(const ObservedStream& x, const SymbolStream& z, int T, int D, int pre) {
    if (T < 1 || D < 1 || D > T) throw std::invalid_argument("make_windows: need 1 <= D <= T");
    if (pre < 0) throw std::invalid_argument("make_windows: negative pre-cursor count");
    WindowBatch batch;
    batch.T = T;
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(T)) return batch;
    const std::ptrdiff_t label_off = D - 1 - pre;
    std::size_t first = 0;
    bool have_first = false;
    for (std::size_t k = 0; k + static_cast<std::size_t>(T) <= n; ++k) {
        const std::ptrdiff_t label = static_cast<std::ptrdiff_t>(k) + label_off;
        if (label < 0 || label >= static_cast<std::ptrdiff_t>(z.size())) continue;
        if (!have_first) {
            first = k;
            have_first = true;
        }
        batch.xs.insert(batch.xs.end(), x.samples.begin() + static_cast<std::ptrdiff_t>(k),
                        x.samples.begin() + static_cast<std::ptrdiff_t>(k) + T);
        batch.labels.push_back(z.indices[static_cast<std::size_t>(label)]);
    }
    batch.count = batch.labels.size();
    batch.first_window = first;
    return batch;
}

}  // namespace neq
