// Desk-scale training runs: slow tests, minutes not seconds.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neq/harness.hpp"

using namespace neq;

TEST_CASE("desk-scale training approaches the joint ffe+dfe design at 14 dB"
          * doctest::may_fail()) {
    const Channel ch{{1.0, 0.4, 0.2, 0.1}, 0};
    const Modulation mod = Modulation::pam4();
    NeuralEqModel model(NeuralEqConfig{12, 4, 32, 4});
    TrainConfig tc;
    tc.snr_db = 14.0;
    tc.seed = 1;  // Table-III-style recipe at the 2e7-symbol desk budget
    const TrainResult result = train(model, tc, ch, mod);
    REQUIRE(result.complete);
    REQUIRE_FALSE(result.diverged);
    REQUIRE(result.valid_ber < 3e-2);  // far below the raw slicer's error floor

    const double sigma = sigma_for_snr(ch, mod, 14.0);
    EqualizerSpec dfe_spec;
    dfe_spec.kind = EqKind::Dfe;
    dfe_spec.dfe_ff = 8;
    dfe_spec.dfe_fb = 3;
    const BerPoint dfe = evaluate_ber(make_equalizer(dfe_spec, ch, mod, sigma, nullptr), ch, mod,
                                      14.0, 1'000'000, 7, "dfe");
    // At this budget the net settles near the linear-equalizer solution, a
    // few percent shy of the joint design; flagged, not gating.
    CHECK(result.valid_ber < dfe.ber);

    // every loss sample is finite; the 100-batch moving average of the first
    // tenth of the run should not climb (soft check: a failure here means the
    // optimizer setup deserves a look, not that the build is broken)
    for (const TraceRow& row : result.trace) CHECK(std::isfinite(row.loss));
    const std::size_t tenth = result.trace.size() / 10;
    if (tenth > 100) {
        double prev = 1e300;
        for (std::size_t k = 0; k + 100 <= tenth; k += 100) {
            double ma = 0.0;
            for (std::size_t i = k; i < k + 100; ++i) ma += result.trace[i].loss;
            ma /= 100.0;
            WARN_LE(ma, prev * 1.02);
            prev = ma;
        }
    }
}

TEST_CASE("a net trained on the quiet channel decodes it almost perfectly") {
    const Channel ch{{1.0, 0.4, 0.2, 0.1}, 0};
    const Modulation mod = Modulation::pam4();
    const double sigma = 0.01;
    const double snr = 10.0 * std::log10(ch.tap_power() * mod.mean_level_power() / (sigma * sigma));

    NeuralEqModel model(NeuralEqConfig{12, 4, 32, 4});
    TrainConfig tc;
    tc.snr_db = snr;
    tc.seed = 2;
    tc.train_symbols = 4'000'000;
    tc.valid_symbols = 200'000;
    const TrainResult result = train(model, tc, ch, mod);
    CHECK(result.complete);

    const SymbolStream z = random_symbols(100'000, mod, 909);
    const ObservedStream x = add_awgn(apply_channel(z, mod, ch), sigma, 910);
    const SymbolStream d = predict_stream(model, x, ch.pre_cursors);
    const auto [begin, end] = predict_valid_range(model, ch.pre_cursors, x.size());
    std::size_t errs = 0, total = 0;
    for (std::size_t t = std::max<std::size_t>(begin, 4); t < end; ++t) {
        errs += d.indices[t] != z.indices[t] ? 1 : 0;
        ++total;
    }
    const double accuracy = 1.0 - static_cast<double>(errs) / static_cast<double>(total);
    CHECK(accuracy >= 0.999);
}
