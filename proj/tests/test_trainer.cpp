#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neq/harness.hpp"
#include "neq/rng.hpp"
#include "test_util.hpp"

using namespace neq;

TEST_CASE("cross-entropy loss values") {
    CHECK(ce_loss({1.0, 0.0}, 0) == doctest::Approx(0.0));
    CHECK(ce_loss({0.25, 0.25, 0.25, 0.25}, 2) == doctest::Approx(std::log(4.0)));
    CHECK(ce_loss({0.1, 0.9}, 0) == doctest::Approx(2.302585092994046));
    CHECK_THROWS_AS(ce_loss({0.5, 0.5}, 2), std::invalid_argument);
    CHECK_THROWS_AS(ce_loss({0.5, 0.5}, -1), std::invalid_argument);
    CHECK(std::isfinite(ce_loss({0.0, 1.0}, 0)));  // clamped, not infinite
}

TEST_CASE("adam step behavior") {
    NeuralEqModel model(NeuralEqConfig{1, 1, 1, 2});
    model.init_params(7);
    const std::vector<double> before = model.store().values;
    AdamState st;
    st.init(model.store().total());

    SUBCASE("zero gradients leave parameters unchanged") {
        std::vector<double> grad(model.store().total(), 0.0);
        adam_step(model.store(), grad, st, 1e-3);
        CHECK(model.store().values == before);
        CHECK(st.t == 1);
    }
    SUBCASE("first step moves by about the learning rate") {
        std::vector<double> grad(model.store().total(), 0.0);
        const TensorInfo& t = neq::test::find_tensor(model, "f1.wp");
        grad[t.offset] = 1.0;
        adam_step(model.store(), grad, st, 1e-3);
        const double delta = before[t.offset] - model.store().values[t.offset];
        CHECK(delta == doctest::Approx(1e-3).epsilon(1e-6));
    }
    SUBCASE("masked weight ignores its gradient") {
        const TensorInfo& t = neq::test::find_tensor(model, "f1.W1");
        model.store().mask[t.offset] = 0;
        model.store().apply_mask();
        std::vector<double> grad(model.store().total(), 0.0);
        grad[t.offset] = 5.0;
        for (int i = 0; i < 3; ++i) adam_step(model.store(), grad, st, 1e-2);
        CHECK(model.store().values[t.offset] == 0.0);
    }
    SUBCASE("non-finite gradient names the tensor") {
        std::vector<double> grad(model.store().total(), 0.0);
        const TensorInfo& t = neq::test::find_tensor(model, "head.Wg2");
        grad[t.offset] = std::nan("");
        try {
            adam_step(model.store(), grad, st, 1e-3);
            FAIL("expected a throw");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("head.Wg2") != std::string::npos);
        }
    }
}

TEST_CASE("batch generator shards never repeat") {
    const Channel ch{{1.0, 0.4, 0.2, 0.1}, 0};
    const Modulation mod = Modulation::pam4();
    BatchGenerator gen(ch, mod, 0.2, 12, 4, 99, 1);
    RMat a, b;
    std::vector<std::uint8_t> la, lb;
    gen.next(64, a, la);
    CHECK(gen.shards_consumed() == 1);
    gen.next(64, b, lb);
    CHECK(gen.shards_consumed() == 2);
    CHECK((a - b).cwiseAbs().maxCoeff() > 0.0);  // fresh shard, fresh data

    BatchGenerator replay(ch, mod, 0.2, 12, 4, 99, 1);
    RMat c;
    std::vector<std::uint8_t> lc;
    replay.next(64, c, lc);
    CHECK((a - c).cwiseAbs().maxCoeff() == 0.0);
    CHECK(la == lc);

    BatchGenerator other_tag(ch, mod, 0.2, 12, 4, 99, 2);
    other_tag.next(64, c, lc);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("one-batch budget runs exactly one optimizer step") {
    const Channel ch{{1.0, 0.5}, 0};
    const Modulation mod = Modulation::pam2();
    NeuralEqModel model(NeuralEqConfig{4, 2, 3, 2});
    TrainConfig tc;
    tc.batch_size = 256;
    tc.train_symbols = 256;
    tc.valid_symbols = 2048;
    tc.snr_db = 10.0;
    tc.seed = 3;
    const TrainResult r = train(model, tc, ch, mod);
    CHECK(r.steps_run == 1);
    CHECK(r.complete);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].has_valid);  // final step always validates
    CHECK(r.valid_ber < 1.0);
}

TEST_CASE("training is deterministic and resumable") {
    const Channel ch{{1.0, 0.5}, 0};
    const Modulation mod = Modulation::pam2();
    TrainConfig tc;
    tc.batch_size = 256;
    tc.train_symbols = 256 * 8;
    tc.valid_symbols = 2048;
    tc.valid_every = 3;
    tc.snr_db = 8.0;
    tc.seed = 11;

    NeuralEqModel a(NeuralEqConfig{4, 2, 3, 2});
    const TrainResult ra = train(a, tc, ch, mod);
    NeuralEqModel b(NeuralEqConfig{4, 2, 3, 2});
    const TrainResult rb = train(b, tc, ch, mod);
    CHECK(ra.valid_ber == rb.valid_ber);
    CHECK(a.store().values == b.store().values);
    CHECK(ra.trace.size() == rb.trace.size());

    // pause after three steps, then continue under the saved state
    NeuralEqModel c(NeuralEqConfig{4, 2, 3, 2});
    TrainerState st;
    TrainConfig paused = tc;
    paused.stop_after_steps = 3;
    const TrainResult rc1 = train(c, paused, ch, mod, &st);
    CHECK_FALSE(rc1.complete);
    CHECK(st.next_step == 4);
    const TrainResult rc2 = train(c, tc, ch, mod, &st);
    CHECK(rc2.complete);
    CHECK(c.store().values == a.store().values);
    CHECK(rc2.valid_ber == ra.valid_ber);
}

TEST_CASE("trainer gradient check on the small configuration") {
    NeuralEqModel model(NeuralEqConfig{4, 2, 3, 4});
    model.init_params(500);
    CHECK(neq::test::max_grad_rel_error(model, 4, 501) <= 1e-4);
}

TEST_CASE("evaluate_ber on a perfect equalizer") {
    const Channel ch{{1.0}, 0};
    const Modulation mod = Modulation::pam2();
    // the identity channel at zero-ish noise plus a slicer recovers everything
    EqualizerSpec spec;
    spec.kind = EqKind::Slicer;
    const EqualizerFn fn = make_equalizer(spec, ch, mod, 0.0, nullptr);
    const BerPoint p = evaluate_ber(fn, ch, mod, 60.0, 100'000, 5, "slicer");
    CHECK(p.ber == 0.0);
    CHECK(p.bit_errors == 0);
    CHECK(p.total_bits > 90'000);
}

TEST_CASE("slicer on the identity channel reproduces the gaussian tail") {
    const Channel ch{{1.0}, 0};
    const Modulation mod = Modulation::pam2();
    // sigma = 0.5 -> snr = -20 log10(0.5)
    const double snr = -20.0 * std::log10(0.5);
    EqualizerSpec spec;
    spec.kind = EqKind::Slicer;
    const EqualizerFn fn = make_equalizer(spec, ch, mod, 0.5, nullptr);
    const BerPoint p = evaluate_ber(fn, ch, mod, snr, 2'000'000, 8, "slicer");
    const double q2 = 0.5 * std::erfc(2.0 / std::sqrt(2.0));
    CHECK(std::abs(p.ber - q2) < 0.0008);
    CHECK(p.ci_low < q2);
    CHECK(q2 < p.ci_high);
}

TEST_CASE("evaluate_ber is reproducible and shard-additive") {
    const Channel ch{{1.0, 0.4, 0.2, 0.1}, 0};
    const Modulation mod = Modulation::pam4();
    EqualizerSpec spec;
    spec.kind = EqKind::Ffe;
    const double sigma = sigma_for_snr(ch, mod, 14.0);
    const EqualizerFn fn = make_equalizer(spec, ch, mod, sigma, nullptr);
    const BerPoint a = evaluate_ber(fn, ch, mod, 14.0, 150'000, 21, "ffe");
    const BerPoint b = evaluate_ber(fn, ch, mod, 14.0, 150'000, 21, "ffe");
    CHECK(a.bit_errors == b.bit_errors);
    CHECK(a.total_bits == b.total_bits);
    CHECK(a.ber == b.ber);
    CHECK(a.ci_low <= a.ber);
    CHECK(a.ber <= a.ci_high);
}

TEST_CASE("wilson interval basic properties") {
    const auto [l0, h0] = wilson_interval(0, 1000);
    CHECK(l0 == 0.0);
    CHECK(h0 > 0.0);
    CHECK(h0 < 0.01);
    const auto [l1, h1] = wilson_interval(1000, 1000);
    CHECK(h1 == 1.0);
    CHECK(l1 < 1.0);
    const auto [l2, h2] = wilson_interval(50, 1000);
    CHECK(l2 < 0.05);
    CHECK(h2 > 0.05);
    const auto [l3, h3] = wilson_interval(500, 10000);
    CHECK(h3 - l3 < h2 - l2);  // more data, tighter interval
}
