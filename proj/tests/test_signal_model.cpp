#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neq/signal_model.hpp"

using namespace neq;

TEST_CASE("random_symbols stays in range and is reproducible") {
    const Modulation pam2 = Modulation::pam2();
    const SymbolStream a = random_symbols(4, pam2, 123);
    for (auto s : a.indices) CHECK(s <= 1);
    const SymbolStream b = random_symbols(4, pam2, 123);
    CHECK(a.indices == b.indices);
    const SymbolStream c = random_symbols(4, pam2, 124);
    CHECK(a.indices != c.indices);
    CHECK_THROWS_AS(random_symbols(0, pam2, 1), std::invalid_argument);
}

TEST_CASE("random_symbols level frequencies are uniform") {
    const Modulation pam4 = Modulation::pam4();
    const SymbolStream z = random_symbols(1'000'000, pam4, 7);
    std::array<std::size_t, 4> counts{};
    for (auto s : z.indices) ++counts[s];
    for (int m = 0; m < 4; ++m) {
        const double freq = static_cast<double>(counts[static_cast<std::size_t>(m)]) / 1e6;
        CHECK(freq == doctest::Approx(0.25).epsilon(0.02));
        CHECK(std::abs(freq - 0.25) < 0.005);
    }
}

TEST_CASE("apply_channel convolves with cold edges") {
    const Modulation pam2 = Modulation::pam2();

    SymbolStream ones;
    ones.indices.assign(6, 1);  // level +1
    Channel identity{{1.0}, 0};
    for (double y : apply_channel(ones, pam2, identity)) CHECK(y == doctest::Approx(1.0));

    // levels [+1, -1] through h=[1.0, 0.4]
    SymbolStream z;
    z.indices = {1, 0};
    Channel ch{{1.0, 0.4}, 0};
    const std::vector<double> y = apply_channel(z, pam2, ch);
    REQUIRE(y.size() == 2);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(-0.6));

    // steady state of a constant level is the tap sum
    const Modulation pam4 = Modulation::pam4();
    SymbolStream constant;
    constant.indices.assign(16, 2);  // level +1/3
    Channel paper{{1.0, 0.4, 0.2, 0.1}, 0};
    const std::vector<double> s = apply_channel(constant, pam4, paper);
    for (std::size_t t = 4; t < s.size(); ++t)
        CHECK(s[t] == doctest::Approx(1.7 * (1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("convolution is linear at the level layer") {
    const Modulation pam4 = Modulation::pam4();
    Channel ch{{1.0, 0.4, 0.2, 0.1}, 0};
    const SymbolStream z1 = random_symbols(64, pam4, 11);
    const SymbolStream z2 = random_symbols(64, pam4, 12);
    const std::vector<double> y1 = apply_channel(z1, pam4, ch);
    const std::vector<double> y2 = apply_channel(z2, pam4, ch);

    // Combined stream built at the amplitude layer via a direct convolution.
    std::vector<double> combined(64, 0.0);
    for (std::size_t t = 0; t < 64; ++t)
        for (std::size_t i = 0; i <= std::min<std::size_t>(t, 3); ++i)
            combined[t] += ch.taps[i] * (2.0 * pam4.levels[z1.indices[t - i]] +
                                         3.0 * pam4.levels[z2.indices[t - i]]);
    for (std::size_t t = 0; t < 64; ++t)
        CHECK(std::abs(2.0 * y1[t] + 3.0 * y2[t] - combined[t]) < 1e-12);
}

TEST_CASE("sigma_for_snr closed forms") {
    const Modulation pam2 = Modulation::pam2();
    const Modulation pam4 = Modulation::pam4();
    Channel identity{{1.0}, 0};
    CHECK(sigma_for_snr(identity, pam2, 0.0) == doctest::Approx(1.0));
    CHECK(sigma_for_snr(identity, pam4, 0.0) == doctest::Approx(std::sqrt(5.0 / 9.0)));
    Channel paper{{1.0, 0.4, 0.2, 0.1}, 0};
    CHECK(sigma_for_snr(paper, pam4, 11.0) ==
          doctest::Approx(std::sqrt(1.21 * (5.0 / 9.0) / std::pow(10.0, 1.1))));
}

TEST_CASE("sigma_for_snr is strictly decreasing in snr") {
    const Modulation pam4 = Modulation::pam4();
    Channel paper{{1.0, 0.4, 0.2, 0.1}, 0};
    double prev = sigma_for_snr(paper, pam4, -5.0);
    for (double snr = -4.0; snr <= 20.0; snr += 1.0) {
        const double s = sigma_for_snr(paper, pam4, snr);
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("add_awgn basics") {
    std::vector<double> signal(1000, 0.5);
    const ObservedStream zero = add_awgn(signal, 0.0, 9);
    CHECK(zero.samples == signal);
    CHECK_THROWS_AS(add_awgn(signal, -1.0, 9), std::invalid_argument);

    const ObservedStream a = add_awgn(signal, 0.3, 9);
    const ObservedStream b = add_awgn(signal, 0.3, 9);
    CHECK(a.samples == b.samples);
}

TEST_CASE("add_awgn sample variance concentrates") {
    std::vector<double> signal(1'000'000, 0.0);
    const ObservedStream x = add_awgn(signal, 1.0, 42);
    double mean = 0.0;
    for (double s : x.samples) mean += s;
    mean /= 1e6;
    double var = 0.0;
    for (double s : x.samples) var += (s - mean) * (s - mean);
    var /= 1e6;
    CHECK(std::abs(var - 1.0) < 0.01);
    CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("bit_errors uses the Gray map") {
    const Modulation pam4 = Modulation::pam4();
    SymbolStream a, b;
    a.indices = {0, 1, 2, 3};
    b.indices = {0, 1, 2, 3};
    auto [e0, n0] = bit_errors(a, b, pam4);
    CHECK(e0 == 0);
    CHECK(n0 == 8);

    // adjacent levels differ in exactly one bit
    for (int i = 0; i + 1 < 4; ++i) CHECK(gray_bit_distance(i, i + 1) == 1);
    // full 4x4 table of the 00,01,11,10 labeling
    CHECK(gray_bit_distance(0, 2) == 2);
    CHECK(gray_bit_distance(1, 3) == 2);
    CHECK(gray_bit_distance(0, 3) == 1);

    b.indices = {1, 1, 2, 3};
    auto [e1, n1] = bit_errors(a, b, pam4);
    CHECK(e1 == 1);
    CHECK(n1 == 8);

    SymbolStream shorter;
    shorter.indices = {0};
    CHECK_THROWS_AS(bit_errors(a, shorter, pam4), std::invalid_argument);
}

TEST_CASE("make_windows alignment") {
    const Modulation pam4 = Modulation::pam4();
    const SymbolStream z = random_symbols(100, pam4, 5);
    ObservedStream x;
    x.samples.resize(100);
    for (std::size_t i = 0; i < 100; ++i) x.samples[i] = static_cast<double>(i);

    SUBCASE("degenerate window") {
        const WindowBatch w = make_windows(x, z, 1, 1, 0);
        REQUIRE(w.count == 100);
        for (std::size_t k = 0; k < w.count; ++k) {
            CHECK(w.window(k)[0] == x.samples[k]);
            CHECK(w.labels[k] == z.indices[k]);
        }
    }
    SUBCASE("paper geometry with two pre-cursors") {
        const WindowBatch w = make_windows(x, z, 12, 4, 2);
        REQUIRE(w.count == 89);
        CHECK(w.first_window == 0);
        CHECK(w.labels[0] == z.indices[1]);  // 0 + 4 - 1 - 2
        CHECK(w.window(0)[0] == x.samples[0]);
        CHECK(w.window(0)[11] == x.samples[11]);
    }
    SUBCASE("stream shorter than the window") {
        ObservedStream tiny;
        tiny.samples.assign(5, 0.0);
        SymbolStream ztiny;
        ztiny.indices.assign(5, 0);
        const WindowBatch w = make_windows(tiny, ztiny, 12, 4, 0);
        CHECK(w.count == 0);
    }
}

TEST_CASE("window labels reconstruct the aligned sub-stream") {
    const Modulation pam4 = Modulation::pam4();
    const SymbolStream z = random_symbols(200, pam4, 77);
    ObservedStream x;
    x.samples.assign(200, 0.0);
    const int T = 12, D = 4, pre = 2;
    const WindowBatch w = make_windows(x, z, T, D, pre);
    for (std::size_t k = 0; k < w.count; ++k)
        CHECK(w.labels[k] == z.indices[w.first_window + k + D - 1 - pre]);
}
