#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neq/neural_eq.hpp"
#include "neq/rng.hpp"
#include "test_util.hpp"

using namespace neq;

TEST_CASE("parameter count closed form") {
    CHECK(param_count(NeuralEqConfig{1, 1, 1, 2}) == 17);
    CHECK(param_count(NeuralEqConfig{12, 4, 32, 4}) == 28'040);
    // leading term is quadratic in the width
    const double r = static_cast<double>(param_count(NeuralEqConfig{12, 4, 512, 4})) /
                     static_cast<double>(param_count(NeuralEqConfig{12, 4, 256, 4}));
    CHECK(r == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("operation counts per stage pair") {
    const OpCount n32 = op_count(NeuralEqConfig{12, 4, 32, 4});
    CHECK(n32.multiplies == 2'080);
    CHECK(n32.adds == 2'080);
    CHECK(n32.tanhs == 96);
    CHECK(n32.perceptron_multiplies == 2);
    CHECK(op_count(NeuralEqConfig{4, 2, 1, 2}).multiplies == 3);
}

TEST_CASE("mlp parameter count reproduces the baseline table") {
    CHECK(mlp_param_count(MlpBaselineConfig{216, 376, 12, 4}) == 85'908);
    CHECK(mlp_param_count(MlpBaselineConfig{408, 488, 12, 4}) == 206'852);
}

TEST_CASE("init is deterministic with zero biases") {
    NeuralEqModel a(NeuralEqConfig{6, 2, 8, 4});
    NeuralEqModel b(NeuralEqConfig{6, 2, 8, 4});
    a.init_params(33);
    b.init_params(33);
    CHECK(a.store().values == b.store().values);
    NeuralEqModel c(NeuralEqConfig{6, 2, 8, 4});
    c.init_params(34);
    CHECK(a.store().values != c.store().values);

    for (const TensorInfo& t : a.store().tensors()) {
        if (t.weight) continue;
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(a.store().values[t.offset + i] == 0.0);
    }
}

TEST_CASE("init weight variance matches the uniform fan rule") {
    NeuralEqModel model(NeuralEqConfig{12, 4, 32, 4});
    model.init_params(5);
    for (const char* name : {"f1.W1", "b12.W2", "head.Wg1"}) {
        const TensorInfo& t = neq::test::find_tensor(model, name);
        const double* p = model.store().values.data() + t.offset;
        double var = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) var += p[i] * p[i];
        var /= static_cast<double>(t.size());
        const double expect = 2.0 / static_cast<double>(t.rows + t.cols);
        CHECK(std::abs(var - expect) / expect < 0.10);
    }
}

TEST_CASE("zero weights give a uniform posterior") {
    NeuralEqModel model(NeuralEqConfig{5, 2, 3, 4});
    model.store().allocate();  // all zeros
    const std::vector<double> p = model.forward_infer({0.1, -0.2, 0.3, 0.4, -0.5});
    for (double v : p) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax output is a probability vector") {
    NeuralEqModel model(NeuralEqConfig{6, 3, 5, 4});
    model.init_params(17);
    CounterRng rng(18);
    for (int draw = 0; draw < 20; ++draw) {
        std::vector<double> window(6);
        for (double& v : window) v = 4.0 * (2.0 * rng.uniform01() - 1.0);
        const std::vector<double> p = model.forward_infer(window);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(model.forward_infer({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("hand-computed two-stage network") {
    NeuralEqModel model(NeuralEqConfig{2, 1, 1, 2});
    model.store().allocate();
    neq::test::set_tensor(model, "f1.wp", {0.3});
    neq::test::set_tensor(model, "f1.bp", {0.1});
    neq::test::set_tensor(model, "f1.u", {0.5});
    neq::test::set_tensor(model, "f1.W1", {0.7});
    neq::test::set_tensor(model, "f1.v", {0.2});
    neq::test::set_tensor(model, "f1.c1", {-0.1});
    neq::test::set_tensor(model, "f1.W2", {0.9});
    neq::test::set_tensor(model, "f1.c2", {0.05});
    neq::test::set_tensor(model, "b2.wp", {-0.4});
    neq::test::set_tensor(model, "b2.bp", {0.2});
    neq::test::set_tensor(model, "b2.u", {0.6});
    neq::test::set_tensor(model, "b2.W1", {0.5});
    neq::test::set_tensor(model, "b2.v", {-0.3});
    neq::test::set_tensor(model, "b2.c1", {0.15});
    neq::test::set_tensor(model, "b2.W2", {-0.8});
    neq::test::set_tensor(model, "b2.c2", {0.0});
    neq::test::set_tensor(model, "a0", {0.11});
    neq::test::set_tensor(model, "b0", {-0.07});
    neq::test::set_tensor(model, "head.Wg1", {0.4, -0.6});
    neq::test::set_tensor(model, "head.cg1", {0.25});
    neq::test::set_tensor(model, "head.Wg2", {0.35, -0.45});
    neq::test::set_tensor(model, "head.cg2", {0.01, -0.02});

    const double x1 = 0.8, x2 = -0.5;
    // forward stage on x1 from a0
    const double mf = std::tanh(0.3 * x1 + 0.1) * 0.5;
    const double hf = std::tanh(0.7 * 0.11 + mf * 0.2 - 0.1);
    const double a = std::tanh(0.9 * hf + 0.05);
    // backward stage on x2 from b0
    const double mb = std::tanh(-0.4 * x2 + 0.2) * 0.6;
    const double hb = std::tanh(0.5 * -0.07 + mb * -0.3 + 0.15);
    const double b = std::tanh(-0.8 * hb + 0.0);
    // merge head
    const double g = std::tanh(0.4 * a - 0.6 * b + 0.25);
    const double l0 = 0.35 * g + 0.01;
    const double l1 = -0.45 * g - 0.02;
    const double e0 = std::exp(l0), e1 = std::exp(l1);

    const std::vector<double> p = model.forward_infer({x1, x2});
    CHECK(std::abs(p[0] - e0 / (e0 + e1)) < 1e-12);
    CHECK(std::abs(p[1] - e1 / (e0 + e1)) < 1e-12);
}

TEST_CASE("batched forward matches single-window inference") {
    NeuralEqModel model(NeuralEqConfig{7, 3, 6, 4});
    model.init_params(71);
    CounterRng rng(72);
    RMat x(9, 7);
    for (Eigen::Index r = 0; r < 9; ++r)
        for (Eigen::Index c = 0; c < 7; ++c) x(r, c) = 2.0 * rng.uniform01() - 1.0;
    Cache cache;
    model.forward_batch(x, cache);
    for (Eigen::Index r = 0; r < 9; ++r) {
        std::vector<double> window(7);
        for (Eigen::Index c = 0; c < 7; ++c) window[static_cast<std::size_t>(c)] = x(r, c);
        const std::vector<double> p = model.forward_infer(window);
        for (int cls = 0; cls < 4; ++cls)
            CHECK(std::abs(p[static_cast<std::size_t>(cls)] - cache.probs(r, cls)) < 1e-14);
    }
}

TEST_CASE("hidden-unit permutation leaves the output unchanged") {
    NeuralEqModel model(NeuralEqConfig{5, 2, 4, 4});
    model.init_params(55);
    const std::vector<double> window = {0.3, -0.6, 0.8, 0.2, -0.1};
    const std::vector<double> before = model.forward_infer(window);

    // permute the hidden layer of forward stage 2: rows of W1, v, c1; columns of W2
    const int n = 4;
    const std::vector<int> perm = {2, 0, 3, 1};
    auto& store = model.store();
    const auto w1 = neq::test::find_tensor(model, "f2.W1");
    const auto v = neq::test::find_tensor(model, "f2.v");
    const auto c1 = neq::test::find_tensor(model, "f2.c1");
    const auto w2 = neq::test::find_tensor(model, "f2.W2");
    const std::vector<double> w1_old(store.values.begin() + static_cast<std::ptrdiff_t>(w1.offset),
                                     store.values.begin() + static_cast<std::ptrdiff_t>(w1.offset + w1.size()));
    const std::vector<double> v_old(store.values.begin() + static_cast<std::ptrdiff_t>(v.offset),
                                    store.values.begin() + static_cast<std::ptrdiff_t>(v.offset + v.size()));
    const std::vector<double> c1_old(store.values.begin() + static_cast<std::ptrdiff_t>(c1.offset),
                                     store.values.begin() + static_cast<std::ptrdiff_t>(c1.offset + c1.size()));
    const std::vector<double> w2_old(store.values.begin() + static_cast<std::ptrdiff_t>(w2.offset),
                                     store.values.begin() + static_cast<std::ptrdiff_t>(w2.offset + w2.size()));
    for (int i = 0; i < n; ++i) {
        const int pi = perm[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            store.values[w1.offset + static_cast<std::size_t>(i * n + j)] =
                w1_old[static_cast<std::size_t>(pi * n + j)];
            store.values[w2.offset + static_cast<std::size_t>(j * n + i)] =
                w2_old[static_cast<std::size_t>(j * n + pi)];
        }
        store.values[v.offset + static_cast<std::size_t>(i)] = v_old[static_cast<std::size_t>(pi)];
        store.values[c1.offset + static_cast<std::size_t>(i)] = c1_old[static_cast<std::size_t>(pi)];
    }

    const std::vector<double> after = model.forward_infer(window);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) < 1e-12);
}

TEST_CASE("masked weights stay zero through inference") {
    NeuralEqModel model(NeuralEqConfig{6, 2, 5, 4});
    model.init_params(91);
    auto& store = model.store();
    for (std::size_t i = 0; i < store.mask.size(); i += 7) store.mask[i] = 0;
    store.apply_mask();
    const std::vector<double> snapshot = store.values;
    CounterRng rng(92);
    for (int call = 0; call < 10; ++call) {
        std::vector<double> window(6);
        for (double& v : window) v = 2.0 * rng.uniform01() - 1.0;
        (void)model.forward_infer(window);
    }
    CHECK(store.values == snapshot);
    for (std::size_t i = 0; i < store.mask.size(); i += 7) CHECK(store.values[i] == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
    NeuralEqModel model(NeuralEqConfig{4, 2, 3, 4});
    for (std::uint64_t draw = 0; draw < 4; ++draw) {
        model.init_params(100 + draw);
        CHECK(neq::test::max_grad_rel_error(model, 8, 200 + draw) <= 1e-4);
    }
    MlpModel mlp(MlpBaselineConfig{5, 4, 6, 4}, 2);
    mlp.init_params(300);
    CHECK(neq::test::max_grad_rel_error(mlp, 8, 301) <= 1e-4);
}

TEST_CASE("predict_stream slides windows with the documented alignment") {
    const NeuralEqConfig cfg{4, 2, 3, 2};
    NeuralEqModel model(cfg);
    model.init_params(41);
    const int pre = 1;

    ObservedStream x;
    CounterRng rng(42);
    x.samples.resize(32);
    for (double& v : x.samples) v = 2.0 * rng.uniform01() - 1.0;

    const SymbolStream d = predict_stream(model, x, pre);
    REQUIRE(d.size() == x.size());
    const auto [begin, end] = predict_valid_range(model, pre, x.size());
    CHECK(begin == 0);  // D - 1 - pre = 0
    CHECK(end == x.size() - 4 + 1);

    for (std::size_t k = 0; k + 4 <= x.size(); ++k) {
        const std::vector<double> window(x.samples.begin() + static_cast<std::ptrdiff_t>(k),
                                         x.samples.begin() + static_cast<std::ptrdiff_t>(k) + 4);
        const std::vector<double> p = model.forward_infer(window);
        const std::size_t j = k;  // k + D - 1 - pre
        const int expect = p[0] >= p[1] ? 0 : 1;
        CHECK(d.indices[j] == expect);
    }
    CHECK_THROWS_AS(predict_stream(model, ObservedStream{{0.0, 0.0}, 0.0}, 0),
                    std::invalid_argument);
}

TEST_CASE("argmax ties resolve to the lower class") {
    NeuralEqModel model(NeuralEqConfig{4, 2, 3, 4});
    model.store().allocate();  // zero weights -> uniform posterior everywhere
    ObservedStream x;
    x.samples.assign(16, 0.25);
    const SymbolStream d = predict_stream(model, x, 0);
    const auto [begin, end] = predict_valid_range(model, 0, x.size());
    for (std::size_t t = begin; t < end; ++t) CHECK(d.indices[t] == 0);
}
