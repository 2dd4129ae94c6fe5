#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neq/pruning.hpp"
#include "test_util.hpp"

using namespace neq;

namespace {

std::vector<std::size_t> prunable_indices(const Model& model) {
    std::vector<std::size_t> out;
    for (const TensorInfo& t : model.store().tensors())
        if (t.prunable)
            for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) out.push_back(i);
    return out;
}

}  // namespace

TEST_CASE("prune_step removes the globally smallest weights") {
    NeuralEqModel model(NeuralEqConfig{1, 1, 2, 2});
    model.store().allocate();
    const std::vector<std::size_t> idx = prunable_indices(model);
    REQUIRE(idx.size() == 22);
    // distinct magnitudes: 1, 2, ..., 22 with alternating signs
    for (std::size_t i = 0; i < idx.size(); ++i)
        model.store().values[idx[i]] = (i % 2 ? -1.0 : 1.0) * static_cast<double>(i + 1);

    const std::size_t masked = prune_step(model, 0.10);
    CHECK(masked == 2);  // floor(0.1 * 22)
    CHECK(model.store().values[idx[0]] == 0.0);
    CHECK(model.store().values[idx[1]] == 0.0);
    CHECK(model.store().mask[idx[0]] == 0);
    CHECK(model.store().mask[idx[1]] == 0);
    for (std::size_t i = 2; i < idx.size(); ++i) CHECK(model.store().mask[idx[i]] == 1);
    CHECK(model.store().global_sparsity() == doctest::Approx(2.0 / 22.0));
}

TEST_CASE("magnitude ties resolve to the lower flat index") {
    NeuralEqModel model(NeuralEqConfig{1, 1, 2, 2});
    model.store().allocate();
    const std::vector<std::size_t> idx = prunable_indices(model);
    for (std::size_t i = 0; i < idx.size(); ++i) model.store().values[idx[i]] = 5.0;
    model.store().values[idx[3]] = 0.5;
    model.store().values[idx[7]] = -0.5;  // same magnitude as idx[3]
    const std::size_t masked = prune_step(model, 0.10);
    CHECK(masked == 2);
    CHECK(model.store().mask[idx[3]] == 0);
    CHECK(model.store().mask[idx[7]] == 0);

    // a second tie between equal magnitudes picks the earlier index
    NeuralEqModel m2(NeuralEqConfig{1, 1, 2, 2});
    m2.store().allocate();
    const std::vector<std::size_t> idx2 = prunable_indices(m2);
    for (std::size_t i = 0; i < idx2.size(); ++i) m2.store().values[idx2[i]] = 1.0;
    prune_step(m2, 0.10);
    CHECK(m2.store().mask[idx2[0]] == 0);
    CHECK(m2.store().mask[idx2[1]] == 0);
    for (std::size_t i = 2; i < idx2.size(); ++i) CHECK(m2.store().mask[idx2[i]] == 1);
}

TEST_CASE("geometric schedule compounds exactly") {
    NeuralEqModel model(NeuralEqConfig{12, 4, 8, 4});
    model.init_params(3);
    const std::size_t total = model.store().prunable_count();
    std::size_t remaining = total;
    for (int k = 1; k <= 8; ++k) {
        prune_step(model, 0.10);
        const std::size_t step = static_cast<std::size_t>(
            std::floor(0.10 * static_cast<double>(remaining)));
        remaining -= step;
        CHECK(model.store().masked_count() == total - remaining);
        const double expect = static_cast<double>(total - remaining) / static_cast<double>(total);
        CHECK(model.store().global_sparsity() == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(model.store().global_sparsity() - (1.0 - std::pow(0.9, k))) < 0.01);
    }
}

TEST_CASE("linear schedule removes a fixed count per step") {
    NeuralEqModel model(NeuralEqConfig{12, 4, 8, 4});
    model.init_params(4);
    const std::size_t total = model.store().prunable_count();
    const std::size_t per_step = static_cast<std::size_t>(std::floor(0.10 * static_cast<double>(total)));
    for (int k = 1; k <= 5; ++k) {
        prune_step(model, 0.10, PruneSchedule::Linear);
        CHECK(model.store().masked_count() == per_step * static_cast<std::size_t>(k));
    }
}

TEST_CASE("prune_step rejects bad fractions and empty pools") {
    NeuralEqModel model(NeuralEqConfig{1, 1, 2, 2});
    model.init_params(9);
    CHECK_THROWS_AS(prune_step(model, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(prune_step(model, 1.0), std::invalid_argument);
    for (std::size_t i : prunable_indices(model)) model.store().mask[i] = 0;
    model.store().apply_mask();
    CHECK(prune_step(model, 0.5) == 0);  // nothing left: no-op with a warning
}

TEST_CASE("layer sparsity bookkeeping") {
    NeuralEqModel model(NeuralEqConfig{6, 2, 4, 4});
    model.init_params(5);
    const std::vector<double> fresh = layer_sparsity(model);
    REQUIRE(fresh.size() == 7);  // 6 stages plus the head
    for (double s : fresh) CHECK(s == 0.0);

    // mask all of forward stage 1
    for (const char* name : {"f1.W1", "f1.v", "f1.W2"}) {
        const TensorInfo& t = neq::test::find_tensor(model, name);
        for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) model.store().mask[i] = 0;
    }
    model.store().apply_mask();
    const std::vector<double> after = layer_sparsity(model);
    CHECK(after[0] == 1.0);
    for (std::size_t g = 1; g < after.size(); ++g) CHECK(after[g] == 0.0);

    // size-weighted mean of the layers equals the global sparsity
    prune_step(model, 0.10);
    const std::vector<double> sp = layer_sparsity(model);
    double weighted = 0.0, total = 0.0;
    std::vector<double> group_sizes(sp.size(), 0.0);
    for (const TensorInfo& t : model.store().tensors())
        if (t.prunable && t.group >= 0) group_sizes[static_cast<std::size_t>(t.group)] += static_cast<double>(t.size());
    for (std::size_t g = 0; g < sp.size(); ++g) {
        weighted += sp[g] * group_sizes[g];
        total += group_sizes[g];
    }
    CHECK(std::abs(weighted / total - model.store().global_sparsity()) < 1e-12);
}

TEST_CASE("iterative prune masks monotonically and keeps masked weights at zero") {
    const Channel ch{{1.0, 0.5}, 0};
    const Modulation mod = Modulation::pam2();
    NeuralEqModel model(NeuralEqConfig{4, 2, 4, 2});
    TrainConfig tc;
    tc.batch_size = 256;
    tc.train_symbols = 256 * 4;
    tc.valid_symbols = 1024;
    tc.test_symbols = 8192;
    tc.snr_db = 9.0;
    tc.seed = 21;
    train(model, tc, ch, mod);

    const PruneReport report = iterative_prune(model, tc, ch, mod, 0.3, 3);
    CHECK(report.baseline_ber >= 0.0);
    REQUIRE(!report.iterations.empty());
    double prev = 0.0;
    for (const PruneIteration& it : report.iterations) {
        CHECK(it.global_sparsity > prev);
        prev = it.global_sparsity;
        CHECK(std::isfinite(it.normalized_ber));
        REQUIRE(it.layer_sparsity.size() == 5);
    }
    CHECK(model.store().global_sparsity() >= 0.3);
    for (std::size_t i = 0; i < model.store().mask.size(); ++i)
        if (!model.store().mask[i]) CHECK(model.store().values[i] == 0.0);
}
