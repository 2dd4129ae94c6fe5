#include "neq/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "neq/rng.hpp"

namespace neq {

namespace {

constexpr std::uint64_t kTagFinetune = 0x66746e;
constexpr std::uint64_t kTagPruneEval = 0x707276;

}  // namespace

std::size_t prune_step(Model& model, double fraction, PruneSchedule schedule) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("prune_step: fraction must be in (0, 1)");
    ParamStore& store = model.store();

    std::vector<std::size_t> candidates;
    for (const TensorInfo& info : store.tensors()) {
        if (!info.prunable) continue;
        for (std::size_t i = info.offset; i < info.offset + info.size(); ++i)
            if (store.mask[i]) candidates.push_back(i);
    }
    const std::size_t pool = schedule == PruneSchedule::Geometric
                                 ? candidates.size()
                                 : store.prunable_count();
    const std::size_t k = std::min(
        candidates.size(), static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool))));
    if (k == 0 || candidates.empty()) {
        std::cerr << "prune_step: nothing left to prune\n";
        return 0;
    }

    // Smallest |w| first; equal magnitudes resolve to the lower flat index,
    // which partial_sort preserves because the index is the tiebreaker.
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), [&](std::size_t a, std::size_t b) {
                          const double ma = std::abs(store.values[a]);
                          const double mb = std::abs(store.values[b]);
                          return ma != mb ? ma < mb : a < b;
                      });
    for (std::size_t i = 0; i < k; ++i) {
        store.mask[candidates[i]] = 0;
        store.values[candidates[i]] = 0.0;
    }
    return k;
}

std::vector<double> layer_sparsity(const Model& model) {
    const ParamStore& store = model.store();
    int max_group = -1;
    for (const TensorInfo& info : store.tensors()) max_group = std::max(max_group, info.group);
    std::vector<double> masked(static_cast<std::size_t>(max_group + 1), 0.0);
    std::vector<double> total(static_cast<std::size_t>(max_group + 1), 0.0);
    for (const TensorInfo& info : store.tensors()) {
        if (!info.prunable || info.group < 0) continue;
        const auto g = static_cast<std::size_t>(info.group);
        total[g] += static_cast<double>(info.size());
        for (std::size_t i = info.offset; i < info.offset + info.size(); ++i)
            if (!store.mask[i]) masked[g] += 1.0;
    }
    std::vector<double> out(masked.size(), 0.0);
    for (std::size_t g = 0; g < out.size(); ++g)
        if (total[g] > 0.0) out[g] = masked[g] / total[g];
    return out;
}

PruneReport iterative_prune(Model& model, const TrainConfig& train_cfg, const Channel& ch,
                            const Modulation& mod, double target_sparsity, int finetune_batches,
                            PruneSchedule schedule, double prune_fraction) {
    if (!(target_sparsity > 0.0 && target_sparsity < 1.0))
        throw std::invalid_argument("iterative_prune: target sparsity must be in (0, 1)");
    train_cfg.validate();
    const double sigma = sigma_for_snr(ch, mod, train_cfg.snr_db);

    // Fixed evaluation stream so every iteration's BER is a paired comparison.
    const std::uint64_t ekey = mix_key(train_cfg.seed, kTagPruneEval, 0);
    const SymbolStream ez = random_symbols(train_cfg.test_symbols, mod, mix_key(ekey, 0));
    const ObservedStream ex = add_awgn(apply_channel(ez, mod, ch), sigma, mix_key(ekey, 1));
    const auto warmup = static_cast<std::size_t>(ch.length());

    PruneReport report;
    report.baseline_ber = windowed_ber(model, ex, ez, ch.pre_cursors, warmup);

    BatchGenerator gen(ch, mod, sigma, model.window_len(), model.target_pos(), train_cfg.seed,
                       kTagFinetune);
    AdamState adam;
    adam.init(model.store().total());

    Cache cache;
    RMat x, dlogits;
    std::vector<std::uint8_t> labels;
    std::vector<double> grad;

    while (model.store().global_sparsity() < target_sparsity) {
        if (prune_step(model, prune_fraction, schedule) == 0) break;
        for (int b = 0; b < finetune_batches; ++b) {
            gen.next(static_cast<std::size_t>(train_cfg.batch_size), x, labels);
            model.forward_batch(x, cache);
            const double loss = batch_loss_and_dlogits(cache.probs, labels, dlogits);
            if (!std::isfinite(loss))
                throw std::runtime_error("iterative_prune: training loss diverged");
            model.backward_batch(x, cache, dlogits, grad);
            adam_step(model.store(), grad, adam, train_cfg.learning_rate, train_cfg.beta1,
                      train_cfg.beta2, train_cfg.epsilon);
        }
        PruneIteration it;
        it.global_sparsity = model.store().global_sparsity();
        it.layer_sparsity = layer_sparsity(model);
        const double ber = windowed_ber(model, ex, ez, ch.pre_cursors, warmup);
        it.normalized_ber = report.baseline_ber > 0.0 ? ber / report.baseline_ber
                                                      : (ber > 0.0 ? HUGE_VAL : 1.0);
        report.iterations.push_back(std::move(it));
    }
    return report;
}

}  // namespace neq
