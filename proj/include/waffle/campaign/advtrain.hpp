#pragma once

#include <cmath>
#include <vector>

#include "waffle/attack/attacks.hpp"
#include "waffle/model/train.hpp"
#include "waffle/util/parallel.hpp"
#include "waffle/util/rng.hpp"

namespace waffle {

// A2T-recipe adversarial training: each batch, a seeded choice of
// ceil(p * |batch|) rows is replaced by adversarial versions crafted
// against the current weights under the training-time policy, then the
// normal gradient step runs. With p = 0 the selection stream is never
// consumed and the run is bit-identical to plain train().
//
// Attack queries issued while training use throwaway counters and never
// reach audit reports.
inline TrainResult adversarial_train(MultiExitClassifier& model, const Dataset& dataset,
                                     const TextPipeline& pipeline, const TrainConfig& cfg,
                                     double attack_fraction, AttackVariant inner_variant,
                                     const AttackConfig& attack_cfg, const PolicyConfig& train_policy,
                                     unsigned workers = 1) {
    if (attack_fraction < 0.0 || attack_fraction > 1.0)
        throw DataError("adversarial_train: fraction must be in [0, 1]");

    auto inputs = tokenize_inputs(dataset, pipeline);
    auto labels = dataset_labels(dataset);

    Rng pick_rng(derive_seed(cfg.seed, 0x61647674ull));
    PreBatchHook hook = nullptr;
    if (attack_fraction > 0.0) {
        hook = [&](const std::vector<std::size_t>& dataset_indices,
                   std::vector<std::vector<int>>& batch_inputs, const std::vector<int>&) {
            std::size_t batch = batch_inputs.size();
            std::size_t k = static_cast<std::size_t>(
                std::ceil(attack_fraction * static_cast<double>(batch)));
            if (k > batch) k = batch;
            if (k == 0) return;
            auto chosen = pick_rng.sample_without_replacement(batch, k);
            parallel_for(chosen.size(), workers, [&](std::size_t c) {
                std::size_t row = chosen[c];
                const TextExample& ex = dataset[dataset_indices[row]];
                AdversarialResult adv =
                    run_attack(inner_variant, ex, model, train_policy, pipeline, attack_cfg);
                batch_inputs[row] = adv.perturbed.flat_ids();
            });
        };
    }
    return train(model, inputs, labels, cfg, hook);
}

}  // namespace waffle
