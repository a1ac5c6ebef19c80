#pragma once

#include <string>

#include "waffle/attack/run.hpp"

namespace waffle {

enum class TransferKind { CrossSeed, CrossArchitecture, CrossMechanism };

inline const char* transfer_kind_name(TransferKind k) {
    switch (k) {
        case TransferKind::CrossSeed: return "cross_seed";
        case TransferKind::CrossArchitecture: return "cross_architecture";
        case TransferKind::CrossMechanism: return "cross_mechanism";
    }
    return "?";
}

inline bool parse_transfer_kind(const std::string& name, TransferKind& out) {
    if (name == "cross_seed") out = TransferKind::CrossSeed;
    else if (name == "cross_architecture" || name == "cross_arch") out = TransferKind::CrossArchitecture;
    else if (name == "cross_mechanism" || name == "cross_mech") out = TransferKind::CrossMechanism;
    else return false;
    return true;
}

struct TransferScenario {
    TransferKind kind = TransferKind::CrossSeed;
    const MultiExitClassifier* surrogate = nullptr;
    PolicyConfig surrogate_policy;
    const MultiExitClassifier* victim = nullptr;
    PolicyConfig victim_policy;
};

struct TransferOutput {
    DatasetAttackOutput s_to_s;  // attack run on the surrogate
    AuditReport s_to_v;          // same perturbed texts, scored on the victim
};

// Crafts adversarial texts on the surrogate with the TF-based slowdown
// attack and replays them on the victim. Both models must share the
// tokenizer/vocabulary; a mismatch aborts before any crafting.
inline TransferOutput transfer_run(const TransferScenario& scenario, const Dataset& dataset,
                                   const TextPipeline& pipeline, const AttackConfig& cfg,
                                   unsigned workers = 1) {
    if (!scenario.surrogate || !scenario.victim) throw DataError("transfer_run: missing models");
    if (scenario.surrogate->vocab_hash != scenario.victim->vocab_hash)
        throw DataError("transfer_run: surrogate and victim vocabularies differ");

    TransferOutput out;
    out.s_to_s = attack_dataset(dataset, *scenario.surrogate, scenario.surrogate_policy, pipeline, cfg,
                                AttackVariant::WaffleTF, workers);
    out.s_to_s.report.attack_desc = std::string("waffle-tf[s->s,") + transfer_kind_name(scenario.kind) + "]";
    out.s_to_s.report.recompute_aggregates();

    Dataset perturbed = perturbed_dataset(out.s_to_s.results);
    out.s_to_v = evaluate_pair(dataset, perturbed, *scenario.victim, scenario.victim_policy, pipeline,
                               std::string("waffle-tf[s->v,") + transfer_kind_name(scenario.kind) + "]",
                               workers);
    return out;
}

}  // namespace waffle
