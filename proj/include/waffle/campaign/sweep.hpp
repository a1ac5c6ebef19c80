#pragma once

#include <vector>

#include "waffle/attack/run.hpp"

namespace waffle {

struct AlphaSweepEntry {
    double alpha = 0.0;
    AuditReport report;
    double mean_final_score = 0.0;
};

// Runs the TF-based slowdown attack per alpha with everything else held
// constant; alphas must be sorted ascending within (0, 1].
inline std::vector<AlphaSweepEntry> alpha_sweep(const MultiExitClassifier& model,
                                                const PolicyConfig& policy, const Dataset& dataset,
                                                const TextPipeline& pipeline, const AttackConfig& base_cfg,
                                                const std::vector<double>& alphas, unsigned workers = 1) {
    if (alphas.empty()) throw DataError("alpha_sweep: no alphas");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0 && alphas[i] <= 1.0)) throw DataError("alpha_sweep: alpha out of (0, 1]");
        if (i > 0 && alphas[i] < alphas[i - 1]) throw DataError("alpha_sweep: alphas must be sorted");
    }

    std::vector<AlphaSweepEntry> out;
    out.reserve(alphas.size());
    for (double alpha : alphas) {
        AttackConfig cfg = base_cfg;
        cfg.goal.kind = GoalKind::Slowdown;
        cfg.goal.alpha = alpha;
        AlphaSweepEntry entry;
        entry.alpha = alpha;
        auto run = attack_dataset(dataset, model, policy, pipeline, cfg, AttackVariant::WaffleTF, workers);
        double sum = 0.0;
        for (const auto& r : run.results) sum += r.final_score;
        entry.mean_final_score = run.results.empty() ? 0.0 : sum / static_cast<double>(run.results.size());
        entry.report = std::move(run.report);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace waffle
