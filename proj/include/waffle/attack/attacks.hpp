#pragma once

#include <optional>
#include <string>
#include <vector>

#include "waffle/attack/engine.hpp"
#include "waffle/attack/result.hpp"

namespace waffle {

// Appendix-fixed candidate pool for the A2T-based search.
inline constexpr int kA2TSynonymCount = 20;

namespace detail {

struct ScoredCandidate {
    std::string word;
    ExitTrace trace;
    GoalScore goal;
    double sim_to_original = 0.0;  // filled for winners only
};

// Only the misclassification baselines skip inputs whose goal is already
// met: TextFooler attacks nothing that is already misclassified. The
// slowdown searches follow their published loops with no start check.
inline bool goal_met_at_start(const GoalFunction& goal, const ExitTrace& base, int n_classes) {
    return goal.kind == GoalKind::Misclassification && goal_score(goal, base, n_classes).success;
}

inline void finish_result(AdversarialResult& r, const TokenizedInput& current,
                          const ExitTrace& current_trace, const GoalFunction& goal, int n_classes,
                          const QueryCounter& queries) {
    r.perturbed = current;
    auto g = goal_score(goal, current_trace, n_classes);
    r.final_score = g.score;
    r.success = g.success;
    r.exit_after = current_trace.exit_layer;
    r.pred_after = current_trace.prediction;
    r.queries = queries.forwards;
    r.backwards = queries.backwards;
    r.budget_exhausted = queries.exhausted;
}

// Greedy TextFooler-style search shared by the slowdown attack and its
// misclassification baseline:
//   1. removal-based importance ranking, stop words filtered;
//   2. per ranked word, synonym candidates + POS filter + similarity gate
//      against the current text;
//   3. if any gated candidate meets the goal, substitute the winner most
//      similar to the original text and stop;
//   4. otherwise substitute the best-scoring candidate only when it strictly
//      improves the running score, and move on;
//   5. return the best text found whether or not the goal was met.
inline AdversarialResult tf_search(const TextExample& example, const MultiExitClassifier& model,
                                   const PolicyConfig& policy, const TextPipeline& pipeline,
                                   const AttackConfig& cfg) {
    AdversarialResult result;
    result.original = example;

    GoalFunction goal = cfg.goal;
    goal.original_label = example.label;

    QueryCounter queries;
    queries.budget = cfg.query_budget;

    TokenizedInput original = pipeline.tokenize(example);
    ExitTrace base = score_input(model, policy, original, queries);
    result.exit_before = base.exit_layer;
    result.pred_before = base.prediction;

    TokenizedInput current = original;
    ExitTrace current_trace = base;
    double current_score = goal_score(goal, base, model.hyper.n_classes).score;

    if (goal_met_at_start(goal, base, model.hyper.n_classes)) {
        finish_result(result, current, current_trace, goal, model.hyper.n_classes, queries);
        return result;
    }

    WordImportance importance =
        word_importance_removal(model, policy, original, goal, pipeline, cfg, queries, nullptr, &base);
    if (queries.exhausted) {
        finish_result(result, current, current_trace, goal, model.hyper.n_classes, queries);
        return result;
    }

    for (std::size_t pos : importance.ranking) {
        auto candidates = candidate_set(pos, current, pipeline, cfg.n_synonyms, cfg.max_candidates_per_word);
        std::optional<ScoredCandidate> winner;
        std::optional<ScoredCandidate> best;
        bool out_of_budget = false;

        for (const auto& cand : candidates) {
            TokenizedInput temp = current;
            temp.replace_word(pos, cand, pipeline.vocab);
            if (!similarity_gate(temp, current, cfg.epsilon, pipeline)) continue;
            if (!queries.can_forward()) {
                out_of_budget = true;
                break;
            }
            ScoredCandidate sc;
            sc.word = cand;
            sc.trace = score_input(model, policy, temp, queries);
            sc.goal = goal_score(goal, sc.trace, model.hyper.n_classes);
            if (sc.goal.success) {
                sc.sim_to_original = pipeline.similarity(original, temp);
                if (!winner || sc.sim_to_original > winner->sim_to_original) winner = sc;
            }
            if (!best || sc.goal.score > best->goal.score) best = sc;
        }

        if (winner) {
            result.substitutions.push_back({pos, current.word_at(pos), winner->word, winner->goal.score});
            current.replace_word(pos, winner->word, pipeline.vocab);
            current_trace = winner->trace;
            finish_result(result, current, current_trace, goal, model.hyper.n_classes, queries);
            return result;
        }
        if (best && best->goal.score > current_score) {
            result.substitutions.push_back({pos, current.word_at(pos), best->word, best->goal.score});
            current.replace_word(pos, best->word, pipeline.vocab);
            current_trace = best->trace;
            current_score = best->goal.score;
        }
        if (out_of_budget) break;
    }

    finish_result(result, current, current_trace, goal, model.hyper.n_classes, queries);
    return result;
}

// Greedy A2T-style search: gradient importance ranking, then per ranked
// word an unconditional substitution with the score-argmax of the top-20
// synonym candidates (no similarity gate), returning early once the goal
// is met.
inline AdversarialResult a2t_search(const TextExample& example, const MultiExitClassifier& model,
                                    const PolicyConfig& policy, const TextPipeline& pipeline,
                                    const AttackConfig& cfg) {
    AdversarialResult result;
    result.original = example;

    GoalFunction goal = cfg.goal;
    goal.original_label = example.label;

    QueryCounter queries;
    queries.budget = cfg.query_budget;

    TokenizedInput original = pipeline.tokenize(example);
    ExitTrace base;
    WordImportance importance =
        word_importance_gradient(model, policy, original, goal, pipeline, cfg, queries, &base);
    result.exit_before = base.exit_layer;
    result.pred_before = base.prediction;

    TokenizedInput current = original;
    ExitTrace current_trace = base;

    if (goal_met_at_start(goal, base, model.hyper.n_classes)) {
        finish_result(result, current, current_trace, goal, model.hyper.n_classes, queries);
        return result;
    }

    for (std::size_t pos : importance.ranking) {
        auto candidates = candidate_set(pos, current, pipeline, kA2TSynonymCount, cfg.max_candidates_per_word);
        if (candidates.empty()) continue;

        std::optional<ScoredCandidate> best;
        bool out_of_budget = false;
        for (const auto& cand : candidates) {
            if (!queries.can_forward()) {
                out_of_budget = true;
                break;
            }
            TokenizedInput temp = current;
            temp.replace_word(pos, cand, pipeline.vocab);
            ScoredCandidate sc;
            sc.word = cand;
            sc.trace = score_input(model, policy, temp, queries);
            sc.goal = goal_score(goal, sc.trace, model.hyper.n_classes);
            if (!best || sc.goal.score > best->goal.score) best = sc;
        }
        if (best) {
            result.substitutions.push_back({pos, current.word_at(pos), best->word, best->goal.score});
            current.replace_word(pos, best->word, pipeline.vocab);
            current_trace = best->trace;
            if (best->goal.success) break;
        }
        if (out_of_budget) break;
    }

    finish_result(result, current, current_trace, goal, model.hyper.n_classes, queries);
    return result;
}

}  // namespace detail

// Dispatch by variant; the goal kind must match the variant family.
inline AdversarialResult run_attack(AttackVariant variant, const TextExample& example,
                                    const MultiExitClassifier& model, const PolicyConfig& policy,
                                    const TextPipeline& pipeline, const AttackConfig& cfg) {
    const bool slowdown_variant =
        variant == AttackVariant::WaffleTF || variant == AttackVariant::WaffleA2T;
    if (slowdown_variant && cfg.goal.kind != GoalKind::Slowdown)
        throw DataError("run_attack: waffle variants require the slowdown goal");
    if (!slowdown_variant && cfg.goal.kind != GoalKind::Misclassification)
        throw DataError("run_attack: baseline variants require the misclassification goal");

    switch (variant) {
        case AttackVariant::WaffleTF:
        case AttackVariant::BaselineTF:
            return detail::tf_search(example, model, policy, pipeline, cfg);
        case AttackVariant::WaffleA2T:
        case AttackVariant::BaselineA2T:
            return detail::a2t_search(example, model, policy, pipeline, cfg);
    }
    throw DataError("run_attack: unknown variant");
}

inline AdversarialResult waffle_tf(const TextExample& example, const MultiExitClassifier& model,
                                   const PolicyConfig& policy, const TextPipeline& pipeline,
                                   const AttackConfig& cfg) {
    return run_attack(AttackVariant::WaffleTF, example, model, policy, pipeline, cfg);
}

inline AdversarialResult waffle_a2t(const TextExample& example, const MultiExitClassifier& model,
                                    const PolicyConfig& policy, const TextPipeline& pipeline,
                                    const AttackConfig& cfg) {
    return run_attack(AttackVariant::WaffleA2T, example, model, policy, pipeline, cfg);
}

inline AdversarialResult baseline_attack(AttackVariant skeleton, const TextExample& example,
                                         const MultiExitClassifier& model, const PolicyConfig& policy,
                                         const TextPipeline& pipeline, const AttackConfig& cfg) {
    if (skeleton != AttackVariant::BaselineTF && skeleton != AttackVariant::BaselineA2T)
        throw DataError("baseline_attack: skeleton must be tf or a2t");
    return run_attack(skeleton, example, model, policy, pipeline, cfg);
}

}  // namespace waffle
