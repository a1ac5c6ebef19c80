#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "waffle/attack/attacks.hpp"

namespace waffle {

// Independently re-walks an attack's search and checks the recorded
// substitution log against the documented selection rules:
//   - every logged substitution is the argmax of its gated candidate set
//     under the rule for its branch (winner-by-similarity or best-score
//     with strict improvement),
//   - ranked words without a log entry genuinely had no admissible move,
//   - the final text and final goal score reproduce bit-exactly.
// Returns human-readable violations; empty means the result verifies.
inline std::vector<std::string> verify_result(const AdversarialResult& result, AttackVariant variant,
                                              const MultiExitClassifier& model, const PolicyConfig& policy,
                                              const TextPipeline& pipeline, const AttackConfig& cfg) {
    std::vector<std::string> violations;
    auto fail = [&](const std::string& msg) { violations.push_back(msg); };

    if (result.failed) {
        fail("result is marked failed: " + result.error);
        return violations;
    }

    GoalFunction goal = cfg.goal;
    goal.original_label = result.original.label;
    const int ncls = model.hyper.n_classes;

    QueryCounter queries;
    queries.budget = cfg.query_budget;

    const bool tf_skeleton =
        variant == AttackVariant::WaffleTF || variant == AttackVariant::BaselineTF;

    TokenizedInput original = pipeline.tokenize(result.original);
    ExitTrace base;
    WordImportance importance;
    bool stopped_at_start = false;
    if (tf_skeleton) {
        base = score_input(model, policy, original, queries);
        stopped_at_start = detail::goal_met_at_start(goal, base, ncls);
        if (!stopped_at_start) {
            importance =
                word_importance_removal(model, policy, original, goal, pipeline, cfg, queries, nullptr, &base);
            if (queries.exhausted) stopped_at_start = true;
        }
    } else {
        importance = word_importance_gradient(model, policy, original, goal, pipeline, cfg, queries, &base);
        stopped_at_start = detail::goal_met_at_start(goal, base, ncls);
    }

    if (base.exit_layer != result.exit_before) fail("exit_before mismatch");
    if (base.prediction != result.pred_before) fail("pred_before mismatch");

    TokenizedInput current = original;
    ExitTrace current_trace = base;
    double current_score = goal_score(goal, base, ncls).score;
    std::size_t log_index = 0;
    bool returned_early = false;

    if (!stopped_at_start) {
        for (std::size_t pos : importance.ranking) {
            if (returned_early) break;
            const int pool = tf_skeleton ? cfg.n_synonyms : kA2TSynonymCount;
            auto candidates = candidate_set(pos, current, pipeline, pool, cfg.max_candidates_per_word);

            std::optional<detail::ScoredCandidate> winner;
            std::optional<detail::ScoredCandidate> best;
            bool out_of_budget = false;
            for (const auto& cand : candidates) {
                TokenizedInput temp = current;
                temp.replace_word(pos, cand, pipeline.vocab);
                if (tf_skeleton && !similarity_gate(temp, current, cfg.epsilon, pipeline)) continue;
                if (!queries.can_forward()) {
                    out_of_budget = true;
                    break;
                }
                detail::ScoredCandidate sc;
                sc.word = cand;
                sc.trace = score_input(model, policy, temp, queries);
                sc.goal = goal_score(goal, sc.trace, ncls);
                if (tf_skeleton && sc.goal.success) {
                    sc.sim_to_original = pipeline.similarity(original, temp);
                    if (!winner || sc.sim_to_original > winner->sim_to_original) winner = sc;
                }
                if (!best || sc.goal.score > best->goal.score) best = sc;
            }

            std::optional<detail::ScoredCandidate> chosen;
            bool stop_after = false;
            if (tf_skeleton) {
                if (winner) {
                    chosen = winner;
                    stop_after = true;
                } else if (best && best->goal.score > current_score) {
                    chosen = best;
                }
            } else {
                if (best) {
                    chosen = best;
                    stop_after = best->goal.success;
                }
            }

            if (chosen) {
                if (log_index >= result.substitutions.size()) {
                    std::ostringstream os;
                    os << "missing log entry: expected substitution at position " << pos << " -> '"
                       << chosen->word << "'";
                    fail(os.str());
                    return violations;
                }
                const auto& logged = result.substitutions[log_index];
                if (logged.position != pos || logged.new_word != chosen->word ||
                    logged.old_word != current.word_at(pos)) {
                    std::ostringstream os;
                    os << "log entry " << log_index << " disagrees with replay: logged (" << logged.position
                       << ", '" << logged.old_word << "' -> '" << logged.new_word << "'), replay derived ("
                       << pos << ", '" << current.word_at(pos) << "' -> '" << chosen->word << "')";
                    fail(os.str());
                    return violations;
                }
                if (logged.score_after != chosen->goal.score) {
                    std::ostringstream os;
                    os << "log entry " << log_index << " score_after not bit-exact: logged "
                       << logged.score_after << ", replay " << chosen->goal.score;
                    fail(os.str());
                }
                current.replace_word(pos, chosen->word, pipeline.vocab);
                current_trace = chosen->trace;
                current_score = chosen->goal.score;
                ++log_index;
                if (stop_after) returned_early = true;
            } else if (log_index < result.substitutions.size() &&
                       result.substitutions[log_index].position == pos) {
                std::ostringstream os;
                os << "log entry " << log_index << " at position " << pos
                   << " has no admissible move in replay";
                fail(os.str());
                return violations;
            }
            if (out_of_budget) break;
        }
    }

    if (log_index != result.substitutions.size()) {
        std::ostringstream os;
        os << "replay produced " << log_index << " substitutions, log has " << result.substitutions.size();
        fail(os.str());
    }
    if (!current.same_words(result.perturbed)) fail("perturbed text does not reproduce");
    double final_score = goal_score(goal, current_trace, ncls).score;
    if (final_score != result.final_score) {
        std::ostringstream os;
        os << "final score not bit-exact: recorded " << result.final_score << ", replay " << final_score;
        fail(os.str());
    }
    bool final_success = goal_score(goal, current_trace, ncls).success;
    if (final_success != result.success) fail("success flag does not reproduce");
    if (queries.forwards != result.queries) {
        std::ostringstream os;
        os << "query count mismatch: recorded " << result.queries << ", replay " << queries.forwards;
        fail(os.str());
    }
    return violations;
}

}  // namespace waffle
