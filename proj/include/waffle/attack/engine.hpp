#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "waffle/attack/goal.hpp"
#include "waffle/model/grad.hpp"
#include "waffle/model/multi_exit.hpp"
#include "waffle/policy/policy.hpp"
#include "waffle/text/pipeline.hpp"

namespace waffle {

// Which segments an attack may touch. Pair tasks perturb the second segment
// by default; single-segment tasks always use the whole input.
enum class PerturbScope { SecondSegment, AllSegments };

struct AttackConfig {
    double epsilon = 0.84;          // Sim threshold, strict >
    int n_synonyms = 50;            // top-N synonym pool (TF-style search)
    int max_candidates_per_word = 0;  // post-filter cap, 0 = unlimited
    std::uint64_t query_budget = 0; // model forwards, 0 = unlimited
    GoalFunction goal;
    PerturbScope scope = PerturbScope::SecondSegment;
    bool unk_masking_importance = false;  // alternative to deletion, off by default
};

// One forward + policy decision; the single place attacks query the model.
inline ExitTrace score_input(const MultiExitClassifier& model, const PolicyConfig& policy,
                             const TokenizedInput& x, QueryCounter& queries) {
    queries.count_forward();
    auto exits = model.forward_all_exits(x.flat_ids());
    return make_trace(policy, exits);
}

inline std::vector<std::size_t> attackable_positions(const TokenizedInput& x, PerturbScope scope) {
    std::vector<std::size_t> out;
    std::size_t flat = 0;
    for (std::size_t s = 0; s < x.segments.size(); ++s) {
        bool usable = scope == PerturbScope::AllSegments || x.segments.size() == 1 || s == 1;
        for (std::size_t i = 0; i < x.segments[s].size(); ++i, ++flat)
            if (usable) out.push_back(flat);
    }
    return out;
}

struct WordImportance {
    std::vector<double> scores;          // aligned with ranking
    std::vector<std::size_t> ranking;    // flat positions, descending score,
                                         // ties by ascending position; stop
                                         // words are never ranked
};

// TextFooler-style importance: the change in goal score when the word is
// removed. Issues exactly one forward per probed position plus one for the
// base input; callers that already scored the input pass its trace through
// base_trace_in, and the base forward is skipped. base_trace_out receives
// the unperturbed trace either way.
inline WordImportance word_importance_removal(const MultiExitClassifier& model,
                                              const PolicyConfig& policy, const TokenizedInput& x,
                                              const GoalFunction& goal, const TextPipeline& pipeline,
                                              const AttackConfig& cfg, QueryCounter& queries,
                                              ExitTrace* base_trace_out = nullptr,
                                              const ExitTrace* base_trace_in = nullptr) {
    ExitTrace base = base_trace_in ? *base_trace_in : score_input(model, policy, x, queries);
    double base_score = goal_score(goal, base, model.hyper.n_classes).score;
    if (base_trace_out) *base_trace_out = base;

    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t pos : attackable_positions(x, cfg.scope)) {
        if (pipeline.stopwords.contains(x.word_at(pos))) continue;
        if (!queries.can_forward()) break;
        TokenizedInput probe = x;
        if (cfg.unk_masking_importance)
            probe.replace_word(pos, kUnkToken, pipeline.vocab);
        else
            probe.delete_word(pos);
        ExitTrace t = score_input(model, policy, probe, queries);
        double s = goal_score(goal, t, model.hyper.n_classes).score;
        scored.emplace_back(s - base_score, pos);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    WordImportance imp;
    for (const auto& [s, pos] : scored) {
        imp.scores.push_back(s);
        imp.ranking.push_back(pos);
    }
    return imp;
}

// Builds the slowdown objective for gradient-based ranking: the score as a
// function of the K softmax outputs, with subgradient sign(0) := 0 at the
// l1 kinks.
inline ScalarObjective<float> slowdown_objective(int n_classes) {
    ScalarObjective<float> obj;
    obj.fn = [n_classes](const std::vector<std::vector<float>>& probs,
                         std::vector<std::vector<float>>& d_probs) -> float {
        const int K = static_cast<int>(probs.size());
        const float u = 1.0f / static_cast<float>(n_classes);
        const float coeff = 1.0f / (static_cast<float>(K) * static_cast<float>(n_classes - 1));
        d_probs.assign(probs.size(), std::vector<float>(probs[0].size(), 0.0f));
        float total = 0.0f;
        for (int l = 0; l < K; ++l) {
            float l1 = 0.0f;
            for (std::size_t j = 0; j < probs[static_cast<std::size_t>(l)].size(); ++j) {
                float diff = probs[static_cast<std::size_t>(l)][j] - u;
                l1 += std::abs(diff);
                float sign = diff > 0.0f ? 1.0f : (diff < 0.0f ? -1.0f : 0.0f);
                d_probs[static_cast<std::size_t>(l)][j] = -coeff * sign;
            }
            total += 1.0f - l1 / static_cast<float>(n_classes - 1);
        }
        return total / static_cast<float>(K);
    };
    return obj;
}

// Misclassification objective at a fixed exit layer (the policy's choice on
// the current input, held constant under differentiation).
inline ScalarObjective<float> misclassification_objective(int exit_layer, int label) {
    ScalarObjective<float> obj;
    obj.fn = [exit_layer, label](const std::vector<std::vector<float>>& probs,
                                 std::vector<std::vector<float>>& d_probs) -> float {
        d_probs.assign(probs.size(), std::vector<float>(probs[0].size(), 0.0f));
        const auto& p = probs.at(static_cast<std::size_t>(exit_layer - 1));
        d_probs[static_cast<std::size_t>(exit_layer - 1)][static_cast<std::size_t>(label)] = -1.0f;
        return 1.0f - p[static_cast<std::size_t>(label)];
    };
    return obj;
}

// A2T-style importance: l2 norm of the goal-score gradient with respect to
// each word's embedding. Exactly one forward and one backward pass in
// total. Stop-word filtering and tie-breaking match the removal ranking.
inline WordImportance word_importance_gradient(const MultiExitClassifier& model,
                                               const PolicyConfig& policy, const TokenizedInput& x,
                                               const GoalFunction& goal, const TextPipeline& pipeline,
                                               const AttackConfig& cfg, QueryCounter& queries,
                                               ExitTrace* base_trace_out = nullptr) {
    queries.count_forward();
    queries.count_backward();

    // the single forward both feeds the backward pass and yields the trace
    MultiExitClassifier::Cache cache;
    model.forward(x.flat_ids(), cache);
    ExitTrace base = make_trace(policy, cache.probs);
    if (base_trace_out) *base_trace_out = base;

    ScalarObjective<float> obj = goal.kind == GoalKind::Slowdown
                                     ? slowdown_objective(model.hyper.n_classes)
                                     : misclassification_objective(base.exit_layer, goal.original_label);
    std::vector<std::vector<float>> d_probs;
    obj.fn(cache.probs, d_probs);
    const int ncls = model.hyper.n_classes;
    std::vector<std::vector<float>> d_logits(cache.probs.size(),
                                             std::vector<float>(static_cast<std::size_t>(ncls), 0.0f));
    for (std::size_t l = 0; l < cache.probs.size(); ++l)
        nn::softmax_row_backward(cache.probs[l].data(), d_probs[l].data(), d_logits[l].data(), ncls);
    std::vector<float> flat;
    model.backward(cache, d_logits, nullptr, &flat);

    const int de = model.hyper.d_embed;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t pos : attackable_positions(x, cfg.scope)) {
        if (pipeline.stopwords.contains(x.word_at(pos))) continue;
        double norm2 = 0.0;
        for (int j = 0; j < de; ++j) {
            double g = flat[pos * static_cast<std::size_t>(de) + static_cast<std::size_t>(j)];
            norm2 += g * g;
        }
        scored.emplace_back(std::sqrt(norm2), pos);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    WordImportance imp;
    for (const auto& [s, pos] : scored) {
        imp.scores.push_back(s);
        imp.ranking.push_back(pos);
    }
    return imp;
}

// Substitution candidates for the word at `pos`: top n synonyms by cosine,
// kept only when they share a POS tag with the original (empty tag sets
// always pass), original word excluded, capped at max_candidates_per_word.
inline std::vector<std::string> candidate_set(std::size_t pos, const TokenizedInput& x,
                                              const TextPipeline& pipeline, int n_synonyms,
                                              int max_candidates) {
    const std::string& word = x.word_at(pos);
    auto syn = nearest_synonyms(word, n_synonyms, pipeline.vocab, pipeline.embeddings);
    std::vector<std::string> out;
    if (syn.warned) return out;
    PosSet orig_tags = pipeline.pos.tags_of(word);
    for (const auto& hit : syn.hits) {
        const std::string& cand = pipeline.vocab.token_of(hit.token_id);
        PosSet cand_tags = pipeline.pos.tags_of(cand);
        bool pass = orig_tags == 0 || cand_tags == 0 || (orig_tags & cand_tags) != 0;
        if (!pass) continue;
        out.push_back(cand);
        if (max_candidates > 0 && static_cast<int>(out.size()) >= max_candidates) break;
    }
    return out;
}

// Alg. 1's similarity constraint: the perturbed text must stay strictly
// more similar than epsilon to the text it perturbs.
inline bool similarity_gate(const TokenizedInput& x_temp, const TokenizedInput& x_current,
                            double epsilon, const TextPipeline& pipeline) {
    return pipeline.similarity(x_temp, x_current) > epsilon;
}

}  // namespace waffle
