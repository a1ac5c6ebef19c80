#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "waffle/attack/engine.hpp"
#include "waffle/model/train.hpp"

using namespace waffle;
using testutil::make_model;
using testutil::make_pipeline;
using testutil::make_two_class_pipeline;
using testutil::VocabEntry;

namespace {

std::vector<std::vector<float>> uniform_exits(int k, int n) {
    return std::vector<std::vector<float>>(static_cast<std::size_t>(k),
                                           std::vector<float>(static_cast<std::size_t>(n), 1.0f / n));
}

TEST(SlowdownScore, UniformExitsGiveExactlyOne) {
    for (int k = 1; k <= 8; ++k)
        for (int n = 2; n <= 4; ++n) EXPECT_DOUBLE_EQ(slowdown_score(uniform_exits(k, n), n), 1.0);
}

TEST(SlowdownScore, OneHotBinaryGivesExactlyZero) {
    for (int k = 1; k <= 6; ++k) {
        std::vector<std::vector<float>> exits(static_cast<std::size_t>(k), {1.0f, 0.0f});
        EXPECT_DOUBLE_EQ(slowdown_score(exits, 2), 0.0);
    }
}

TEST(SlowdownScore, HandComputedBinaryValue) {
    // K=2, N=2, both exits (0.75, 0.25): ||p-u||_1 = 0.5 per exit -> 0.5
    std::vector<std::vector<float>> exits = {{0.75f, 0.25f}, {0.75f, 0.25f}};
    EXPECT_NEAR(slowdown_score(exits, 2), 0.5, 1e-7);
}

TEST(SlowdownScore, InvariantUnderExitPermutation) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        int k = 1 + static_cast<int>(rng.next_below(6));
        int n = 2 + static_cast<int>(rng.next_below(3));
        std::vector<std::vector<float>> exits;
        for (int i = 0; i < k; ++i) {
            std::vector<float> p(static_cast<std::size_t>(n));
            float sum = 0.0f;
            for (auto& v : p) {
                v = static_cast<float>(rng.next_double()) + 0.01f;
                sum += v;
            }
            for (auto& v : p) v /= sum;
            exits.push_back(p);
        }
        double before = slowdown_score(exits, n);
        EXPECT_GE(before, 1.0 - 2.0 / n - 1e-9);
        EXPECT_LE(before, 1.0 + 1e-9);
        auto shuffled = exits;
        rng.shuffle(shuffled);
        EXPECT_NEAR(slowdown_score(shuffled, n), before, 1e-12);
    }
}

TEST(SlowdownScore, BinaryRangeFloor) {
    // for N=2 the documented range is [0, 1] exactly
    std::vector<std::vector<float>> exits = {{0.0f, 1.0f}, {1.0f, 0.0f}, {0.5f, 0.5f}};
    double s = slowdown_score(exits, 2);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
}

ExitTrace trace_of(const std::vector<std::vector<float>>& exits, const PolicyConfig& policy) {
    return make_trace(policy, exits);
}

TEST(GoalScore, SlowdownSuccessAtThreshold) {
    GoalFunction goal;
    goal.kind = GoalKind::Slowdown;
    goal.alpha = 0.6;
    PolicyConfig policy;
    auto t = trace_of(uniform_exits(4, 2), policy);
    auto g = goal_score(goal, t, 2);
    EXPECT_DOUBLE_EQ(g.score, 1.0);
    EXPECT_TRUE(g.success);
}

TEST(GoalScore, BoundaryAlphaIsInclusive) {
    GoalFunction goal;
    goal.kind = GoalKind::Slowdown;
    goal.alpha = 0.5;
    PolicyConfig policy;
    std::vector<std::vector<float>> exits = {{0.75f, 0.25f}};  // score exactly 0.5
    auto g = goal_score(goal, trace_of(exits, policy), 2);
    EXPECT_DOUBLE_EQ(g.score, 0.5);
    EXPECT_TRUE(g.success);  // >= is inclusive
}

TEST(GoalScore, MisclassificationUsesPolicyChosenExit) {
    GoalFunction goal;
    goal.kind = GoalKind::Misclassification;
    goal.original_label = 0;
    PolicyConfig policy;
    policy.variant = PolicyVariant::Entropy;
    policy.entropy_threshold = 0.0;  // always final exit
    std::vector<std::vector<float>> exits = {{0.5f, 0.5f}, {0.9f, 0.1f}};
    auto g = goal_score(goal, trace_of(exits, policy), 2);
    EXPECT_NEAR(g.score, 0.1, 1e-7);
    EXPECT_FALSE(g.success);  // still predicts label 0
}

// fixture for importance and candidate tests
class EngineFixture : public ::testing::Test {
protected:
    void SetUp() override {
        pipeline = make_two_class_pipeline();
        model = make_model(pipeline, 4, 12, 2, 17, /*randomize_heads=*/true);
        policy.variant = PolicyVariant::Entropy;
        policy.entropy_threshold = 0.5;
        cfg.goal.kind = GoalKind::Slowdown;
        cfg.goal.alpha = 0.9;
        cfg.scope = PerturbScope::AllSegments;
    }

    TextPipeline pipeline;
    MultiExitClassifier model = MultiExitClassifier{};
    PolicyConfig policy;
    AttackConfig cfg;
};

TEST_F(EngineFixture, RemovalImportanceMatchesExhaustiveDeletionOracle) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        // random short input of non-stop words
        int n = 1 + static_cast<int>(rng.next_below(6));
        std::string text;
        for (int i = 0; i < n; ++i) {
            if (i) text += " ";
            text += (rng.next_below(2) ? "pos" : "neg") + std::to_string(rng.next_below(6));
        }
        TextExample ex;
        ex.segments = {text};
        auto tok = pipeline.tokenize(ex);

        QueryCounter q;
        auto imp = word_importance_removal(model, policy, tok, cfg.goal, pipeline, cfg, q);

        // oracle: brute-force deletions, independent ordering
        ExitTrace base = make_trace(policy, model.forward_all_exits(tok.flat_ids()));
        double base_score = goal_score(cfg.goal, base, 2).score;
        std::vector<std::pair<double, std::size_t>> oracle;
        for (std::size_t pos = 0; pos < tok.total_words(); ++pos) {
            TokenizedInput del = tok;
            del.delete_word(pos);
            auto t = make_trace(policy, model.forward_all_exits(del.flat_ids()));
            oracle.push_back({goal_score(cfg.goal, t, 2).score - base_score, pos});
        }
        std::stable_sort(oracle.begin(), oracle.end(), [](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });

        ASSERT_EQ(imp.ranking.size(), oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) {
            EXPECT_EQ(imp.ranking[i], oracle[i].second);
            EXPECT_DOUBLE_EQ(imp.scores[i], oracle[i].first);
        }
        // query accounting: m + 1 forwards for m probed words
        EXPECT_EQ(q.forwards, tok.total_words() + 1);
    }
}

TEST_F(EngineFixture, AllStopWordsGiveEmptyRanking) {
    TextExample ex;
    ex.segments = {"the a of the"};
    auto tok = pipeline.tokenize(ex);
    QueryCounter q;
    auto imp = word_importance_removal(model, policy, tok, cfg.goal, pipeline, cfg, q);
    EXPECT_TRUE(imp.ranking.empty());
    EXPECT_EQ(q.forwards, 1u);  // base scoring only
}

TEST_F(EngineFixture, DuplicatedWordScoredPerPosition) {
    TextExample ex;
    ex.segments = {"pos0 neg1 pos0"};
    auto tok = pipeline.tokenize(ex);
    QueryCounter q;
    auto imp = word_importance_removal(model, policy, tok, cfg.goal, pipeline, cfg, q);
    EXPECT_EQ(imp.ranking.size(), 3u);
    // both positions of pos0 are present
    EXPECT_TRUE(std::count(imp.ranking.begin(), imp.ranking.end(), 0u) == 1);
    EXPECT_TRUE(std::count(imp.ranking.begin(), imp.ranking.end(), 2u) == 1);
}

TEST_F(EngineFixture, GradientImportanceCountsOneForwardOneBackward) {
    TextExample ex;
    ex.segments = {"pos0 neg1 pos2 neg3"};
    auto tok = pipeline.tokenize(ex);
    QueryCounter q;
    auto imp = word_importance_gradient(model, policy, tok, cfg.goal, pipeline, cfg, q);
    EXPECT_EQ(q.forwards, 1u);
    EXPECT_EQ(q.backwards, 1u);
    EXPECT_EQ(imp.ranking.size(), 4u);
    for (double s : imp.scores) EXPECT_GE(s, 0.0);
}

TEST_F(EngineFixture, GradientImportanceZeroForConstantModel) {
    // all-zero model: probs are uniform regardless of input, gradient is 0
    auto zero_model = MultiExitClassifier::init(model.hyper, pipeline.embeddings, pipeline.vocab);
    TextExample ex;
    ex.segments = {"pos0 neg1 pos2"};
    auto tok = pipeline.tokenize(ex);
    QueryCounter q;
    auto imp = word_importance_gradient(zero_model, policy, tok, cfg.goal, pipeline, cfg, q);
    ASSERT_EQ(imp.ranking.size(), 3u);
    for (double s : imp.scores) EXPECT_EQ(s, 0.0);
    // ranking falls back to ascending position
    EXPECT_EQ(imp.ranking[0], 0u);
    EXPECT_EQ(imp.ranking[1], 1u);
    EXPECT_EQ(imp.ranking[2], 2u);
}

TEST_F(EngineFixture, GradientRankingStableUnderObjectiveScaling) {
    TextExample ex;
    ex.segments = {"pos0 neg1 pos2 neg3 pos4"};
    auto tok = pipeline.tokenize(ex);
    QueryCounter q1, q2;
    auto imp = word_importance_gradient(model, policy, tok, cfg.goal, pipeline, cfg, q1);

    // scaled objective: 3x the slowdown score; per-word norms scale by 3,
    // the argsort does not move
    ScalarObjective<float> scaled;
    auto inner = slowdown_objective(2);
    scaled.fn = [inner](const std::vector<std::vector<float>>& probs,
                        std::vector<std::vector<float>>& d_probs) -> float {
        float v = inner.fn(probs, d_probs);
        for (auto& row : d_probs)
            for (auto& g : row) g *= 3.0f;
        return 3.0f * v;
    };
    auto g = grad_wrt_word_embeddings(model, tok.flat_ids(), scaled);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t pos = 0; pos < g.per_word.size(); ++pos) {
        double n2 = 0.0;
        for (float v : g.per_word[pos]) n2 += static_cast<double>(v) * v;
        scored.push_back({std::sqrt(n2), pos});
    }
    std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    ASSERT_EQ(scored.size(), imp.ranking.size());
    for (std::size_t i = 0; i < scored.size(); ++i) EXPECT_EQ(scored[i].second, imp.ranking[i]);
}

TEST_F(EngineFixture, GradientNormsMatchFiniteDifferenceDirectionalEstimates) {
    TextExample ex;
    ex.segments = {"pos0 neg1 pos2 neg3"};
    auto tok = pipeline.tokenize(ex);
    QueryCounter q;
    auto imp = word_importance_gradient(model, policy, tok, cfg.goal, pipeline, cfg, q);

    // directional finite difference along the analytic gradient direction:
    // slope should equal the gradient norm
    auto g = grad_wrt_word_embeddings(model, tok.flat_ids(), slowdown_objective(2));
    auto dmodel = to_double(model);
    const double h = 1e-5;
    const int de = model.hyper.d_embed;
    auto ids = tok.flat_ids();
    for (std::size_t pos = 0; pos < g.per_word.size(); ++pos) {
        double norm = 0.0;
        for (float v : g.per_word[pos]) norm += static_cast<double>(v) * v;
        norm = std::sqrt(norm);
        if (norm < 1e-6) continue;
        // perturb only this position: route it through a scratch embedding
        // row so other positions with the same id stay fixed
        auto probe = dmodel;
        int scratch = probe.vocab_size - 1;  // pad row, unused by this input
        auto scratch_ids = ids;
        scratch_ids[pos] = scratch;
        double vals[2];
        int slot = 0;
        for (int sgn : {+1, -1}) {
            for (int j = 0; j < de; ++j)
                probe.embedding[static_cast<std::size_t>(scratch) * de + static_cast<std::size_t>(j)] =
                    static_cast<double>(
                        model.embedding[static_cast<std::size_t>(ids[pos]) * de + static_cast<std::size_t>(j)]) +
                    sgn * h * static_cast<double>(g.per_word[pos][static_cast<std::size_t>(j)]) / norm;
            vals[slot++] = slowdown_score(probe.forward_all_exits(scratch_ids), 2);
        }
        // slope along the unit gradient direction equals the gradient norm
        double fd_slope = (vals[0] - vals[1]) / (2 * h);
        double rel = std::abs(fd_slope - norm) / std::max({fd_slope, norm, 1e-8});
        EXPECT_LE(rel, 1e-3) << "position " << pos;
    }
}

// ---- candidate set ----

TextPipeline make_pos_pipeline() {
    std::vector<VocabEntry> entries = {
        {"cat", {1.0f, 0.0f}, pos_bit(PosTag::NOUN), false},
        {"feline", {0.99f, 0.01f}, pos_bit(PosTag::NOUN), false},
        {"meow", {0.97f, 0.05f}, pos_bit(PosTag::VERB), false},
        {"kitty", {0.95f, 0.1f}, static_cast<PosSet>(pos_bit(PosTag::NOUN) | pos_bit(PosTag::ADJ)), false},
        {"untagged", {0.93f, 0.1f}, 0, false},
        {"rock", {0.0f, 1.0f}, pos_bit(PosTag::NOUN), false},
        {"the", {0.01f, 0.01f}, pos_bit(PosTag::DET), true},
    };
    return make_pipeline(entries);
}

TEST(CandidateSet, OutOfVocabularyWordGivesEmptySet) {
    auto pipeline = make_pos_pipeline();
    auto tok = pipeline.tokenize(std::vector<std::string>{"zebra cat"});
    auto c = candidate_set(0, tok, pipeline, 10, 0);
    EXPECT_TRUE(c.empty());
}

TEST(CandidateSet, DisjointPosTagsFilteredOut) {
    auto pipeline = make_pos_pipeline();
    auto tok = pipeline.tokenize(std::vector<std::string>{"cat"});
    auto c = candidate_set(0, tok, pipeline, 10, 0);
    // meow is VERB-only: filtered; untagged passes; feline/kitty/rock share NOUN
    EXPECT_TRUE(std::find(c.begin(), c.end(), "meow") == c.end());
    EXPECT_TRUE(std::find(c.begin(), c.end(), "untagged") != c.end());
    EXPECT_TRUE(std::find(c.begin(), c.end(), "feline") != c.end());
    // original word is excluded
    EXPECT_TRUE(std::find(c.begin(), c.end(), "cat") == c.end());
}

TEST(CandidateSet, MatchesHandFilteredBruteForce) {
    auto pipeline = make_pos_pipeline();
    auto tok = pipeline.tokenize(std::vector<std::string>{"cat"});
    auto c = candidate_set(0, tok, pipeline, 3, 0);
    // top-3 synonyms by cosine: feline (.9999..), meow, kitty; POS filter
    // drops meow -> [feline, kitty]
    std::vector<std::string> expected = {"feline", "kitty"};
    EXPECT_EQ(c, expected);
}

TEST(CandidateSet, RespectsMaxCandidatesCap) {
    auto pipeline = make_pos_pipeline();
    auto tok = pipeline.tokenize(std::vector<std::string>{"cat"});
    auto c = candidate_set(0, tok, pipeline, 10, 1);
    EXPECT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0], "feline");
}

TEST(SimilarityGate, Bounds) {
    auto pipeline = make_pos_pipeline();
    auto a = pipeline.tokenize(std::vector<std::string>{"cat rock"});
    auto b = pipeline.tokenize(std::vector<std::string>{"feline rock"});
    EXPECT_TRUE(similarity_gate(a, b, -1.0, pipeline));   // epsilon -1: always true
    EXPECT_FALSE(similarity_gate(a, a, 1.0, pipeline));   // sim == 1.0 is not > 1.0
}

TEST(SimilarityGate, FixtureThreshold) {
    std::vector<VocabEntry> entries = {
        {"u", {1.0f, 0.0f}, 0, false},
        {"v", {0.6f, 0.8f}, 0, false},
    };
    auto pipeline = make_pipeline(entries);
    auto a = pipeline.tokenize(std::vector<std::string>{"u"});
    auto b = pipeline.tokenize(std::vector<std::string>{"v"});
    // pooled cosine is 0.6 up to float storage rounding
    EXPECT_TRUE(similarity_gate(a, b, 0.55, pipeline));
    EXPECT_FALSE(similarity_gate(a, b, 0.65, pipeline));
    EXPECT_FALSE(similarity_gate(a, b, 0.600001, pipeline));  // strict >
}

}  // namespace
