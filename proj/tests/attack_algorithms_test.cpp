#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "waffle/attack/run.hpp"
#include "waffle/attack/verify.hpp"

using namespace waffle;
using testutil::make_pipeline;
using testutil::VocabEntry;

namespace {

// Hand-built fixture: identity-ish model whose confidence is the mean of
// embedding dimension 0. Four interchangeable class words sit at (1, 0);
// "confuser" is placed so that substituting it into the 4-word fixture
// sentence pulls the pooled representation to zero margin (all exits go
// uniform); "flipword" overshoots far past the boundary (confident flip).
class TriggerFixture : public ::testing::Test {
protected:
    void SetUp() override {
        // mean of sin(pos) over positions 0..3 pollutes pooled dim 0; bake
        // it into the confuser embedding so the post-substitution margin is
        // near zero for a 4-word sentence, biased slightly toward the
        // original class (high slowdown without a prediction flip)
        double offset = (std::sin(0.0) + std::sin(1.0) + std::sin(2.0) + std::sin(3.0)) / 4.0;
        float confuser_x = static_cast<float>(-3.0 - 4.0 * offset + 0.02);

        std::vector<VocabEntry> entries = {
            {"aa0", {1.0f, 0.0f}, pos_bit(PosTag::NOUN), false},
            {"aa1", {1.0f, 0.0f}, pos_bit(PosTag::NOUN), false},
            {"aa2", {1.0f, 0.0f}, pos_bit(PosTag::NOUN), false},
            {"aa3", {1.0f, 0.0f}, pos_bit(PosTag::NOUN), false},
            {"confuser", {confuser_x, 0.02f}, pos_bit(PosTag::NOUN), false},
            {"flipword", {-14.0f, 0.01f}, pos_bit(PosTag::NOUN), false},
            {"the", {0.01f, 0.0f}, pos_bit(PosTag::DET), true},
        };
        pipeline = make_pipeline(entries);

        ModelHyper h;
        h.n_layers = 4;
        h.n_classes = 2;
        h.d_model = 2;
        model = MultiExitClassifier::init(h, pipeline.embeddings, pipeline.vocab);
        // input projection = identity, blocks stay zero (pure residual),
        // every head reads dimension 0 with a steep margin
        model.w_in[0] = 1.0f;  // (0,0)
        model.w_in[3] = 1.0f;  // (1,1)
        const float c = 6.0f;
        for (auto& head : model.heads) {
            head.w[0] = c;    // dim0 -> logit0
            head.w[1] = -c;   // dim0 -> logit1
        }

        policy.variant = PolicyVariant::Entropy;
        policy.entropy_threshold = 0.5;

        cfg.goal.kind = GoalKind::Slowdown;
        cfg.goal.alpha = 0.9;
        cfg.epsilon = -1.0;  // fixture gate wide open
        cfg.n_synonyms = 50;
        cfg.scope = PerturbScope::AllSegments;
    }

    TextExample fixture_example(int label = 0) {
        TextExample ex;
        ex.label = label;
        ex.segments = {"aa0 aa1 aa2 aa3"};
        return ex;
    }

    TextPipeline pipeline;
    MultiExitClassifier model = MultiExitClassifier{};
    PolicyConfig policy;
    AttackConfig cfg;
};

TEST_F(TriggerFixture, AllStopWordsReturnOriginalWithOneQuery) {
    TextExample ex;
    ex.label = 0;
    ex.segments = {"the the the"};
    auto r = waffle_tf(ex, model, policy, pipeline, cfg);
    EXPECT_FALSE(r.success);
    EXPECT_TRUE(r.substitutions.empty());
    EXPECT_EQ(r.queries, 1u);
    EXPECT_EQ(r.perturbed.segment_text(0), "the the the");
}

TEST_F(TriggerFixture, OneSubstitutionLiftsAboveAlpha) {
    auto r = waffle_tf(fixture_example(), model, policy, pipeline, cfg);
    EXPECT_TRUE(r.success);
    ASSERT_EQ(r.substitutions.size(), 1u);
    EXPECT_EQ(r.substitutions[0].new_word, "confuser");
    EXPECT_GE(r.final_score, cfg.goal.alpha);
    // deletions tie, so the earliest position ranks first
    EXPECT_EQ(r.substitutions[0].position, 0u);
    // queries: base (1) + importance probes (4) + all five gated candidates
    // at the first position (winner selection scores the full set)
    EXPECT_EQ(r.queries, 10u);
    // slowdown pushed the exit later
    EXPECT_GE(r.exit_after, r.exit_before);
}

TEST_F(TriggerFixture, AlphaZeroPicksSimilarityMaximalWinner) {
    cfg.goal.alpha = 0.0;  // every scored candidate wins
    auto r = waffle_tf(fixture_example(), model, policy, pipeline, cfg);
    EXPECT_TRUE(r.success);
    ASSERT_EQ(r.substitutions.size(), 1u);
    // winners include identical-embedding words at similarity exactly 1.0;
    // the similarity-maximal one (first by candidate order) is aa1
    EXPECT_EQ(r.substitutions[0].new_word, "aa1");
    EXPECT_EQ(r.substitutions[0].position, 0u);
}

TEST_F(TriggerFixture, WaffleA2TSingleSubstitution) {
    auto r = waffle_a2t(fixture_example(), model, policy, pipeline, cfg);
    EXPECT_TRUE(r.success);
    ASSERT_EQ(r.substitutions.size(), 1u);
    EXPECT_EQ(r.substitutions[0].new_word, "confuser");
    EXPECT_EQ(r.backwards, 1u);
    // gradient ranking costs 1 forward; the first word's candidate pool
    // has at most 5 entries (a2t caps at 20)
    EXPECT_LE(r.queries, 1u + 5u);
}

TEST_F(TriggerFixture, WaffleA2TQueryBound) {
    auto r = waffle_a2t(fixture_example(), model, policy, pipeline, cfg);
    // total <= sum of candidate set sizes + 2 (importance forward + slack)
    std::size_t candidate_bound = 0;
    auto tok = pipeline.tokenize(fixture_example());
    for (std::size_t pos = 0; pos < tok.total_words(); ++pos)
        candidate_bound += candidate_set(pos, tok, pipeline, kA2TSynonymCount, 0).size();
    EXPECT_LE(r.queries, candidate_bound + 2);
}

TEST_F(TriggerFixture, EmptyCandidateSetsReturnOriginal) {
    // a vocabulary whose only words share no POS tag with each other; the
    // model is confident on the input, so the goal is not met at the start
    std::vector<VocabEntry> entries = {
        {"nounword", {1.0f, 0.0f}, pos_bit(PosTag::NOUN), false},
        {"verbword", {0.99f, 0.1f}, pos_bit(PosTag::VERB), false},
        {"adjword", {0.98f, 0.15f}, pos_bit(PosTag::ADJ), false},
    };
    auto pl = make_pipeline(entries);
    ModelHyper h;
    h.n_layers = 2;
    h.n_classes = 2;
    h.d_model = 2;
    auto m = MultiExitClassifier::init(h, pl.embeddings, pl.vocab);
    m.w_in[0] = 1.0f;
    m.w_in[3] = 1.0f;
    for (auto& head : m.heads) {
        head.w[0] = 6.0f;
        head.w[1] = -6.0f;
    }
    TextExample ex;
    ex.label = 0;
    ex.segments = {"nounword"};
    auto r = waffle_a2t(ex, m, policy, pl, cfg);
    EXPECT_FALSE(r.success);
    EXPECT_TRUE(r.substitutions.empty());
    EXPECT_EQ(r.perturbed.segment_text(0), "nounword");
}

TEST_F(TriggerFixture, BaselineImmediateSuccessOnMisclassifiedInput) {
    cfg.goal.kind = GoalKind::Misclassification;
    // model predicts class 0 on the fixture sentence; label 1 is already wrong
    auto r = baseline_attack(AttackVariant::BaselineTF, fixture_example(/*label=*/1), model, policy,
                             pipeline, cfg);
    EXPECT_TRUE(r.success);
    EXPECT_TRUE(r.substitutions.empty());
    EXPECT_EQ(r.queries, 1u);
}

TEST_F(TriggerFixture, BaselineFlipInducingSynonym) {
    cfg.goal.kind = GoalKind::Misclassification;
    auto r = baseline_attack(AttackVariant::BaselineTF, fixture_example(/*label=*/0), model, policy,
                             pipeline, cfg);
    EXPECT_TRUE(r.success);
    ASSERT_EQ(r.substitutions.size(), 1u);
    EXPECT_EQ(r.substitutions[0].new_word, "flipword");
    EXPECT_NE(r.pred_after, 0);
}

TEST_F(TriggerFixture, BaselineExhaustionReturnsBestEffort) {
    cfg.goal.kind = GoalKind::Misclassification;
    // restrict the vocabulary view: cap candidates to the identical words
    // (aa1..aa3 rank first; no flip possible among them)
    cfg.max_candidates_per_word = 3;
    auto r = baseline_attack(AttackVariant::BaselineTF, fixture_example(/*label=*/0), model, policy,
                             pipeline, cfg);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.pred_after, 0);
}

TEST_F(TriggerFixture, QueryBudgetExhaustionFlags) {
    cfg.query_budget = 3;  // base + 2 probes, then dry
    auto r = waffle_tf(fixture_example(), model, policy, pipeline, cfg);
    EXPECT_TRUE(r.budget_exhausted);
    EXPECT_LE(r.queries, 3u);
}

TEST_F(TriggerFixture, ReplayVerifierAcceptsGenuineResults) {
    for (auto variant : {AttackVariant::WaffleTF, AttackVariant::WaffleA2T}) {
        auto r = run_attack(variant, fixture_example(), model, policy, pipeline, cfg);
        auto violations = verify_result(r, variant, model, policy, pipeline, cfg);
        EXPECT_TRUE(violations.empty()) << (violations.empty() ? "" : violations[0]);
    }
}

TEST_F(TriggerFixture, ReplayVerifierRejectsTamperedResults) {
    auto r = waffle_tf(fixture_example(), model, policy, pipeline, cfg);
    ASSERT_FALSE(r.substitutions.empty());

    auto tampered = r;
    tampered.substitutions[0].new_word = "aa3";
    EXPECT_FALSE(verify_result(tampered, AttackVariant::WaffleTF, model, policy, pipeline, cfg).empty());

    tampered = r;
    tampered.final_score += 1e-9;
    EXPECT_FALSE(verify_result(tampered, AttackVariant::WaffleTF, model, policy, pipeline, cfg).empty());

    tampered = r;
    tampered.substitutions.clear();
    EXPECT_FALSE(verify_result(tampered, AttackVariant::WaffleTF, model, policy, pipeline, cfg).empty());
}

// randomized sentences over the fixture vocabulary: replay consistency and
// best-score monotonicity on every result
TEST_F(TriggerFixture, GreedyConsistencyAndMonotonicityOnRandomBatch) {
    Rng rng(3);
    Dataset data;
    for (int i = 0; i < 30; ++i) {
        std::vector<std::string> words;
        int n = 3 + static_cast<int>(rng.next_below(4));
        const char* pool[] = {"aa0", "aa1", "aa2", "aa3", "the", "confuser"};
        for (int w = 0; w < n; ++w) words.push_back(pool[rng.next_below(6)]);
        TextExample ex;
        ex.label = static_cast<int>(rng.next_below(2));
        ex.segments = {detokenize_words(words)};
        data.push_back(ex);
    }
    cfg.goal.alpha = 0.95;
    auto out = attack_dataset(data, model, policy, pipeline, cfg, AttackVariant::WaffleTF, 2);
    for (const auto& r : out.results) {
        auto violations = verify_result(r, AttackVariant::WaffleTF, model, policy, pipeline, cfg);
        EXPECT_TRUE(violations.empty()) << (violations.empty() ? "" : violations[0]);
        // best-score monotonicity along the substitution log
        double prev = -1.0;
        for (const auto& s : r.substitutions) {
            EXPECT_GE(s.score_after, prev);
            prev = s.score_after;
        }
        // success definition is exact
        EXPECT_EQ(r.success, r.final_score >= cfg.goal.alpha);
        // perturbed differs from original only at logged positions
        auto orig = pipeline.tokenize(r.original);
        ASSERT_EQ(orig.total_words(), r.perturbed.total_words());
        std::vector<bool> touched(orig.total_words(), false);
        for (const auto& s : r.substitutions) touched[s.position] = true;
        for (std::size_t p = 0; p < orig.total_words(); ++p)
            if (!touched[p]) EXPECT_EQ(orig.word_at(p), r.perturbed.word_at(p));
    }
}

TEST_F(TriggerFixture, AttackDatasetWorkerCountInvariance) {
    Rng rng(5);
    Dataset data;
    for (int i = 0; i < 12; ++i) {
        TextExample ex;
        ex.label = i % 2;
        ex.segments = {"aa0 aa1 aa2 aa3"};
        data.push_back(ex);
    }
    auto a = attack_dataset(data, model, policy, pipeline, cfg, AttackVariant::WaffleTF, 1);
    auto b = attack_dataset(data, model, policy, pipeline, cfg, AttackVariant::WaffleTF, 8);
    ASSERT_EQ(a.results.size(), b.results.size());
    for (std::size_t i = 0; i < a.results.size(); ++i) {
        EXPECT_EQ(a.results[i].final_score, b.results[i].final_score);
        EXPECT_EQ(a.results[i].queries, b.results[i].queries);
        EXPECT_EQ(a.results[i].substitutions.size(), b.results[i].substitutions.size());
        EXPECT_TRUE(a.results[i].perturbed.same_words(b.results[i].perturbed));
    }
    EXPECT_EQ(a.report.adv_eff, b.report.adv_eff);
    EXPECT_EQ(a.report.adv_acc, b.report.adv_acc);
}

TEST_F(TriggerFixture, EmptyDatasetIsAnError) {
    Dataset empty;
    EXPECT_THROW(attack_dataset(empty, model, policy, pipeline, cfg, AttackVariant::WaffleTF, 1),
                 DataError);
}

TEST_F(TriggerFixture, PairTaskPerturbsSecondSegmentByDefault) {
    cfg.scope = PerturbScope::SecondSegment;
    TextExample ex;
    ex.label = 0;
    ex.segments = {"aa0 aa1", "aa2 aa3"};
    auto r = waffle_tf(ex, model, policy, pipeline, cfg);
    for (const auto& s : r.substitutions) EXPECT_GE(s.position, 2u) << "substituted in segment 1";
    EXPECT_EQ(r.perturbed.segment_text(0), "aa0 aa1");
}

TEST_F(TriggerFixture, ReportAggregatesMatchRecomputation) {
    Dataset data;
    for (int i = 0; i < 10; ++i) {
        TextExample ex;
        ex.label = i % 2;
        ex.segments = {"aa0 aa1 aa2 aa3"};
        data.push_back(ex);
    }
    auto out = attack_dataset(data, model, policy, pipeline, cfg, AttackVariant::WaffleTF, 2);
    std::vector<int> clean_exits, adv_exits;
    for (const auto& row : out.report.rows) {
        clean_exits.push_back(row.exit_clean);
        adv_exits.push_back(row.exit_adv);
    }
    EXPECT_EQ(out.report.clean_eff, efficacy(clean_exits, model.n_exits()));
    EXPECT_EQ(out.report.adv_eff, efficacy(adv_exits, model.n_exits()));
}

}  // namespace
