#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "waffle/model/train.hpp"
#include "waffle/policy/calibrate.hpp"
#include "waffle/policy/policy.hpp"

using namespace waffle;
using testutil::make_model;
using testutil::make_two_class_dataset;
using testutil::make_two_class_pipeline;

namespace {

std::vector<std::vector<double>> onehot_stream(const std::vector<int>& argmaxes, int n) {
    std::vector<std::vector<double>> out;
    for (int am : argmaxes) {
        std::vector<double> p(static_cast<std::size_t>(n), 0.001);
        p[static_cast<std::size_t>(am)] = 1.0 - 0.001 * (n - 1);
        out.push_back(p);
    }
    return out;
}

TEST(NormalizedEntropy, UniformIsOneForAnyN) {
    for (int n = 2; n <= 5; ++n) {
        std::vector<double> p(static_cast<std::size_t>(n), 1.0 / n);
        EXPECT_NEAR(normalized_entropy(p), 1.0, 1e-12);
    }
}

TEST(NormalizedEntropy, OneHotIsZero) {
    std::vector<double> p = {1.0, 0.0, 0.0};
    EXPECT_EQ(normalized_entropy(p), 0.0);
}

TEST(NormalizedEntropy, KnownBinaryValue) {
    std::vector<double> p = {0.9, 0.1};
    EXPECT_NEAR(normalized_entropy(p), 0.4690, 1e-3);
}

TEST(DecideExit, EntropyThresholdOneExitsImmediately) {
    PolicyConfig policy;
    policy.variant = PolicyVariant::Entropy;
    policy.entropy_threshold = 1.0;
    auto exits = onehot_stream({1, 0, 1}, 2);  // all below max entropy
    auto d = decide_exit(policy, exits);
    EXPECT_EQ(d.exit_layer, 1);
    EXPECT_EQ(d.prediction, 1);
}

TEST(DecideExit, EntropyThresholdZeroFallsThrough) {
    PolicyConfig policy;
    policy.variant = PolicyVariant::Entropy;
    policy.entropy_threshold = 0.0;
    auto exits = onehot_stream({1, 0, 1, 0}, 2);
    auto d = decide_exit(policy, exits);
    EXPECT_EQ(d.exit_layer, 4);
    EXPECT_EQ(d.prediction, 0);
}

TEST(DecideExit, PatienceTracesResetCounter) {
    PolicyConfig policy;
    policy.variant = PolicyVariant::Patience;
    policy.patience = 3;
    // argmax sequence A A B B B B -> counter 1,0,1,2,3 -> exit at layer 6
    auto exits = onehot_stream({0, 0, 1, 1, 1, 1}, 2);
    auto d = decide_exit(policy, exits);
    EXPECT_EQ(d.exit_layer, 6);
    EXPECT_EQ(d.prediction, 1);
}

TEST(DecideExit, PatienceNeverSatisfiedFallsBack) {
    PolicyConfig policy;
    policy.variant = PolicyVariant::Patience;
    policy.patience = 2;
    auto exits = onehot_stream({0, 1, 0, 1, 0, 1}, 2);
    auto d = decide_exit(policy, exits);
    EXPECT_EQ(d.exit_layer, 6);
    EXPECT_EQ(d.prediction, 1);  // final prediction
}

TEST(DecideExit, PatienceClosedFormOnConstantSequence) {
    for (int t = 1; t <= 5; ++t) {
        PolicyConfig policy;
        policy.variant = PolicyVariant::Patience;
        policy.patience = t;
        auto exits = onehot_stream(std::vector<int>(8, 1), 2);
        auto d = decide_exit(policy, exits);
        EXPECT_EQ(d.exit_layer, t + 1);
    }
}

TEST(DecideExit, NeverPeeksPastChosenExit) {
    PolicyConfig policy;
    policy.variant = PolicyVariant::Entropy;
    policy.entropy_threshold = 0.9;
    int max_fetched = 0;
    auto d = decide_exit_stream(policy, 6, [&](int i) {
        max_fetched = std::max(max_fetched, i);
        // low entropy from layer 3 on
        if (i >= 3) return std::vector<double>{0.99, 0.01};
        return std::vector<double>{0.5, 0.5};
    });
    EXPECT_EQ(d.exit_layer, 3);
    EXPECT_EQ(max_fetched, 3);

    // patience also consults only the prefix
    PolicyConfig pat;
    pat.variant = PolicyVariant::Patience;
    pat.patience = 1;
    max_fetched = 0;
    d = decide_exit_stream(pat, 6, [&](int i) {
        max_fetched = std::max(max_fetched, i);
        return std::vector<double>{0.9, 0.1};
    });
    EXPECT_EQ(d.exit_layer, 2);
    EXPECT_EQ(max_fetched, 2);

    PolicyConfig pf;
    pf.variant = PolicyVariant::PastFuture;
    pf.pastfuture_threshold = 0.95;
    max_fetched = 0;
    d = decide_exit_stream(pf, 6, [&](int i) {
        max_fetched = std::max(max_fetched, i);
        return std::vector<double>{0.97, 0.03};
    });
    EXPECT_EQ(max_fetched, d.exit_layer);
}

TEST(DecideExit, PastFutureReducesToEntropyInDegenerateConfiguration) {
    // identity calibrators with all weight mass on the final layer: the
    // aggregate at any layer i is then exactly p_i, so decisions match the
    // entropy policy at the same threshold
    const int K = 5;
    std::vector<std::vector<std::vector<double>>> inputs;
    Rng rng(4);
    for (int s = 0; s < 50; ++s) {
        std::vector<std::vector<double>> exits;
        for (int l = 0; l < K; ++l) {
            double a = 0.5 + 0.5 * rng.next_double();
            exits.push_back({a, 1.0 - a});
        }
        inputs.push_back(exits);
    }
    for (double threshold : {0.3, 0.6, 0.9}) {
        PolicyConfig ent;
        ent.variant = PolicyVariant::Entropy;
        ent.entropy_threshold = threshold;

        PolicyConfig pf;
        pf.variant = PolicyVariant::PastFuture;
        pf.pastfuture_threshold = threshold;
        for (int l = 0; l < K; ++l) pf.pastfuture_calibrators.push_back(AffineCalibrator::identity(2));
        pf.pastfuture_weights.assign(static_cast<std::size_t>(K), 0.0);
        pf.pastfuture_weights.back() = 1.0;

        for (const auto& exits : inputs) {
            auto de = decide_exit(ent, exits);
            auto dp = decide_exit(pf, exits);
            EXPECT_EQ(dp.exit_layer, de.exit_layer);
            EXPECT_EQ(dp.prediction, de.prediction);
        }
    }
}

TEST(Efficacy, EntropyVariantIsMonotoneInThreshold) {
    auto pipeline = make_two_class_pipeline();
    auto data = make_two_class_dataset(pipeline, 20, 15);
    auto model = make_model(pipeline, 6, 16, 2, 5);
    TrainConfig tc;
    tc.epochs = 20;
    tc.seed = 2;
    auto inputs = tokenize_inputs(data, pipeline);
    train(model, inputs, dataset_labels(data), tc);

    double prev = -1.0;
    for (double thr : {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        PolicyConfig p;
        p.variant = PolicyVariant::Entropy;
        p.entropy_threshold = thr;
        std::vector<int> layers;
        for (const auto& ids : inputs) layers.push_back(decide_exit(p, model.forward_all_exits(ids)).exit_layer);
        double eff = efficacy(layers, model.n_exits());
        EXPECT_GE(eff + 1e-12, prev);
        prev = eff;
    }
}

TEST(Calibrate, TrivialEndpoints) {
    auto pipeline = make_two_class_pipeline();
    auto data = make_two_class_dataset(pipeline, 20, 15);
    auto model = make_model(pipeline, 6, 16, 2, 5);
    TrainConfig tc;
    tc.epochs = 20;
    tc.seed = 2;
    auto inputs = tokenize_inputs(data, pipeline);
    train(model, inputs, dataset_labels(data), tc);

    // threshold 0: no early exit possible -> efficacy 0
    PolicyConfig p;
    p.variant = PolicyVariant::Entropy;
    p.entropy_threshold = 0.0;
    std::vector<int> layers;
    for (const auto& ids : inputs) layers.push_back(decide_exit(p, model.forward_all_exits(ids)).exit_layer);
    EXPECT_EQ(efficacy(layers, model.n_exits()), 0.0);

    // threshold 1: everything exits at layer 1 (softmax is never exactly uniform)
    p.entropy_threshold = 1.0;
    layers.clear();
    for (const auto& ids : inputs) layers.push_back(decide_exit(p, model.forward_all_exits(ids)).exit_layer);
    EXPECT_EQ(efficacy(layers, model.n_exits()), 1.0);
}

TEST(Calibrate, HitsBandOnTrainedModel) {
    auto pipeline = make_two_class_pipeline();
    auto data = make_two_class_dataset(pipeline, 40, 15);
    auto model = make_model(pipeline, 6, 16, 2, 5);
    TrainConfig tc;
    tc.epochs = 25;
    tc.seed = 2;
    auto inputs = tokenize_inputs(data, pipeline);
    train(model, inputs, dataset_labels(data), tc);

    auto cal = calibrate_policy(model, PolicyVariant::Entropy, inputs, 0.33, 0.5);
    EXPECT_FALSE(cal.config.out_of_band);
    EXPECT_GE(cal.achieved_efficacy, 0.33);
    EXPECT_LE(cal.achieved_efficacy, 0.5);

    auto cal_pf = calibrate_policy(model, PolicyVariant::PastFuture, inputs, 0.33, 0.5);
    EXPECT_FALSE(cal_pf.config.out_of_band);
    EXPECT_GE(cal_pf.achieved_efficacy, 0.33);
    EXPECT_LE(cal_pf.achieved_efficacy, 0.5);
    EXPECT_EQ(cal_pf.config.pastfuture_calibrators.size(), static_cast<std::size_t>(model.n_exits()));

    // patience is discrete: the largest t at or above the band floor
    auto cal_pat = calibrate_policy(model, PolicyVariant::Patience, inputs, 0.05, 0.95);
    EXPECT_GE(cal_pat.config.patience, 1);
    EXPECT_LE(cal_pat.config.patience, model.n_exits());
    if (!cal_pat.config.out_of_band) EXPECT_GE(cal_pat.achieved_efficacy, 0.05);
}

TEST(Calibrate, RejectsBadBand) {
    auto pipeline = make_two_class_pipeline();
    auto model = make_model(pipeline, 3, 8, 2, 5);
    EXPECT_THROW(calibrate_policy(model, PolicyVariant::Entropy, {{0, 1}}, 0.0, 0.5), DataError);
    EXPECT_THROW(calibrate_policy(model, PolicyVariant::Entropy, {}, 0.2, 0.5), DataError);
}

}  // namespace
