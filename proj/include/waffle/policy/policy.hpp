#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "waffle/util/errors.hpp"

namespace waffle {

enum class PolicyVariant { Entropy, Patience, PastFuture };

// The simplified past-future variant is named with this suffix in every
// output so downstream consumers cannot mistake it for the published
// algorithm's exact estimator.
inline const char* policy_variant_name(PolicyVariant v) {
    switch (v) {
        case PolicyVariant::Entropy: return "entropy";
        case PolicyVariant::Patience: return "patience";
        case PolicyVariant::PastFuture: return "past_future_simplified";
    }
    return "?";
}

inline bool parse_policy_variant(const std::string& name, PolicyVariant& out) {
    if (name == "entropy") out = PolicyVariant::Entropy;
    else if (name == "patience") out = PolicyVariant::Patience;
    else if (name == "past_future" || name == "past_future_simplified") out = PolicyVariant::PastFuture;
    else return false;
    return true;
}

// Per-layer affine calibrator: p_hat = A p + b, then clamp to nonnegative
// and renormalize onto the simplex. Identity by default.
struct AffineCalibrator {
    std::vector<double> a;  // n x n row major
    std::vector<double> b;  // n

    static AffineCalibrator identity(int n) {
        AffineCalibrator c;
        c.a.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) c.a[static_cast<std::size_t>(i) * n + i] = 1.0;
        c.b.assign(static_cast<std::size_t>(n), 0.0);
        return c;
    }

    bool is_identity() const {
        int n = static_cast<int>(b.size());
        for (int i = 0; i < n; ++i) {
            if (b[static_cast<std::size_t>(i)] != 0.0) return false;
            for (int j = 0; j < n; ++j) {
                double want = (i == j) ? 1.0 : 0.0;
                if (a[static_cast<std::size_t>(i) * n + j] != want) return false;
            }
        }
        return true;
    }

    std::vector<double> apply(const std::vector<double>& p) const {
        int n = static_cast<int>(p.size());
        std::vector<double> out(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) s += a[static_cast<std::size_t>(i) * n + j] * p[static_cast<std::size_t>(j)];
            out[static_cast<std::size_t>(i)] = s;
        }
        double total = 0.0;
        for (auto& v : out) {
            if (v < 0.0) v = 0.0;
            total += v;
        }
        if (total <= 0.0) {
            for (auto& v : out) v = 1.0 / n;
        } else {
            for (auto& v : out) v /= total;
        }
        return out;
    }
};

struct PolicyConfig {
    PolicyVariant variant = PolicyVariant::Entropy;
    double entropy_threshold = 0.5;
    int patience = 6;
    double pastfuture_threshold = 0.5;
    // weight of exit j (1-based j = index+1) in the past-future aggregate;
    // default w_j = j, later exits weigh more
    std::vector<double> pastfuture_weights;
    std::vector<AffineCalibrator> pastfuture_calibrators;  // one per layer
    bool out_of_band = false;  // set by calibration when the band was unattainable

    double pf_weight(int layer_1based, int total) const {
        if (pastfuture_weights.empty()) return static_cast<double>(layer_1based);
        (void)total;
        return pastfuture_weights.at(static_cast<std::size_t>(layer_1based - 1));
    }

    const AffineCalibrator& pf_calibrator(int layer_1based, int n_classes) const {
        static thread_local AffineCalibrator ident;
        if (pastfuture_calibrators.empty()) {
            ident = AffineCalibrator::identity(n_classes);
            return ident;
        }
        return pastfuture_calibrators.at(static_cast<std::size_t>(layer_1based - 1));
    }
};

// H(p) / ln N, in [0, 1]; 0 ln 0 := 0.
template <typename T>
double normalized_entropy(const std::vector<T>& p) {
    double h = 0.0;
    for (T v : p) {
        double x = static_cast<double>(v);
        if (x > 0.0) h -= x * std::log(x);
    }
    double denom = std::log(static_cast<double>(p.size()));
    if (denom <= 0.0) return 0.0;  // single class: entropy is always zero
    return h / denom;
}

template <typename T>
int argmax_index(const std::vector<T>& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct ExitDecision {
    int exit_layer = 0;  // 1-based, in [1, K]
    int prediction = 0;
};

// Per-input record of everything the audit needs: all exit distributions,
// the policy's decision, and per-exit entropies.
struct ExitTrace {
    std::vector<std::vector<float>> probs;  // K vectors
    std::vector<double> entropies;          // normalized, per exit
    int exit_layer = 0;                     // 1-based
    int prediction = 0;

    double final_score = 0.0;  // filled by attack code when relevant
};

// Streaming decision: fetch(i) yields p_i for 1-based i and is never called
// with i beyond the returned exit layer. Tests wrap fetch with a counter to
// enforce the no-peeking contract.
inline ExitDecision decide_exit_stream(const PolicyConfig& policy, int n_exits,
                                       const std::function<std::vector<double>(int)>& fetch) {
    if (n_exits < 1) throw DataError("decide_exit: no exits");
    switch (policy.variant) {
        case PolicyVariant::Entropy: {
            std::vector<double> p;
            for (int i = 1; i <= n_exits; ++i) {
                p = fetch(i);
                if (normalized_entropy(p) < policy.entropy_threshold) return {i, argmax_index(p)};
            }
            return {n_exits, argmax_index(p)};
        }
        case PolicyVariant::Patience: {
            int counter = 0;
            int prev_argmax = -1;
            std::vector<double> p;
            for (int i = 1; i <= n_exits; ++i) {
                p = fetch(i);
                int am = argmax_index(p);
                if (i > 1) counter = (am == prev_argmax) ? counter + 1 : 0;
                prev_argmax = am;
                if (counter >= policy.patience) return {i, am};
            }
            return {n_exits, argmax_index(p)};
        }
        case PolicyVariant::PastFuture: {
            std::vector<std::vector<double>> past;
            std::vector<double> p;
            for (int i = 1; i <= n_exits; ++i) {
                p = fetch(i);
                past.push_back(p);
                const int ncls = static_cast<int>(p.size());
                std::vector<double> agg(static_cast<std::size_t>(ncls), 0.0);
                double wsum = 0.0;
                for (int j = 1; j <= i; ++j) {
                    double w = policy.pf_weight(j, n_exits);
                    wsum += w;
                    const auto& pj = past[static_cast<std::size_t>(j - 1)];
                    for (int cidx = 0; cidx < ncls; ++cidx)
                        agg[static_cast<std::size_t>(cidx)] += w * pj[static_cast<std::size_t>(cidx)];
                }
                for (int j = i + 1; j <= n_exits; ++j) {
                    double w = policy.pf_weight(j, n_exits);
                    wsum += w;
                    auto est = policy.pf_calibrator(j, ncls).apply(p);
                    for (int cidx = 0; cidx < ncls; ++cidx)
                        agg[static_cast<std::size_t>(cidx)] += w * est[static_cast<std::size_t>(cidx)];
                }
                if (wsum > 0.0)
                    for (auto& v : agg) v /= wsum;
                if (normalized_entropy(agg) < policy.pastfuture_threshold) return {i, argmax_index(agg)};
            }
            return {n_exits, argmax_index(p)};
        }
    }
    throw DataError("decide_exit: unknown policy variant");
}

// Convenience overload on precomputed exit distributions. Only the prefix
// up to the returned exit layer is ever inspected.
template <typename T>
ExitDecision decide_exit(const PolicyConfig& policy, const std::vector<std::vector<T>>& exits) {
    return decide_exit_stream(policy, static_cast<int>(exits.size()), [&](int i) {
        const auto& src = exits.at(static_cast<std::size_t>(i - 1));
        return std::vector<double>(src.begin(), src.end());
    });
}

template <typename T>
ExitTrace make_trace(const PolicyConfig& policy, const std::vector<std::vector<T>>& exits) {
    ExitTrace t;
    t.probs.reserve(exits.size());
    for (const auto& p : exits) t.probs.emplace_back(p.begin(), p.end());
    t.entropies.reserve(exits.size());
    for (const auto& p : exits) t.entropies.push_back(normalized_entropy(p));
    auto d = decide_exit(policy, exits);
    t.exit_layer = d.exit_layer;
    t.prediction = d.prediction;
    return t;
}

}  // namespace waffle
