#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "waffle/metrics/metrics.hpp"
#include "waffle/model/multi_exit.hpp"
#include "waffle/policy/policy.hpp"
#include "waffle/util/errors.hpp"

namespace waffle {

struct CalibrationResult {
    PolicyConfig config;
    double achieved_efficacy = 0.0;
};

namespace detail {

inline double measured_efficacy(const PolicyConfig& policy,
                                const std::vector<std::vector<std::vector<float>>>& all_exits,
                                int n_exits) {
    std::vector<int> layers;
    layers.reserve(all_exits.size());
    for (const auto& exits : all_exits) layers.push_back(decide_exit(policy, exits).exit_layer);
    return efficacy(layers, n_exits);
}

// Ridge least squares fit of p_hat = A p + b from stacked (input, target)
// rows. Normal equations on the augmented system [p, 1]; the problem is
// (N+1)x(N+1), solved by Gaussian elimination with partial pivoting.
inline AffineCalibrator fit_affine_calibrator(const std::vector<std::vector<float>>& inputs,
                                              const std::vector<std::vector<float>>& targets,
                                              int n_classes, double ridge = 1e-3) {
    const int n = n_classes;
    const int aug = n + 1;
    std::vector<double> ztz(static_cast<std::size_t>(aug) * aug, 0.0);
    std::vector<double> zty(static_cast<std::size_t>(aug) * n, 0.0);
    for (std::size_t r = 0; r < inputs.size(); ++r) {
        std::vector<double> z(static_cast<std::size_t>(aug), 1.0);
        for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = inputs[r][static_cast<std::size_t>(i)];
        for (int i = 0; i < aug; ++i) {
            for (int j = 0; j < aug; ++j)
                ztz[static_cast<std::size_t>(i) * aug + j] += z[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(j)];
            for (int j = 0; j < n; ++j)
                zty[static_cast<std::size_t>(i) * n + j] +=
                    z[static_cast<std::size_t>(i)] * targets[r][static_cast<std::size_t>(j)];
        }
    }
    for (int i = 0; i < aug; ++i) ztz[static_cast<std::size_t>(i) * aug + i] += ridge;

    // solve ztz * W = zty for W (aug x n)
    std::vector<double> w(static_cast<std::size_t>(aug) * n, 0.0);
    std::vector<double> m = ztz;
    std::vector<double> rhs = zty;
    for (int col = 0; col < aug; ++col) {
        int pivot = col;
        for (int r2 = col + 1; r2 < aug; ++r2)
            if (std::abs(m[static_cast<std::size_t>(r2) * aug + col]) >
                std::abs(m[static_cast<std::size_t>(pivot) * aug + col]))
                pivot = r2;
        if (std::abs(m[static_cast<std::size_t>(pivot) * aug + col]) < 1e-12) continue;
        if (pivot != col) {
            for (int j = 0; j < aug; ++j)
                std::swap(m[static_cast<std::size_t>(col) * aug + j], m[static_cast<std::size_t>(pivot) * aug + j]);
            for (int j = 0; j < n; ++j)
                std::swap(rhs[static_cast<std::size_t>(col) * n + j], rhs[static_cast<std::size_t>(pivot) * n + j]);
        }
        double diag = m[static_cast<std::size_t>(col) * aug + col];
        for (int r2 = col + 1; r2 < aug; ++r2) {
            double f = m[static_cast<std::size_t>(r2) * aug + col] / diag;
            if (f == 0.0) continue;
            for (int j = col; j < aug; ++j)
                m[static_cast<std::size_t>(r2) * aug + j] -= f * m[static_cast<std::size_t>(col) * aug + j];
            for (int j = 0; j < n; ++j)
                rhs[static_cast<std::size_t>(r2) * n + j] -= f * rhs[static_cast<std::size_t>(col) * n + j];
        }
    }
    for (int col = aug - 1; col >= 0; --col) {
        double diag = m[static_cast<std::size_t>(col) * aug + col];
        if (std::abs(diag) < 1e-12) continue;
        for (int j = 0; j < n; ++j) {
            double acc = rhs[static_cast<std::size_t>(col) * n + j];
            for (int k = col + 1; k < aug; ++k)
                acc -= m[static_cast<std::size_t>(col) * aug + k] * w[static_cast<std::size_t>(k) * n + j];
            w[static_cast<std::size_t>(col) * n + j] = acc / diag;
        }
    }

    AffineCalibrator cal;
    cal.a.assign(static_cast<std::size_t>(n) * n, 0.0);
    cal.b.assign(static_cast<std::size_t>(n), 0.0);
    // W rows are [input dim + bias] -> output; calibrator stores A[out][in].
    for (int out = 0; out < n; ++out) {
        for (int in = 0; in < n; ++in)
            cal.a[static_cast<std::size_t>(out) * n + in] = w[static_cast<std::size_t>(in) * n + out];
        cal.b[static_cast<std::size_t>(out)] = w[static_cast<std::size_t>(n) * n + out];
    }
    return cal;
}

}  // namespace detail

// Fits the per-layer future estimators for the past-future policy: for each
// target layer j, an affine map from the distribution at any earlier layer
// to the observed distribution at j, over all validation samples and all
// earlier layers.
inline std::vector<AffineCalibrator> fit_pastfuture_calibrators(
    const std::vector<std::vector<std::vector<float>>>& all_exits, int n_exits, int n_classes) {
    std::vector<AffineCalibrator> out;
    out.reserve(static_cast<std::size_t>(n_exits));
    for (int j = 0; j < n_exits; ++j) {
        if (j == 0) {
            out.push_back(AffineCalibrator::identity(n_classes));
            continue;
        }
        std::vector<std::vector<float>> inputs, targets;
        for (const auto& exits : all_exits) {
            for (int i = 0; i < j; ++i) {
                inputs.push_back(exits[static_cast<std::size_t>(i)]);
                targets.push_back(exits[static_cast<std::size_t>(j)]);
            }
        }
        out.push_back(detail::fit_affine_calibrator(inputs, targets, n_classes));
    }
    return out;
}

// Tunes the policy so that clean-set efficacy lands in [band_lo, band_hi].
// Entropy and past-future bisect their threshold (efficacy is monotone in
// it); patience scans t = K..1 and keeps the largest t at or above the
// band's lower edge. An unattainable band returns the nearest configuration
// with out_of_band set rather than failing.
inline CalibrationResult calibrate_policy(const MultiExitClassifier& model, PolicyVariant variant,
                                          const std::vector<std::vector<int>>& validation_inputs,
                                          double band_lo, double band_hi) {
    if (validation_inputs.empty()) throw DataError("calibrate_policy: empty validation set");
    if (!(band_lo > 0.0 && band_hi < 1.0 && band_lo <= band_hi))
        throw DataError("calibrate_policy: band must satisfy 0 < lo <= hi < 1");

    const int K = model.n_exits();
    std::vector<std::vector<std::vector<float>>> all_exits;
    all_exits.reserve(validation_inputs.size());
    for (const auto& ids : validation_inputs) all_exits.push_back(model.forward_all_exits(ids));

    CalibrationResult result;
    result.config.variant = variant;

    if (variant == PolicyVariant::Patience) {
        int best_t = -1;
        double best_eff = 0.0;
        double nearest_gap = 1e9;
        int nearest_t = 1;
        double nearest_eff = 0.0;
        for (int t = K; t >= 1; --t) {
            PolicyConfig probe;
            probe.variant = PolicyVariant::Patience;
            probe.patience = t;
            double eff = detail::measured_efficacy(probe, all_exits, K);
            double gap = eff < band_lo ? band_lo - eff : (eff > band_hi ? eff - band_hi : 0.0);
            if (gap < nearest_gap) {
                nearest_gap = gap;
                nearest_t = t;
                nearest_eff = eff;
            }
            if (eff >= band_lo && best_t < 0) {
                best_t = t;
                best_eff = eff;
            }
        }
        if (best_t < 0) {
            result.config.patience = nearest_t;
            result.achieved_efficacy = nearest_eff;
            result.config.out_of_band = true;
        } else {
            result.config.patience = best_t;
            result.achieved_efficacy = best_eff;
            result.config.out_of_band = best_eff > band_hi;
        }
        return result;
    }

    if (variant == PolicyVariant::PastFuture)
        result.config.pastfuture_calibrators =
            fit_pastfuture_calibrators(all_exits, K, model.hyper.n_classes);

    auto eff_at = [&](double threshold) {
        PolicyConfig probe = result.config;
        if (variant == PolicyVariant::Entropy) probe.entropy_threshold = threshold;
        else probe.pastfuture_threshold = threshold;
        return detail::measured_efficacy(probe, all_exits, K);
    };

    double lo_t = 0.0, hi_t = 1.0;
    double threshold = 0.5, eff = eff_at(threshold);
    for (int iter = 0; iter < 40 && (eff < band_lo || eff > band_hi); ++iter) {
        if (eff < band_lo) lo_t = threshold;
        else hi_t = threshold;
        threshold = 0.5 * (lo_t + hi_t);
        eff = eff_at(threshold);
    }
    if (variant == PolicyVariant::Entropy) result.config.entropy_threshold = threshold;
    else result.config.pastfuture_threshold = threshold;
    result.achieved_efficacy = eff;
    result.config.out_of_band = eff < band_lo || eff > band_hi;
    return result;
}

}  // namespace waffle
