#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "waffle/util/errors.hpp"

namespace waffle {

inline constexpr const char* kEfficacyFormulaVersion = "cdf-mean-v1";

// Early-exit utilization in [0, 1]: mean over layers l = 1..L-1 of the
// empirical CDF P(exit <= l), which collapses to (L - mean(exit)) / (L - 1).
// 1 when everything exits at layer 1, 0 when nothing exits early.
inline double efficacy(const std::vector<int>& exit_layers, int total_layers) {
    if (total_layers < 2) throw DataError("efficacy: need at least 2 layers");
    if (exit_layers.empty()) throw DataError("efficacy: no samples");
    double sum = 0.0;
    for (int e : exit_layers) {
        if (e < 1 || e > total_layers) throw DataError("efficacy: exit layer out of range");
        sum += static_cast<double>(e);
    }
    double mean = sum / static_cast<double>(exit_layers.size());
    return (static_cast<double>(total_layers) - mean) / static_cast<double>(total_layers - 1);
}

// Reference form used by the property tests: mean of the empirical CDF over
// the first L-1 layers.
inline double efficacy_cdf_form(const std::vector<int>& exit_layers, int total_layers) {
    if (total_layers < 2) throw DataError("efficacy: need at least 2 layers");
    if (exit_layers.empty()) throw DataError("efficacy: no samples");
    double acc = 0.0;
    for (int l = 1; l <= total_layers - 1; ++l) {
        std::size_t count = 0;
        for (int e : exit_layers)
            if (e <= l) ++count;
        acc += static_cast<double>(count) / static_cast<double>(exit_layers.size());
    }
    return acc / static_cast<double>(total_layers - 1);
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw DataError("accuracy: predictions/labels length mismatch (" +
                        std::to_string(predictions.size()) + " vs " + std::to_string(labels.size()) + ")");
    if (predictions.empty()) throw DataError("accuracy: no samples");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

inline double mean_of_int(const std::vector<int>& v) {
    double s = 0.0;
    for (int x : v) s += static_cast<double>(x);
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Pearson correlation; 0 when either column has zero variance.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.empty()) throw DataError("pearson: bad column lengths");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace waffle
