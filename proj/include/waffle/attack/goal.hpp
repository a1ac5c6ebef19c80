#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "waffle/policy/policy.hpp"
#include "waffle/util/errors.hpp"

namespace waffle {

enum class GoalKind { Slowdown, Misclassification };

inline const char* goal_kind_name(GoalKind k) {
    return k == GoalKind::Slowdown ? "slowdown" : "misclassification";
}

struct GoalFunction {
    GoalKind kind = GoalKind::Slowdown;
    double alpha = 0.5;     // slowdown success threshold, consulted only for slowdown
    int original_label = 0; // consulted only for misclassification
};

// Mean over exits of closeness to the uniform distribution under l1:
//   (1/K) * sum_i [ 1 - ||p_i - u||_1 / (N - 1) ]
// 1.0 when every exit is uniform. For N = 2 the value spans [0, 1] exactly;
// for N > 2 the floor is 1 - 2/N (one-hot distance is 2 - 2/N < N - 1).
template <typename T>
double slowdown_score(const std::vector<std::vector<T>>& exits, int n_classes) {
    if (exits.empty()) throw DataError("slowdown_score: no exits");
    if (n_classes < 2) throw DataError("slowdown_score: need at least 2 classes");
    // the uniform reference lives in the exits' own precision so an exactly
    // uniform distribution scores exactly 1
    const T uniform = T(1) / static_cast<T>(n_classes);
    double total = 0.0;
    for (const auto& p : exits) {
        double l1 = 0.0;
        for (T v : p) l1 += std::abs(static_cast<double>(v - uniform));
        total += 1.0 - l1 / static_cast<double>(n_classes - 1);
    }
    return total / static_cast<double>(exits.size());
}

struct GoalScore {
    double score = 0.0;
    bool success = false;
};

// Slowdown: score over all exits, success at score >= alpha (inclusive).
// Misclassification: score = 1 - p[y] at the policy-chosen exit, success on
// a prediction flip there.
inline GoalScore goal_score(const GoalFunction& goal, const ExitTrace& trace, int n_classes) {
    GoalScore out;
    if (goal.kind == GoalKind::Slowdown) {
        out.score = slowdown_score(trace.probs, n_classes);
        out.success = out.score >= goal.alpha;
    } else {
        const auto& p = trace.probs.at(static_cast<std::size_t>(trace.exit_layer - 1));
        out.score = 1.0 - static_cast<double>(p.at(static_cast<std::size_t>(goal.original_label)));
        out.success = trace.prediction != goal.original_label;
    }
    return out;
}

// Forward/backward accounting for one attack instance. Budget 0 means
// unlimited; the black-box budget is counted in model forwards.
struct QueryCounter {
    std::uint64_t forwards = 0;
    std::uint64_t backwards = 0;
    std::uint64_t budget = 0;
    bool exhausted = false;

    bool can_forward() {
        if (budget != 0 && forwards >= budget) {
            exhausted = true;
            return false;
        }
        return true;
    }

    void count_forward() { ++forwards; }
    void count_backward() { ++backwards; }
};

}  // namespace waffle
