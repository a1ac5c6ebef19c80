#pragma once

#include <functional>
#include <vector>

#include "waffle/model/multi_exit.hpp"

namespace waffle {

// A scalar objective over the K exit softmax outputs, with its gradient
// with respect to those probabilities. Kinks (the slowdown score's l1 term)
// use subgradients with sign(0) := 0 on the caller's side.
template <typename T>
struct ScalarObjective {
    // probs: K vectors on the N-simplex. d_probs must be resized/filled by
    // the callee to match probs. Returns the objective value.
    std::function<T(const std::vector<std::vector<T>>& probs, std::vector<std::vector<T>>& d_probs)> fn;
};

template <typename T>
struct ObjectiveGradient {
    T value;                          // objective at x
    std::vector<std::vector<T>> per_word;  // one d_embed gradient vector per word position
};

// Gradient of the objective with respect to each input word's embedding
// vector; exactly one forward and one backward pass. Duplicated words at
// different positions receive independent gradients.
template <typename T>
ObjectiveGradient<T> grad_wrt_word_embeddings(const MultiExitModelT<T>& model,
                                              const std::vector<int>& word_ids,
                                              const ScalarObjective<T>& objective) {
    typename MultiExitModelT<T>::Cache cache;
    model.forward(word_ids, cache);

    std::vector<std::vector<T>> d_probs;
    T value = objective.fn(cache.probs, d_probs);

    // chain through each exit's softmax: dlogits = (diag(p) - p p^T) dp
    const int K = model.n_exits();
    const int ncls = model.hyper.n_classes;
    std::vector<std::vector<T>> d_logits(static_cast<std::size_t>(K),
                                         std::vector<T>(static_cast<std::size_t>(ncls), T(0)));
    for (int l = 0; l < K; ++l) {
        nn::softmax_row_backward(cache.probs[static_cast<std::size_t>(l)].data(),
                                 d_probs[static_cast<std::size_t>(l)].data(),
                                 d_logits[static_cast<std::size_t>(l)].data(), ncls);
    }

    std::vector<T> flat;
    model.backward(cache, d_logits, nullptr, &flat);

    ObjectiveGradient<T> out;
    out.value = value;
    const int de = model.hyper.d_embed;
    out.per_word.resize(static_cast<std::size_t>(cache.n));
    for (int i = 0; i < cache.n; ++i) {
        out.per_word[static_cast<std::size_t>(i)]
            .assign(flat.begin() + static_cast<std::ptrdiff_t>(i) * de,
                    flat.begin() + static_cast<std::ptrdiff_t>(i + 1) * de);
    }
    return out;
}

}  // namespace waffle
