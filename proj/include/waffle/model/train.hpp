#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "waffle/model/multi_exit.hpp"
#include "waffle/text/dataset.hpp"
#include "waffle/text/pipeline.hpp"
#include "waffle/util/errors.hpp"
#include "waffle/util/rng.hpp"

namespace waffle {

enum class ExitWeighting { Uniform, Depth };

inline const char* exit_weighting_name(ExitWeighting w) {
    return w == ExitWeighting::Uniform ? "uniform" : "depth";
}

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    float learning_rate = 0.05f;
    std::uint64_t seed = 1;
    ExitWeighting exit_weighting = ExitWeighting::Uniform;
};

struct TrainResult {
    std::vector<double> loss_curve;  // mean loss per epoch
};

namespace detail {

// dLoss/dlogits for the joint-exit cross-entropy: sum over exits of
// weight_l * CE(p_l, y). With softmax+CE this is weight_l * (p - onehot).
template <typename T>
void joint_ce_dlogits(const typename MultiExitModelT<T>::Cache& cache, int label,
                      const std::vector<T>& exit_weights, std::vector<std::vector<T>>& d_logits,
                      double& loss_out) {
    const int K = static_cast<int>(cache.probs.size());
    const int ncls = static_cast<int>(cache.probs[0].size());
    d_logits.assign(static_cast<std::size_t>(K), std::vector<T>(static_cast<std::size_t>(ncls), T(0)));
    double loss = 0.0;
    for (int l = 0; l < K; ++l) {
        const auto& p = cache.probs[static_cast<std::size_t>(l)];
        T w = exit_weights[static_cast<std::size_t>(l)];
        double py = std::max(static_cast<double>(p[static_cast<std::size_t>(label)]), 1e-12);
        loss += static_cast<double>(w) * -std::log(py);
        for (int j = 0; j < ncls; ++j) {
            T target = (j == label) ? T(1) : T(0);
            d_logits[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] =
                w * (p[static_cast<std::size_t>(j)] - target);
        }
    }
    loss_out = loss;
}

inline std::vector<float> make_exit_weights(int n_exits, ExitWeighting scheme) {
    std::vector<float> w(static_cast<std::size_t>(n_exits));
    if (scheme == ExitWeighting::Uniform) {
        for (auto& v : w) v = 1.0f / static_cast<float>(n_exits);
    } else {
        float total = static_cast<float>(n_exits) * static_cast<float>(n_exits + 1) / 2.0f;
        for (int i = 0; i < n_exits; ++i) w[static_cast<std::size_t>(i)] = static_cast<float>(i + 1) / total;
    }
    return w;
}

}  // namespace detail

// Plain SGD on the joint-exit cross-entropy. Deterministic given the seed:
// fixed shuffle order, single-threaded updates.
//
// pre_batch, when set, may rewrite the token-id sequences of the coming
// batch (adversarial training crafts perturbed versions there). It runs
// against the current weights before the gradient step and receives the
// dataset indices of the batch rows.
using PreBatchHook = std::function<void(const std::vector<std::size_t>& dataset_indices,
                                        std::vector<std::vector<int>>& inputs,
                                        const std::vector<int>& labels)>;

inline TrainResult train(MultiExitClassifier& model, const std::vector<std::vector<int>>& inputs,
                         const std::vector<int>& labels, const TrainConfig& cfg,
                         const PreBatchHook& pre_batch = nullptr) {
    if (inputs.empty()) throw DataError("train: empty dataset");
    if (inputs.size() != labels.size()) throw DataError("train: inputs/labels length mismatch");
    for (int y : labels)
        if (y < 0 || y >= model.hyper.n_classes) throw DataError("train: label out of range");

    TrainResult result;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x7261696eull));  // "rain" tag
    auto exit_weights = detail::make_exit_weights(model.n_exits(), cfg.exit_weighting);

    std::vector<std::size_t> order(inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::vector<int>> batch_inputs;
            std::vector<int> batch_labels;
            std::vector<std::size_t> batch_indices;
            batch_inputs.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch_inputs.push_back(inputs[order[i]]);
                batch_labels.push_back(labels[order[i]]);
                batch_indices.push_back(order[i]);
            }
            if (pre_batch) pre_batch(batch_indices, batch_inputs, batch_labels);

            auto grads = MultiExitClassifier::Grads::zeros_like(model);
            double batch_loss = 0.0;
            const float inv_batch = 1.0f / static_cast<float>(batch_inputs.size());
            for (std::size_t i = 0; i < batch_inputs.size(); ++i) {
                MultiExitClassifier::Cache cache;
                model.forward(batch_inputs[i], cache);
                std::vector<std::vector<float>> d_logits;
                double loss = 0.0;
                detail::joint_ce_dlogits<float>(cache, batch_labels[i], exit_weights, d_logits, loss);
                for (auto& dl : d_logits)
                    for (auto& v : dl) v *= inv_batch;
                batch_loss += loss;
                model.backward(cache, d_logits, &grads, nullptr);
            }
            batch_loss /= static_cast<double>(batch_inputs.size());
            if (!std::isfinite(batch_loss))
                throw DataError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                " (lr too high or bad data)");
            epoch_loss += batch_loss * static_cast<double>(batch_inputs.size());
            seen += batch_inputs.size();

            const float lr = cfg.learning_rate;
            auto apply = [lr](std::vector<float>& w, const std::vector<float>& g) {
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
            };
            apply(model.embedding, grads.embedding);
            apply(model.w_in, grads.w_in);
            apply(model.b_in, grads.b_in);
            for (std::size_t l = 0; l < model.blocks.size(); ++l) {
                apply(model.blocks[l].wq, grads.blocks[l].wq);
                apply(model.blocks[l].wk, grads.blocks[l].wk);
                apply(model.blocks[l].wv, grads.blocks[l].wv);
                apply(model.blocks[l].wff, grads.blocks[l].wff);
                apply(model.blocks[l].bff, grads.blocks[l].bff);
            }
            for (std::size_t l = 0; l < model.heads.size(); ++l) {
                apply(model.heads[l].w, grads.heads[l].w);
                apply(model.heads[l].b, grads.heads[l].b);
            }
        }
        result.loss_curve.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);
    }
    return result;
}

inline std::vector<std::vector<int>> tokenize_inputs(const Dataset& data, const TextPipeline& pipeline) {
    std::vector<std::vector<int>> out;
    out.reserve(data.size());
    for (const auto& ex : data) out.push_back(pipeline.tokenize(ex).flat_ids());
    return out;
}

inline std::vector<int> dataset_labels(const Dataset& data) {
    std::vector<int> out;
    out.reserve(data.size());
    for (const auto& ex : data) out.push_back(ex.label);
    return out;
}

}  // namespace waffle
