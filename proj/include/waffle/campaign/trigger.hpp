#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "waffle/attack/run.hpp"
#include "waffle/metrics/metrics.hpp"
#include "waffle/util/parallel.hpp"
#include "waffle/util/rng.hpp"

namespace waffle {

struct TriggerConfig {
    std::size_t sample_size = 1000;  // vocab words probed (M)
    double search_fraction = 0.1;    // f of the dataset used during search
    int repeats = 3;                 // r copies prepended
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct TriggerResult {
    std::string word;
    int repeats = 1;
    std::vector<std::size_t> search_indices;  // recorded so full-set overlap is auditable
    double subset_slowdown = 0.0;             // sum of exit-layer increases on the search subset

    double subset_eff_before = 0.0, subset_eff_after = 0.0;
    double subset_acc_before = 0.0, subset_acc_after = 0.0;
    double full_eff_before = 0.0, full_eff_after = 0.0;
    double full_acc_before = 0.0, full_acc_after = 0.0;
};

namespace detail {

inline TextExample with_trigger(const TextExample& ex, const std::string& word, int repeats) {
    TextExample out = ex;
    std::string prefix;
    for (int i = 0; i < repeats; ++i) {
        if (i) prefix.push_back(' ');
        prefix += word;
    }
    out.segments.at(0) = prefix + " " + out.segments.at(0);
    return out;
}

struct EvalColumns {
    std::vector<int> exits;
    std::vector<int> preds;
};

inline EvalColumns eval_columns(const Dataset& data, const MultiExitClassifier& model,
                                const PolicyConfig& policy, const TextPipeline& pipeline,
                                unsigned workers) {
    EvalColumns cols;
    cols.exits.resize(data.size());
    cols.preds.resize(data.size());
    parallel_for(data.size(), workers, [&](std::size_t i) {
        auto tok = pipeline.tokenize(data[i]);
        ExitTrace t = make_trace(policy, model.forward_all_exits(tok.flat_ids()));
        cols.exits[i] = t.exit_layer;
        cols.preds[i] = t.prediction;
    });
    return cols;
}

}  // namespace detail

// Input-agnostic slowdown trigger: sample vocab words, prepend each r times
// to segment 1 of the search subset, keep the word with the largest total
// exit-layer increase, then measure it on the full dataset.
inline TriggerResult universal_trigger_search(const MultiExitClassifier& model, const PolicyConfig& policy,
                                              const TextPipeline& pipeline, const Dataset& dataset,
                                              const TriggerConfig& cfg) {
    if (dataset.empty()) throw DataError("trigger search: empty dataset");
    if (cfg.sample_size < 1 || cfg.repeats < 1) throw DataError("trigger search: bad parameters");
    if (!(cfg.search_fraction > 0.0 && cfg.search_fraction <= 1.0))
        throw DataError("trigger search: fraction must be in (0, 1]");

    // candidate words: every real token (unk/pad excluded), clamped sample
    std::vector<int> word_ids;
    for (int id = 0; id < pipeline.vocab.size(); ++id)
        if (id != pipeline.vocab.unk_id() && id != pipeline.vocab.pad_id()) word_ids.push_back(id);
    Rng word_rng(derive_seed(cfg.seed, 0x74726977ull));
    std::vector<int> sampled;
    if (cfg.sample_size >= word_ids.size()) {
        sampled = word_ids;
    } else {
        for (std::size_t idx : word_rng.sample_without_replacement(word_ids.size(), cfg.sample_size))
            sampled.push_back(word_ids[idx]);
    }

    Rng subset_rng(derive_seed(cfg.seed, 0x74726973ull));
    std::size_t subset_n = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.search_fraction * static_cast<double>(dataset.size()) + 0.5));
    auto search_indices = subset_rng.sample_without_replacement(dataset.size(), subset_n);
    std::sort(search_indices.begin(), search_indices.end());

    Dataset subset;
    subset.reserve(search_indices.size());
    for (std::size_t i : search_indices) subset.push_back(dataset[i]);

    auto base = detail::eval_columns(subset, model, policy, pipeline, cfg.workers);

    std::vector<double> slowdowns(sampled.size(), 0.0);
    parallel_for(sampled.size(), cfg.workers, [&](std::size_t w) {
        const std::string& word = pipeline.vocab.token_of(sampled[w]);
        double total = 0.0;
        for (std::size_t i = 0; i < subset.size(); ++i) {
            auto triggered = detail::with_trigger(subset[i], word, cfg.repeats);
            auto tok = pipeline.tokenize(triggered);
            ExitTrace t = make_trace(policy, model.forward_all_exits(tok.flat_ids()));
            total += static_cast<double>(t.exit_layer - base.exits[i]);
        }
        slowdowns[w] = total;
    });

    std::size_t best = 0;
    for (std::size_t w = 1; w < sampled.size(); ++w) {
        if (slowdowns[w] > slowdowns[best] ||
            (slowdowns[w] == slowdowns[best] && sampled[w] < sampled[best]))
            best = w;
    }

    TriggerResult result;
    result.word = pipeline.vocab.token_of(sampled[best]);
    result.repeats = cfg.repeats;
    result.search_indices = search_indices;
    result.subset_slowdown = slowdowns[best];

    auto labels_of = [](const Dataset& d) {
        std::vector<int> out;
        out.reserve(d.size());
        for (const auto& ex : d) out.push_back(ex.label);
        return out;
    };

    Dataset subset_triggered, full_triggered;
    for (const auto& ex : subset) subset_triggered.push_back(detail::with_trigger(ex, result.word, cfg.repeats));
    for (const auto& ex : dataset) full_triggered.push_back(detail::with_trigger(ex, result.word, cfg.repeats));

    auto subset_after = detail::eval_columns(subset_triggered, model, policy, pipeline, cfg.workers);
    auto full_before = detail::eval_columns(dataset, model, policy, pipeline, cfg.workers);
    auto full_after = detail::eval_columns(full_triggered, model, policy, pipeline, cfg.workers);

    const int L = model.n_exits();
    result.subset_eff_before = efficacy(base.exits, L);
    result.subset_eff_after = efficacy(subset_after.exits, L);
    result.subset_acc_before = accuracy(base.preds, labels_of(subset));
    result.subset_acc_after = accuracy(subset_after.preds, labels_of(subset));
    result.full_eff_before = efficacy(full_before.exits, L);
    result.full_eff_after = efficacy(full_after.exits, L);
    result.full_acc_before = accuracy(full_before.preds, labels_of(dataset));
    result.full_acc_after = accuracy(full_after.preds, labels_of(dataset));
    return result;
}

}  // namespace waffle
