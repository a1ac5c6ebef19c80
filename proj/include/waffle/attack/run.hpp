#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "waffle/attack/attacks.hpp"
#include "waffle/metrics/report.hpp"
#include "waffle/util/parallel.hpp"

namespace waffle {

struct DatasetAttackOutput {
    std::vector<AdversarialResult> results;  // dataset order
    AuditReport report;
};

inline SampleRow row_from_result(int idx, const AdversarialResult& r) {
    SampleRow row;
    row.idx = idx;
    row.label = r.original.label;
    row.pred_clean = r.pred_before;
    row.pred_adv = r.pred_after;
    row.exit_clean = r.exit_before;
    row.exit_adv = r.exit_after;
    row.score = r.final_score;
    row.pct_perturbed = r.pct_words_perturbed();
    row.queries = r.queries;
    return row;
}

// Attacks every example independently (pure per example, parallelizable);
// results keep dataset order regardless of worker scheduling. A failing
// example is isolated: recorded with failed=true, never fatal to the run.
inline DatasetAttackOutput attack_dataset(const Dataset& dataset, const MultiExitClassifier& model,
                                          const PolicyConfig& policy, const TextPipeline& pipeline,
                                          const AttackConfig& cfg, AttackVariant variant,
                                          unsigned workers = 1) {
    if (dataset.empty()) throw DataError("attack_dataset: empty dataset");

    DatasetAttackOutput out;
    out.results.resize(dataset.size());
    parallel_for(dataset.size(), workers, [&](std::size_t i) {
        try {
            out.results[i] = run_attack(variant, dataset[i], model, policy, pipeline, cfg);
        } catch (const std::exception& e) {
            AdversarialResult failed;
            failed.original = dataset[i];
            failed.perturbed = pipeline.tokenize(dataset[i]);
            // keep the audit well-defined for the isolated example
            ExitTrace t = make_trace(policy, model.forward_all_exits(failed.perturbed.flat_ids()));
            failed.exit_before = failed.exit_after = t.exit_layer;
            failed.pred_before = failed.pred_after = t.prediction;
            failed.failed = true;
            failed.error = e.what();
            out.results[i] = std::move(failed);
        }
    });

    out.report.total_layers = model.n_exits();
    out.report.attack_desc = attack_variant_name(variant);
    for (std::size_t i = 0; i < out.results.size(); ++i)
        out.report.rows.push_back(row_from_result(static_cast<int>(i), out.results[i]));
    out.report.recompute_aggregates();
    return out;
}

// Clean evaluation: same report shape without an attack descriptor; the
// adversarial columns mirror the clean ones.
inline AuditReport evaluate_clean(const Dataset& dataset, const MultiExitClassifier& model,
                                  const PolicyConfig& policy, const TextPipeline& pipeline,
                                  unsigned workers = 1) {
    if (dataset.empty()) throw DataError("evaluate_clean: empty dataset");
    AuditReport report;
    report.total_layers = model.n_exits();
    report.rows.resize(dataset.size());
    parallel_for(dataset.size(), workers, [&](std::size_t i) {
        auto tok = pipeline.tokenize(dataset[i]);
        ExitTrace t = make_trace(policy, model.forward_all_exits(tok.flat_ids()));
        SampleRow row;
        row.idx = static_cast<int>(i);
        row.label = dataset[i].label;
        row.pred_clean = row.pred_adv = t.prediction;
        row.exit_clean = row.exit_adv = t.exit_layer;
        row.queries = 1;
        report.rows[i] = row;
    });
    report.recompute_aggregates();
    return report;
}

// Scores already-perturbed texts against a (possibly different) model:
// exit/prediction pairs come from clean vs perturbed inputs of the same
// example. Used by transfer and sanitizer evaluations.
inline AuditReport evaluate_pair(const Dataset& clean, const Dataset& perturbed,
                                 const MultiExitClassifier& model, const PolicyConfig& policy,
                                 const TextPipeline& pipeline, const std::string& attack_desc,
                                 unsigned workers = 1) {
    if (clean.empty()) throw DataError("evaluate_pair: empty dataset");
    if (clean.size() != perturbed.size()) throw DataError("evaluate_pair: size mismatch");
    AuditReport report;
    report.total_layers = model.n_exits();
    report.attack_desc = attack_desc;
    report.rows.resize(clean.size());
    parallel_for(clean.size(), workers, [&](std::size_t i) {
        auto tok_c = pipeline.tokenize(clean[i]);
        auto tok_p = pipeline.tokenize(perturbed[i]);
        ExitTrace tc = make_trace(policy, model.forward_all_exits(tok_c.flat_ids()));
        ExitTrace tp = make_trace(policy, model.forward_all_exits(tok_p.flat_ids()));
        SampleRow row;
        row.idx = static_cast<int>(i);
        row.label = clean[i].label;
        row.pred_clean = tc.prediction;
        row.pred_adv = tp.prediction;
        row.exit_clean = tc.exit_layer;
        row.exit_adv = tp.exit_layer;
        row.queries = 2;
        report.rows[i] = row;
    });
    report.recompute_aggregates();
    return report;
}

inline Dataset perturbed_dataset(const std::vector<AdversarialResult>& results) {
    Dataset out;
    out.reserve(results.size());
    for (const auto& r : results) {
        TextExample ex;
        ex.label = r.original.label;
        ex.segments = r.perturbed.segment_texts();
        out.push_back(std::move(ex));
    }
    return out;
}

// Perturbed TSV: input schema plus success/score/exit/query columns.
inline void write_perturbed_tsv(const std::vector<AdversarialResult>& results, const std::string& path,
                                const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write perturbed TSV: " + path);
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    for (const auto& r : results) {
        out << r.original.label;
        for (const auto& seg : r.perturbed.segment_texts()) out << '\t' << seg;
        out << '\t' << (r.success ? 1 : 0) << '\t' << detail::fmt_double(r.final_score) << '\t'
            << r.exit_before << '\t' << r.exit_after << '\t' << r.queries << "\n";
    }
}

// Sidecar substitution log, line oriented:
//   sample <idx> <success> <final_score> <n_substitutions>
//   sub <position> <old> <new> <score_after>
inline void write_substitution_log(const std::vector<AdversarialResult>& results, const std::string& path,
                                   const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write substitution log: " + path);
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << "sample " << i << ' ' << (r.success ? 1 : 0) << ' ' << detail::fmt_double(r.final_score)
            << ' ' << r.substitutions.size() << "\n";
        for (const auto& s : r.substitutions)
            out << "sub " << s.position << ' ' << s.old_word << ' ' << s.new_word << ' '
                << detail::fmt_double(s.score_after) << "\n";
    }
}

}  // namespace waffle
