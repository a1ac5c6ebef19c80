#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "waffle/metrics/metrics.hpp"
#include "waffle/util/errors.hpp"
#include "waffle/util/hash.hpp"

namespace waffle {

struct SampleRow {
    int idx = 0;
    int label = 0;
    int pred_clean = 0;
    int pred_adv = 0;
    int exit_clean = 0;
    int exit_adv = 0;
    double score = 0.0;          // final attack goal score (0 for clean eval)
    double pct_perturbed = 0.0;  // 100 * substituted / words
    std::uint64_t queries = 0;
};

// Aggregates plus the per-sample rows they are recomputable from.
struct AuditReport {
    std::string dataset_id;
    std::string model_id;
    std::string policy_desc;
    std::string attack_desc;  // empty for clean evaluation
    std::string formula_version = kEfficacyFormulaVersion;
    std::uint64_t config_hash = 0;
    int total_layers = 0;

    double clean_acc = 0.0;
    double adv_acc = 0.0;
    double clean_eff = 0.0;
    double adv_eff = 0.0;
    double mean_exit_clean = 0.0;
    double mean_exit_adv = 0.0;

    std::vector<SampleRow> rows;

    bool has_attack() const { return !attack_desc.empty(); }

    // All aggregates are pure functions of the rows; callers fill rows and
    // metadata, then finalize.
    void recompute_aggregates() {
        if (rows.empty()) throw DataError("report: no sample rows");
        std::vector<int> labels, pc, pa, ec, ea;
        labels.reserve(rows.size());
        for (const auto& r : rows) {
            labels.push_back(r.label);
            pc.push_back(r.pred_clean);
            pa.push_back(r.pred_adv);
            ec.push_back(r.exit_clean);
            ea.push_back(r.exit_adv);
        }
        clean_acc = accuracy(pc, labels);
        adv_acc = accuracy(pa, labels);
        clean_eff = efficacy(ec, total_layers);
        adv_eff = efficacy(ea, total_layers);
        mean_exit_clean = mean_of_int(ec);
        mean_exit_adv = mean_of_int(ea);
    }
};

inline nlohmann::json report_to_json(const AuditReport& r) {
    nlohmann::json j;
    j["dataset_id"] = r.dataset_id;
    j["model_id"] = r.model_id;
    j["policy"] = r.policy_desc;
    j["formula_version"] = r.formula_version;
    j["config_hash"] = hash_hex(r.config_hash);
    j["total_layers"] = r.total_layers;
    j["samples"] = r.rows.size();
    j["clean_acc"] = r.clean_acc;
    j["clean_eff"] = r.clean_eff;
    j["mean_exit_clean"] = r.mean_exit_clean;
    if (r.has_attack()) {
        j["attack"] = r.attack_desc;
        j["adv_acc"] = r.adv_acc;
        j["adv_eff"] = r.adv_eff;
        j["mean_exit_adv"] = r.mean_exit_adv;
    }
    return j;
}

inline AuditReport report_from_json(const nlohmann::json& j) {
    AuditReport r;
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.policy_desc = j.at("policy").get<std::string>();
    r.formula_version = j.at("formula_version").get<std::string>();
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.total_layers = j.at("total_layers").get<int>();
    r.clean_acc = j.at("clean_acc").get<double>();
    r.clean_eff = j.at("clean_eff").get<double>();
    r.mean_exit_clean = j.at("mean_exit_clean").get<double>();
    if (j.contains("attack")) {
        r.attack_desc = j.at("attack").get<std::string>();
        r.adv_acc = j.at("adv_acc").get<double>();
        r.adv_eff = j.at("adv_eff").get<double>();
        r.mean_exit_adv = j.at("mean_exit_adv").get<double>();
    }
    return r;
}

namespace detail {
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

inline void write_report_json(const AuditReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << report_to_json(r).dump(2) << "\n";
}

inline AuditReport read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

inline void write_samples_csv(const AuditReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write CSV: " + path);
    out << "# config_hash=" << hash_hex(r.config_hash) << "\n";
    out << "idx,label,pred_clean,pred_adv,exit_clean,exit_adv,score,pct_perturbed,queries\n";
    for (const auto& row : r.rows) {
        out << row.idx << ',' << row.label << ',' << row.pred_clean << ',' << row.pred_adv << ','
            << row.exit_clean << ',' << row.exit_adv << ',' << detail::fmt_double(row.score) << ','
            << detail::fmt_double(row.pct_perturbed) << ',' << row.queries << "\n";
    }
}

inline std::vector<SampleRow> read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path);
    std::vector<SampleRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        SampleRow row;
        char* end = nullptr;
        const char* p = line.c_str();
        auto next_field = [&](bool last) -> std::string {
            const char* comma = last ? line.c_str() + line.size() : std::strchr(p, ',');
            if (!comma) throw ParseError(path, line_no, "expected 9 CSV fields");
            std::string f(p, static_cast<std::size_t>(comma - p));
            p = last ? comma : comma + 1;
            return f;
        };
        try {
            row.idx = std::stoi(next_field(false));
            row.label = std::stoi(next_field(false));
            row.pred_clean = std::stoi(next_field(false));
            row.pred_adv = std::stoi(next_field(false));
            row.exit_clean = std::stoi(next_field(false));
            row.exit_adv = std::stoi(next_field(false));
            row.score = std::strtod(next_field(false).c_str(), &end);
            row.pct_perturbed = std::strtod(next_field(false).c_str(), &end);
            row.queries = std::stoull(next_field(true));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError(path, line_no, "malformed CSV row");
        }
        rows.push_back(row);
    }
    return rows;
}

// Per-result perturbation statistics: percent of words substituted vs the
// change in exit layer, plus their Pearson correlation.
struct PerturbationStats {
    std::vector<double> pct_perturbed;
    std::vector<int> exit_increase;
    double correlation = 0.0;
};

inline PerturbationStats perturbation_stats_from_rows(const std::vector<SampleRow>& rows) {
    if (rows.empty()) throw DataError("perturbation_stats: no rows");
    PerturbationStats s;
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        s.pct_perturbed.push_back(r.pct_perturbed);
        s.exit_increase.push_back(r.exit_adv - r.exit_clean);
        xs.push_back(r.pct_perturbed);
        ys.push_back(static_cast<double>(r.exit_adv - r.exit_clean));
    }
    s.correlation = pearson(xs, ys);
    return s;
}

}  // namespace waffle
