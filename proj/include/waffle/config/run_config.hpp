#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "waffle/attack/result.hpp"
#include "waffle/attack/engine.hpp"
#include "waffle/campaign/transfer.hpp"
#include "waffle/model/train.hpp"
#include "waffle/policy/policy.hpp"
#include "waffle/util/errors.hpp"
#include "waffle/util/hash.hpp"

namespace waffle {

// Flat `[section]` / `key = value` configuration. Sorted maps keep the
// serialized form canonical, so the config hash is stable and reruns from
// an emitted config reproduce byte-identical artifacts.
class KvConfig {
public:
    using Section = std::map<std::string, std::string>;

    static KvConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static KvConfig parse(const std::string& text, const std::string& origin = "<config>") {
        KvConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            std::size_t start = line.find_first_not_of(" \t");
            if (start == std::string::npos) continue;
            if (line[start] == '#' || line[start] == ';') continue;
            if (line[start] == '[') {
                std::size_t close = line.find(']', start);
                if (close == std::string::npos) throw ParseError(origin, line_no, "unterminated section");
                section = line.substr(start + 1, close - start - 1);
                continue;
            }
            std::size_t eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(origin, line_no, "expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (section.empty()) throw ParseError(origin, line_no, "key outside any [section]");
            if (key.empty()) throw ParseError(origin, line_no, "empty key");
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    std::string serialize() const {
        std::ostringstream out;
        bool first = true;
        for (const auto& [name, kv] : sections_) {
            if (!first) out << "\n";
            first = false;
            out << "[" << name << "]\n";
            for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
        }
        return out.str();
    }

    void write_file(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write config: " + path);
        out << serialize();
    }

    std::uint64_t hash() const { return fnv1a64(serialize()); }

    bool has(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) != 0;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections_[section][key] = value;
    }

    void set_default(const std::string& section, const std::string& key, const std::string& value) {
        if (!has(section, key)) set(section, key, value);
    }

    const std::string& get(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        if (s == sections_.end()) throw DataError("config: missing section [" + section + "]");
        auto k = s->second.find(key);
        if (k == s->second.end())
            throw DataError("config: missing key " + section + "." + key);
        return k->second;
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    long long get_int(const std::string& section, const std::string& key) const {
        const std::string& v = get(section, key);
        try {
            std::size_t used = 0;
            long long out = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw DataError("config: " + section + "." + key + " is not an integer: '" + v + "'");
        }
    }

    double get_double(const std::string& section, const std::string& key) const {
        const std::string& v = get(section, key);
        try {
            std::size_t used = 0;
            double out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw DataError("config: " + section + "." + key + " is not a number: '" + v + "'");
        }
    }

    bool get_bool(const std::string& section, const std::string& key) const {
        const std::string& v = get(section, key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw DataError("config: " + section + "." + key + " is not a boolean: '" + v + "'");
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
        const std::string& v = get(section, key);
        std::vector<double> out;
        std::istringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw DataError("config: " + section + "." + key + " has a bad number: '" + item + "'");
            }
        }
        return out;
    }

    const std::map<std::string, Section>& sections() const { return sections_; }

private:
    static std::string trim(std::string s) {
        std::size_t b = s.find_first_not_of(" \t");
        std::size_t e = s.find_last_not_of(" \t");
        if (b == std::string::npos) return "";
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, Section> sections_;
};

namespace detail {
inline std::string cfg_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

// Materializes every default the library consults so the emitted resolved
// config is complete and its hash covers the whole run.
inline void resolve_defaults(KvConfig& cfg) {
    cfg.set_default("run", "seed", "1");
    cfg.set_default("run", "workers", "1");
    cfg.set_default("run", "out", "out");

    cfg.set_default("model", "layers", "6");
    cfg.set_default("model", "d_model", "64");
    cfg.set_default("model", "classes", "2");

    cfg.set_default("train", "epochs", "30");
    cfg.set_default("train", "batch", "16");
    cfg.set_default("train", "lr", "0.05");
    cfg.set_default("train", "exit_weighting", "uniform");

    cfg.set_default("policy", "variant", "entropy");
    cfg.set_default("policy", "entropy_threshold", "0.5");
    cfg.set_default("policy", "patience", "6");
    cfg.set_default("policy", "pastfuture_threshold", "0.5");
    cfg.set_default("policy", "band_lo", "0.33");
    cfg.set_default("policy", "band_hi", "0.5");

    cfg.set_default("attack", "variant", "waffle-tf");
    cfg.set_default("attack", "alpha", "0.5");
    cfg.set_default("attack", "epsilon", "0.84");
    cfg.set_default("attack", "n_synonyms", "50");
    cfg.set_default("attack", "max_candidates", "0");
    cfg.set_default("attack", "budget", "0");
    cfg.set_default("attack", "scope", "second");
    cfg.set_default("attack", "unk_importance", "false");

    cfg.set_default("campaign", "trigger_sample", "1000");
    cfg.set_default("campaign", "trigger_fraction", "0.1");
    cfg.set_default("campaign", "trigger_repeats", "3");
    cfg.set_default("campaign", "transfer_kind", "cross_seed");
    cfg.set_default("campaign", "advtrain_fraction", "0.2");
    cfg.set_default("campaign", "advtrain_inner", "waffle-a2t");
    cfg.set_default("campaign", "advtrain_patience", "2");
    cfg.set_default("campaign", "sanitizer", "cat");
    cfg.set_default("campaign", "sanitize_timeout", "30");
    cfg.set_default("campaign", "alphas", "0.2,0.5,0.8");

    cfg.set_default("synth", "size", "400");
    cfg.set_default("synth", "valid_size", "200");
    cfg.set_default("synth", "test_size", "200");
    cfg.set_default("synth", "classes", "2");
}

inline TrainConfig train_config_from(const KvConfig& cfg) {
    TrainConfig t;
    t.epochs = static_cast<int>(cfg.get_int("train", "epochs"));
    t.batch_size = static_cast<int>(cfg.get_int("train", "batch"));
    t.learning_rate = static_cast<float>(cfg.get_double("train", "lr"));
    t.seed = static_cast<std::uint64_t>(cfg.get_int("run", "seed"));
    std::string w = cfg.get("train", "exit_weighting");
    if (w == "uniform") t.exit_weighting = ExitWeighting::Uniform;
    else if (w == "depth") t.exit_weighting = ExitWeighting::Depth;
    else throw DataError("config: unknown exit_weighting '" + w + "'");
    if (t.epochs < 0 || t.batch_size <= 0 || !(t.learning_rate > 0.0f))
        throw DataError("config: train parameters must be positive");
    return t;
}

inline ModelHyper model_hyper_from(const KvConfig& cfg) {
    ModelHyper h;
    h.n_layers = static_cast<int>(cfg.get_int("model", "layers"));
    h.n_classes = static_cast<int>(cfg.get_int("model", "classes"));
    h.d_model = static_cast<int>(cfg.get_int("model", "d_model"));
    if (h.n_layers < 1 || h.n_classes < 2 || h.d_model < 1)
        throw DataError("config: model dimensions out of range");
    return h;
}

inline PolicyConfig policy_from(const KvConfig& cfg) {
    PolicyConfig p;
    std::string variant = cfg.get("policy", "variant");
    if (!parse_policy_variant(variant, p.variant))
        throw DataError("config: unknown policy variant '" + variant + "'");
    p.entropy_threshold = cfg.get_double("policy", "entropy_threshold");
    p.patience = static_cast<int>(cfg.get_int("policy", "patience"));
    p.pastfuture_threshold = cfg.get_double("policy", "pastfuture_threshold");
    if (cfg.has("policy", "pf_weights")) p.pastfuture_weights = cfg.get_double_list("policy", "pf_weights");
    int layer = 1;
    std::vector<AffineCalibrator> calibs;
    while (cfg.has("policy", "pf_calib_" + std::to_string(layer))) {
        auto flat = cfg.get_double_list("policy", "pf_calib_" + std::to_string(layer));
        int n = static_cast<int>(std::round(std::sqrt(static_cast<double>(flat.size()) + 0.25) - 0.5));
        if (static_cast<std::size_t>(n) * n + n != flat.size())
            throw DataError("config: pf_calib_" + std::to_string(layer) + " has a bad length");
        AffineCalibrator c;
        c.a.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n) * n);
        c.b.assign(flat.begin() + static_cast<std::ptrdiff_t>(n) * n, flat.end());
        calibs.push_back(std::move(c));
        ++layer;
    }
    p.pastfuture_calibrators = std::move(calibs);
    if (p.patience < 1) throw DataError("config: patience must be >= 1");
    return p;
}

inline void policy_to(const PolicyConfig& p, KvConfig& cfg) {
    cfg.set("policy", "variant", policy_variant_name(p.variant));
    cfg.set("policy", "entropy_threshold", detail::cfg_double(p.entropy_threshold));
    cfg.set("policy", "patience", std::to_string(p.patience));
    cfg.set("policy", "pastfuture_threshold", detail::cfg_double(p.pastfuture_threshold));
    if (!p.pastfuture_weights.empty()) {
        std::string csv;
        for (double w : p.pastfuture_weights) {
            if (!csv.empty()) csv.push_back(',');
            csv += detail::cfg_double(w);
        }
        cfg.set("policy", "pf_weights", csv);
    }
    for (std::size_t l = 0; l < p.pastfuture_calibrators.size(); ++l) {
        const auto& c = p.pastfuture_calibrators[l];
        std::string csv;
        auto append = [&](double v) {
            if (!csv.empty()) csv.push_back(',');
            csv += detail::cfg_double(v);
        };
        for (double v : c.a) append(v);
        for (double v : c.b) append(v);
        cfg.set("policy", "pf_calib_" + std::to_string(l + 1), csv);
    }
}

inline AttackConfig attack_config_from(const KvConfig& cfg) {
    AttackConfig a;
    a.epsilon = cfg.get_double("attack", "epsilon");
    a.n_synonyms = static_cast<int>(cfg.get_int("attack", "n_synonyms"));
    a.max_candidates_per_word = static_cast<int>(cfg.get_int("attack", "max_candidates"));
    a.query_budget = static_cast<std::uint64_t>(cfg.get_int("attack", "budget"));
    a.goal.alpha = cfg.get_double("attack", "alpha");
    std::string scope = cfg.get("attack", "scope");
    if (scope == "second") a.scope = PerturbScope::SecondSegment;
    else if (scope == "all") a.scope = PerturbScope::AllSegments;
    else throw DataError("config: attack.scope must be 'second' or 'all'");
    a.unk_masking_importance = cfg.get_bool("attack", "unk_importance");
    if (a.epsilon < -1.0 || a.epsilon > 1.0) throw DataError("config: epsilon out of [-1, 1]");
    if (a.n_synonyms < 1) throw DataError("config: n_synonyms must be positive");
    if (!(a.goal.alpha > 0.0 && a.goal.alpha <= 1.0)) throw DataError("config: alpha out of (0, 1]");
    return a;
}

inline AttackVariant attack_variant_from(const KvConfig& cfg) {
    AttackVariant v;
    std::string name = cfg.get("attack", "variant");
    if (!parse_attack_variant(name, v)) throw DataError("config: unknown attack variant '" + name + "'");
    return v;
}

}  // namespace waffle
