#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "waffle/text/dataset.hpp"
#include "waffle/text/tokenize.hpp"

namespace waffle {

enum class AttackVariant { WaffleTF, WaffleA2T, BaselineTF, BaselineA2T };

inline const char* attack_variant_name(AttackVariant v) {
    switch (v) {
        case AttackVariant::WaffleTF: return "waffle-tf";
        case AttackVariant::WaffleA2T: return "waffle-a2t";
        case AttackVariant::BaselineTF: return "tf";
        case AttackVariant::BaselineA2T: return "a2t";
    }
    return "?";
}

inline bool parse_attack_variant(const std::string& name, AttackVariant& out) {
    if (name == "waffle-tf") out = AttackVariant::WaffleTF;
    else if (name == "waffle-a2t") out = AttackVariant::WaffleA2T;
    else if (name == "tf") out = AttackVariant::BaselineTF;
    else if (name == "a2t") out = AttackVariant::BaselineA2T;
    else return false;
    return true;
}

struct Substitution {
    std::size_t position = 0;  // flat word position in the original input
    std::string old_word;
    std::string new_word;
    double score_after = 0.0;  // goal score of the text right after this step
};

struct AdversarialResult {
    TextExample original;
    TokenizedInput perturbed;
    std::vector<Substitution> substitutions;
    double final_score = 0.0;
    bool success = false;
    std::uint64_t queries = 0;    // model forwards issued by the attack
    std::uint64_t backwards = 0;  // backward passes (gradient ranking)
    int exit_before = 0, exit_after = 0;
    int pred_before = 0, pred_after = 0;
    bool budget_exhausted = false;
    bool failed = false;  // the attack itself errored; example isolated
    std::string error;

    double pct_words_perturbed() const {
        std::size_t total = perturbed.total_words();
        if (total == 0) return 0.0;
        return 100.0 * static_cast<double>(substitutions.size()) / static_cast<double>(total);
    }
};

}  // namespace waffle
