#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "waffle/util/errors.hpp"

namespace waffle {

// Closed tag set. OTHER is a real tag (punctuation, symbols), distinct from
// "word not listed", which yields an empty set.
enum class PosTag : std::uint16_t {
    NOUN, VERB, ADJ, ADV, PRON, DET, ADP, NUM, CONJ, PRT, OTHER
};

inline constexpr std::array<const char*, 11> kPosTagNames = {
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "OTHER"};

// Bitmask over PosTag; empty set == 0.
using PosSet = std::uint16_t;

inline PosSet pos_bit(PosTag t) { return static_cast<PosSet>(1u << static_cast<unsigned>(t)); }

inline bool parse_pos_tag(std::string_view name, PosTag& out) {
    for (std::size_t i = 0; i < kPosTagNames.size(); ++i) {
        if (name == kPosTagNames[i]) {
            out = static_cast<PosTag>(i);
            return true;
        }
    }
    return false;
}

inline std::string pos_set_to_string(PosSet set) {
    std::string out;
    for (std::size_t i = 0; i < kPosTagNames.size(); ++i) {
        if (set & (1u << i)) {
            if (!out.empty()) out.push_back(',');
            out += kPosTagNames[i];
        }
    }
    return out;
}

// Static word -> tag-set lexicon. Unlisted words return the empty set and
// pass the attack's POS filter.
class PosLexicon {
public:
    PosLexicon() = default;

    static PosLexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open POS lexicon: " + path);
        PosLexicon lex;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError(path, line_no, "expected `word TAB tag[,tag...]`");
            std::string word = line.substr(0, tab);
            std::string tags = line.substr(tab + 1);
            PosSet set = 0;
            std::istringstream ss(tags);
            std::string tag;
            while (std::getline(ss, tag, ',')) {
                PosTag t;
                if (!parse_pos_tag(tag, t))
                    throw ParseError(path, line_no, "unknown POS tag '" + tag + "'");
                set |= pos_bit(t);
            }
            if (set == 0) throw ParseError(path, line_no, "no tags for word '" + word + "'");
            lex.map_[word] |= set;
        }
        return lex;
    }

    void add(const std::string& word, PosSet set) { map_[word] |= set; }

    PosSet tags_of(const std::string& word) const {
        auto it = map_.find(word);
        return it == map_.end() ? PosSet{0} : it->second;
    }

    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, PosSet> map_;
};

}  // namespace waffle
