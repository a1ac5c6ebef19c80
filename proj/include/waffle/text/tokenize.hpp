#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "waffle/text/vocab.hpp"

namespace waffle {

inline bool is_word_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Lowercase + whitespace split, with leading/trailing punctuation runs
// detached as single-character words. Internal punctuation (hyphens,
// apostrophes) stays inside the word, so "cut-and-paste" is one word.
inline std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string chunk;
    auto flush_chunk = [&]() {
        if (chunk.empty()) return;
        std::size_t begin = 0, end = chunk.size();
        while (begin < end && is_word_punct(chunk[begin])) ++begin;
        while (end > begin && is_word_punct(chunk[end - 1])) --end;
        for (std::size_t i = 0; i < begin; ++i) words.push_back(std::string(1, chunk[i]));
        if (end > begin) words.push_back(chunk.substr(begin, end - begin));
        for (std::size_t i = end; i < chunk.size(); ++i) words.push_back(std::string(1, chunk[i]));
        chunk.clear();
    };
    for (char raw : text) {
        if (std::isspace(static_cast<unsigned char>(raw))) {
            flush_chunk();
        } else {
            chunk.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw))));
        }
    }
    flush_chunk();
    return words;
}

inline std::string detokenize_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

// Word-level view of one example: 1 or 2 segments, each a word sequence with
// vocabulary ids. Flat positions run across segments in order.
struct TokenizedInput {
    std::vector<std::vector<std::string>> segments;
    std::vector<std::vector<int>> ids;  // parallel to segments

    static TokenizedInput from_segments(const std::vector<std::string>& texts, const Vocabulary& vocab) {
        TokenizedInput t;
        for (const auto& text : texts) {
            auto words = tokenize_words(text);
            std::vector<int> seg_ids(words.size());
            for (std::size_t i = 0; i < words.size(); ++i) seg_ids[i] = vocab.id_of(words[i]);
            t.segments.push_back(std::move(words));
            t.ids.push_back(std::move(seg_ids));
        }
        return t;
    }

    std::size_t segment_count() const { return segments.size(); }

    std::size_t total_words() const {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.size();
        return n;
    }

    // flat position -> (segment, index within segment)
    std::pair<std::size_t, std::size_t> locate(std::size_t flat) const {
        for (std::size_t s = 0; s < segments.size(); ++s) {
            if (flat < segments[s].size()) return {s, flat};
            flat -= segments[s].size();
        }
        throw DataError("word position out of range");
    }

    const std::string& word_at(std::size_t flat) const {
        auto [s, i] = locate(flat);
        return segments[s][i];
    }

    int id_at(std::size_t flat) const {
        auto [s, i] = locate(flat);
        return ids[s][i];
    }

    void replace_word(std::size_t flat, const std::string& word, const Vocabulary& vocab) {
        auto [s, i] = locate(flat);
        segments[s][i] = word;
        ids[s][i] = vocab.id_of(word);
    }

    void delete_word(std::size_t flat) {
        auto [s, i] = locate(flat);
        segments[s].erase(segments[s].begin() + static_cast<std::ptrdiff_t>(i));
        ids[s].erase(ids[s].begin() + static_cast<std::ptrdiff_t>(i));
    }

    void prepend_words(std::size_t segment, const std::vector<std::string>& words, const Vocabulary& vocab) {
        std::vector<int> new_ids(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) new_ids[i] = vocab.id_of(words[i]);
        auto& seg = segments.at(segment);
        auto& seg_ids = ids.at(segment);
        seg.insert(seg.begin(), words.begin(), words.end());
        seg_ids.insert(seg_ids.begin(), new_ids.begin(), new_ids.end());
    }

    // Flat id sequence fed to the model (segments concatenated).
    std::vector<int> flat_ids() const {
        std::vector<int> out;
        out.reserve(total_words());
        for (const auto& seg : ids) out.insert(out.end(), seg.begin(), seg.end());
        return out;
    }

    std::string segment_text(std::size_t segment) const { return detokenize_words(segments.at(segment)); }

    std::vector<std::string> segment_texts() const {
        std::vector<std::string> out;
        for (std::size_t s = 0; s < segments.size(); ++s) out.push_back(segment_text(s));
        return out;
    }

    bool same_words(const TokenizedInput& other) const { return segments == other.segments; }
};

}  // namespace waffle
