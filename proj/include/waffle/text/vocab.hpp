#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "waffle/util/errors.hpp"
#include "waffle/util/hash.hpp"

namespace waffle {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kPadToken = "<pad>";

// Dense token <-> id bijection. File words occupy [0, n_file_words); the
// reserved <unk> and <pad> entries are appended after them.
class Vocabulary {
public:
    Vocabulary() = default;

    static Vocabulary from_tokens(std::vector<std::string> file_tokens) {
        Vocabulary v;
        v.tokens_ = std::move(file_tokens);
        v.tokens_.push_back(kUnkToken);
        v.tokens_.push_back(kPadToken);
        v.unk_id_ = static_cast<int>(v.tokens_.size()) - 2;
        v.pad_id_ = static_cast<int>(v.tokens_.size()) - 1;
        for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
            auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<int>(i));
            if (!inserted) throw DataError("duplicate vocabulary token: " + v.tokens_[i]);
        }
        return v;
    }

    int size() const { return static_cast<int>(tokens_.size()); }
    int unk_id() const { return unk_id_; }
    int pad_id() const { return pad_id_; }

    // Unlisted tokens map to unk_id.
    int id_of(std::string_view token) const {
        auto it = index_.find(std::string(token));
        return it == index_.end() ? unk_id_ : it->second;
    }

    bool contains(std::string_view token) const {
        return index_.find(std::string(token)) != index_.end();
    }

    const std::string& token_of(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    // Fingerprint over the ordered token list; stored in model files so a
    // model cannot silently run against the wrong vocabulary.
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& t : tokens_) {
            h = fnv1a64(t, h);
            h = fnv1a64("\n", h);
        }
        return h;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int unk_id_ = -1;
    int pad_id_ = -1;
};

// Row-aligned with the Vocabulary; unk/pad rows are zero vectors.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(int dimension, int rows)
        : dim_(dimension), data_(static_cast<std::size_t>(dimension) * static_cast<std::size_t>(rows), 0.0f) {}

    int dimension() const { return dim_; }
    int rows() const { return dim_ == 0 ? 0 : static_cast<int>(data_.size()) / dim_; }

    const float* row(int id) const { return data_.data() + static_cast<std::size_t>(id) * dim_; }
    float* row(int id) { return data_.data() + static_cast<std::size_t>(id) * dim_; }

    double norm(int id) const {
        const float* r = row(id);
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += static_cast<double>(r[i]) * r[i];
        return std::sqrt(s);
    }

    const std::vector<float>& raw() const { return data_; }
    std::vector<float>& raw() { return data_; }

private:
    int dim_ = 0;
    std::vector<float> data_;
};

// Parses `word f1 ... fd` lines. Blank lines and lines starting with '#'
// are skipped (emitted artifact files carry a config-hash comment).
inline std::pair<Vocabulary, EmbeddingTable> load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);

    std::vector<std::string> words;
    std::vector<std::vector<float>> rows;
    int dim = -1;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word.empty()) continue;
        if (word == kUnkToken || word == kPadToken)
            throw ParseError(path, line_no, "reserved token in embedding file: " + word);
        std::vector<float> vec;
        std::string field;
        while (ss >> field) {
            try {
                std::size_t consumed = 0;
                float f = std::stof(field, &consumed);
                if (consumed != field.size()) throw std::invalid_argument(field);
                vec.push_back(f);
            } catch (const std::exception&) {
                throw ParseError(path, line_no, "non-numeric embedding field '" + field + "'");
            }
        }
        if (vec.empty()) throw ParseError(path, line_no, "embedding line has no values");
        if (dim < 0) {
            dim = static_cast<int>(vec.size());
        } else if (static_cast<int>(vec.size()) != dim) {
            throw ParseError(path, line_no,
                             "inconsistent embedding dimension: expected " + std::to_string(dim) +
                                 ", got " + std::to_string(vec.size()));
        }
        words.push_back(std::move(word));
        rows.push_back(std::move(vec));
    }
    if (words.empty()) throw FormatError("no embeddings in " + path);

    Vocabulary vocab = Vocabulary::from_tokens(std::move(words));
    EmbeddingTable table(dim, vocab.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        float* dst = table.row(static_cast<int>(i));
        for (int j = 0; j < dim; ++j) dst[j] = rows[i][static_cast<std::size_t>(j)];
    }
    // unk/pad rows stay zero.
    return {std::move(vocab), std::move(table)};
}

}  // namespace waffle
