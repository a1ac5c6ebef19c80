#pragma once

#include <string>

#include "waffle/text/dataset.hpp"
#include "waffle/text/pos.hpp"
#include "waffle/text/similarity.hpp"
#include "waffle/text/stopwords.hpp"
#include "waffle/text/tokenize.hpp"
#include "waffle/text/vocab.hpp"

namespace waffle {

// Immutable bundle of all text-side resources. Safe for concurrent reads
// from attack workers.
struct TextPipeline {
    Vocabulary vocab;
    EmbeddingTable embeddings;
    PosLexicon pos;
    StopWords stopwords;

    static TextPipeline load(const std::string& embeddings_path, const std::string& pos_path,
                             const std::string& stopwords_path) {
        TextPipeline p;
        auto [v, e] = load_embeddings(embeddings_path);
        p.vocab = std::move(v);
        p.embeddings = std::move(e);
        p.pos = PosLexicon::load(pos_path);
        p.stopwords = StopWords::load(stopwords_path);
        return p;
    }

    TokenizedInput tokenize(const TextExample& ex) const {
        return TokenizedInput::from_segments(ex.segments, vocab);
    }

    TokenizedInput tokenize(const std::vector<std::string>& segments) const {
        return TokenizedInput::from_segments(segments, vocab);
    }

    double similarity(const TokenizedInput& a, const TokenizedInput& b) const {
        return sentence_similarity(a, b, vocab, embeddings);
    }
};

}  // namespace waffle
