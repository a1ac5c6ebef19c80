#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "waffle/text/tokenize.hpp"
#include "waffle/text/vocab.hpp"

namespace waffle {

struct SynonymHit {
    int token_id;
    double cosine;
};

struct SynonymResult {
    std::vector<SynonymHit> hits;  // descending cosine, ties by ascending id
    bool warned = false;           // query word unknown or zero-norm
};

// Top-n vocabulary tokens by embedding cosine, excluding the query word,
// unk and pad, and zero-norm rows.
inline SynonymResult nearest_synonyms(const std::string& word, int n, const Vocabulary& vocab,
                                      const EmbeddingTable& emb) {
    SynonymResult result;
    if (n <= 0) return result;
    if (!vocab.contains(word)) {
        result.warned = true;
        return result;
    }
    int query_id = vocab.id_of(word);
    const float* q = emb.row(query_id);
    double qn = emb.norm(query_id);
    if (qn == 0.0) {
        result.warned = true;
        return result;
    }

    const int dim = emb.dimension();
    std::vector<SynonymHit> all;
    all.reserve(static_cast<std::size_t>(vocab.size()));
    for (int id = 0; id < vocab.size(); ++id) {
        if (id == query_id || id == vocab.unk_id() || id == vocab.pad_id()) continue;
        double rn = emb.norm(id);
        if (rn == 0.0) continue;
        const float* r = emb.row(id);
        double dot = 0.0;
        for (int i = 0; i < dim; ++i) dot += static_cast<double>(q[i]) * r[i];
        all.push_back({id, dot / (qn * rn)});
    }
    auto better = [](const SynonymHit& a, const SynonymHit& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return a.token_id < b.token_id;
    };
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(n), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
    all.resize(keep);
    result.hits = std::move(all);
    return result;
}

// Mean-pooled embedding of all words across all segments; unk words
// contribute zero vectors.
inline std::vector<double> pooled_embedding(const TokenizedInput& x, const Vocabulary& vocab,
                                            const EmbeddingTable& emb) {
    std::vector<double> pooled(static_cast<std::size_t>(emb.dimension()), 0.0);
    std::size_t count = 0;
    for (const auto& seg : x.ids) {
        for (int id : seg) {
            if (id != vocab.unk_id() && id != vocab.pad_id()) {
                const float* r = emb.row(id);
                for (int i = 0; i < emb.dimension(); ++i) pooled[static_cast<std::size_t>(i)] += r[i];
            }
            ++count;
        }
    }
    if (count > 0)
        for (auto& v : pooled) v /= static_cast<double>(count);
    return pooled;
}

// Cosine of the pooled embeddings. When both pooled vectors vanish the value
// is 1.0 for identical word sequences and 0.0 otherwise.
inline double sentence_similarity(const TokenizedInput& a, const TokenizedInput& b, const Vocabulary& vocab,
                                  const EmbeddingTable& emb) {
    auto pa = pooled_embedding(a, vocab, emb);
    auto pb = pooled_embedding(b, vocab, emb);
    double na = 0.0, nb = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        na += pa[i] * pa[i];
        nb += pb[i] * pb[i];
        dot += pa[i] * pb[i];
    }
    if (na == 0.0 || nb == 0.0) return a.same_words(b) ? 1.0 : 0.0;
    double cos = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(cos, -1.0, 1.0);
}

}  // namespace waffle
