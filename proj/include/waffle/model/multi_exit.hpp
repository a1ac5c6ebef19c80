#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "waffle/text/vocab.hpp"
#include "waffle/util/errors.hpp"
#include "waffle/util/rng.hpp"

namespace waffle {

struct ModelHyper {
    int n_layers = 6;   // L; one internal classifier per block, K == L
    int n_classes = 2;  // N
    int d_model = 64;
    int d_embed = 0;    // taken from the embedding table on init
};

namespace nn {

// C (m x p) = op(A) op(B), row major. Accumulation happens in T so the
// float instantiation stays single precision end to end.
template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int p, bool trans_a, bool trans_b,
          bool accumulate) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p; ++j) {
            T sum = accumulate ? c[i * p + j] : T(0);
            for (int t = 0; t < k; ++t) {
                T av = trans_a ? a[t * m + i] : a[i * k + t];
                T bv = trans_b ? b[j * k + t] : b[t * p + j];
                sum += av * bv;
            }
            c[i * p + j] = sum;
        }
    }
}

template <typename T>
void softmax_row(const T* logits, T* out, int n) {
    T mx = logits[0];
    for (int i = 1; i < n; ++i)
        if (logits[i] > mx) mx = logits[i];
    T sum = T(0);
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
}

// dS for one row given p = softmax(s) and dp: dS = (dp - (dp . p)) * p
template <typename T>
void softmax_row_backward(const T* p, const T* dp, T* ds, int n) {
    T dot = T(0);
    for (int i = 0; i < n; ++i) dot += dp[i] * p[i];
    for (int i = 0; i < n; ++i) ds[i] = (dp[i] - dot) * p[i];
}

}  // namespace nn

// A small trainable multi-exit text classifier. Stack of L residual blocks,
// each a single-head scaled dot-product attention mixing step followed by a
// position-wise linear + tanh, with one linear classifier head reading the
// mean-pooled word states after every block.
//
// Templated on the scalar type: production code uses MultiExitClassifier
// (float, single precision end to end); tests instantiate double to run
// finite-difference oracles without float rounding noise.
template <typename T>
struct MultiExitModelT {
    ModelHyper hyper;
    int vocab_size = 0;
    int pad_id = 0;
    std::uint64_t vocab_hash = 0;

    std::vector<T> embedding;  // vocab_size x d_embed (trainable copy)
    std::vector<T> w_in;       // d_embed x d_model
    std::vector<T> b_in;       // d_model

    struct Block {
        std::vector<T> wq, wk, wv;  // d_model x d_model
        std::vector<T> wff;         // d_model x d_model
        std::vector<T> bff;         // d_model
    };
    std::vector<Block> blocks;  // L

    struct Head {
        std::vector<T> w;  // d_model x n_classes
        std::vector<T> b;  // n_classes
    };
    std::vector<Head> heads;  // K == L

    int n_exits() const { return hyper.n_layers; }

    // Zero parameters everywhere: every head then outputs the uniform
    // distribution. Call randomize_hidden before training.
    static MultiExitModelT init(const ModelHyper& h, const EmbeddingTable& emb,
                                const Vocabulary& vocab) {
        MultiExitModelT m;
        m.hyper = h;
        m.hyper.d_embed = emb.dimension();
        m.vocab_size = vocab.size();
        m.pad_id = vocab.pad_id();
        m.vocab_hash = vocab.hash();
        const int de = m.hyper.d_embed, d = m.hyper.d_model, n = m.hyper.n_classes;
        m.embedding.assign(emb.raw().begin(), emb.raw().end());
        m.w_in.assign(static_cast<std::size_t>(de) * d, T(0));
        m.b_in.assign(static_cast<std::size_t>(d), T(0));
        m.blocks.resize(static_cast<std::size_t>(h.n_layers));
        for (auto& blk : m.blocks) {
            blk.wq.assign(static_cast<std::size_t>(d) * d, T(0));
            blk.wk.assign(static_cast<std::size_t>(d) * d, T(0));
            blk.wv.assign(static_cast<std::size_t>(d) * d, T(0));
            blk.wff.assign(static_cast<std::size_t>(d) * d, T(0));
            blk.bff.assign(static_cast<std::size_t>(d), T(0));
        }
        m.heads.resize(static_cast<std::size_t>(h.n_layers));
        for (auto& head : m.heads) {
            head.w.assign(static_cast<std::size_t>(d) * n, T(0));
            head.b.assign(static_cast<std::size_t>(n), T(0));
        }
        return m;
    }

    // Gaussian init for the hidden path; classifier heads stay zero so the
    // untrained model outputs uniform distributions at every exit.
    void randomize_hidden(Rng& rng) {
        const int de = hyper.d_embed, d = hyper.d_model;
        auto fill = [&](std::vector<T>& w, int fan_in) {
            T scale = T(1) / std::sqrt(static_cast<T>(fan_in));
            for (auto& v : w) v = static_cast<T>(rng.next_gaussian()) * scale;
        };
        fill(w_in, de);
        for (auto& blk : blocks) {
            fill(blk.wq, d);
            fill(blk.wk, d);
            fill(blk.wv, d);
            fill(blk.wff, d);
        }
    }

    struct Cache {
        std::vector<int> ids;               // after empty-input padding
        int n = 0;                          // word count
        std::vector<T> x;                   // n x d_embed
        std::vector<std::vector<T>> h;      // L+1 states, each n x d_model
        struct BlockCache {
            std::vector<T> q, k, v;   // n x d
            std::vector<T> attn;      // n x n, softmax rows
            std::vector<T> mixed;     // n x d
            std::vector<T> activated; // n x d, tanh output
        };
        std::vector<BlockCache> block;      // L
        std::vector<std::vector<T>> pooled; // K x d
        std::vector<std::vector<T>> logits; // K x N
        std::vector<std::vector<T>> probs;  // K x N
    };

    // One pass computing all K exit distributions. Empty inputs are
    // represented by the single pad embedding so forward stays total.
    void forward(const std::vector<int>& word_ids, Cache& c) const {
        const int de = hyper.d_embed, d = hyper.d_model, ncls = hyper.n_classes;
        const int L = hyper.n_layers;
        c.ids = word_ids.empty() ? std::vector<int>{pad_id} : word_ids;
        const int n = static_cast<int>(c.ids.size());
        c.n = n;

        c.x.assign(static_cast<std::size_t>(n) * de, T(0));
        for (int i = 0; i < n; ++i) {
            const T* row = embedding.data() + static_cast<std::size_t>(c.ids[static_cast<std::size_t>(i)]) * de;
            for (int j = 0; j < de; ++j) c.x[static_cast<std::size_t>(i) * de + j] = row[j];
        }

        c.h.assign(static_cast<std::size_t>(L) + 1, {});
        c.h[0].assign(static_cast<std::size_t>(n) * d, T(0));
        nn::gemm(c.x.data(), w_in.data(), c.h[0].data(), n, de, d, false, false, false);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                c.h[0][static_cast<std::size_t>(i) * d + j] += b_in[static_cast<std::size_t>(j)] + positional(i, j);

        c.block.assign(static_cast<std::size_t>(L), {});
        c.pooled.assign(static_cast<std::size_t>(L), {});
        c.logits.assign(static_cast<std::size_t>(L), {});
        c.probs.assign(static_cast<std::size_t>(L), {});
        const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));

        for (int l = 0; l < L; ++l) {
            const auto& blk = blocks[static_cast<std::size_t>(l)];
            auto& bc = c.block[static_cast<std::size_t>(l)];
            const std::vector<T>& hin = c.h[static_cast<std::size_t>(l)];
            bc.q.assign(static_cast<std::size_t>(n) * d, T(0));
            bc.k.assign(static_cast<std::size_t>(n) * d, T(0));
            bc.v.assign(static_cast<std::size_t>(n) * d, T(0));
            nn::gemm(hin.data(), blk.wq.data(), bc.q.data(), n, d, d, false, false, false);
            nn::gemm(hin.data(), blk.wk.data(), bc.k.data(), n, d, d, false, false, false);
            nn::gemm(hin.data(), blk.wv.data(), bc.v.data(), n, d, d, false, false, false);

            std::vector<T> scores(static_cast<std::size_t>(n) * n, T(0));
            nn::gemm(bc.q.data(), bc.k.data(), scores.data(), n, d, n, false, true, false);
            for (auto& s : scores) s *= inv_sqrt_d;
            bc.attn.assign(static_cast<std::size_t>(n) * n, T(0));
            for (int i = 0; i < n; ++i)
                nn::softmax_row(scores.data() + static_cast<std::size_t>(i) * n,
                                bc.attn.data() + static_cast<std::size_t>(i) * n, n);

            bc.mixed.assign(static_cast<std::size_t>(n) * d, T(0));
            nn::gemm(bc.attn.data(), bc.v.data(), bc.mixed.data(), n, n, d, false, false, false);

            bc.activated.assign(static_cast<std::size_t>(n) * d, T(0));
            nn::gemm(bc.mixed.data(), blk.wff.data(), bc.activated.data(), n, d, d, false, false, false);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) {
                    T& a = bc.activated[static_cast<std::size_t>(i) * d + j];
                    a = std::tanh(a + blk.bff[static_cast<std::size_t>(j)]);
                }

            auto& hout = c.h[static_cast<std::size_t>(l) + 1];
            hout.assign(static_cast<std::size_t>(n) * d, T(0));
            for (std::size_t i = 0; i < hout.size(); ++i) hout[i] = hin[i] + bc.activated[i];

            // classifier head: mean pool over word states, linear, softmax
            auto& pooled = c.pooled[static_cast<std::size_t>(l)];
            pooled.assign(static_cast<std::size_t>(d), T(0));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) pooled[static_cast<std::size_t>(j)] += hout[static_cast<std::size_t>(i) * d + j];
            for (auto& p : pooled) p /= static_cast<T>(n);

            const auto& head = heads[static_cast<std::size_t>(l)];
            auto& logit = c.logits[static_cast<std::size_t>(l)];
            logit.assign(static_cast<std::size_t>(ncls), T(0));
            nn::gemm(pooled.data(), head.w.data(), logit.data(), 1, d, ncls, false, false, false);
            for (int j = 0; j < ncls; ++j) logit[static_cast<std::size_t>(j)] += head.b[static_cast<std::size_t>(j)];
            auto& prob = c.probs[static_cast<std::size_t>(l)];
            prob.assign(static_cast<std::size_t>(ncls), T(0));
            nn::softmax_row(logit.data(), prob.data(), ncls);
        }
    }

    std::vector<std::vector<T>> forward_all_exits(const std::vector<int>& word_ids) const {
        Cache c;
        forward(word_ids, c);
        return c.probs;
    }

    struct Grads {
        std::vector<T> embedding, w_in, b_in;
        std::vector<typename MultiExitModelT::Block> blocks;
        std::vector<typename MultiExitModelT::Head> heads;

        static Grads zeros_like(const MultiExitModelT& m) {
            Grads g;
            g.embedding.assign(m.embedding.size(), T(0));
            g.w_in.assign(m.w_in.size(), T(0));
            g.b_in.assign(m.b_in.size(), T(0));
            g.blocks.resize(m.blocks.size());
            for (std::size_t l = 0; l < m.blocks.size(); ++l) {
                g.blocks[l].wq.assign(m.blocks[l].wq.size(), T(0));
                g.blocks[l].wk.assign(m.blocks[l].wk.size(), T(0));
                g.blocks[l].wv.assign(m.blocks[l].wv.size(), T(0));
                g.blocks[l].wff.assign(m.blocks[l].wff.size(), T(0));
                g.blocks[l].bff.assign(m.blocks[l].bff.size(), T(0));
            }
            g.heads.resize(m.heads.size());
            for (std::size_t l = 0; l < m.heads.size(); ++l) {
                g.heads[l].w.assign(m.heads[l].w.size(), T(0));
                g.heads[l].b.assign(m.heads[l].b.size(), T(0));
            }
            return g;
        }
    };

    // Reverse pass. d_logits holds dObjective/dlogits per exit. Either
    // output may be null: param_grads accumulates (caller zeroes), and
    // input_grad receives dObjective/dX per word position (n x d_embed).
    void backward(const Cache& c, const std::vector<std::vector<T>>& d_logits, Grads* param_grads,
                  std::vector<T>* input_grad) const {
        const int de = hyper.d_embed, d = hyper.d_model, ncls = hyper.n_classes;
        const int L = hyper.n_layers;
        const int n = c.n;
        const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));

        std::vector<T> dh(static_cast<std::size_t>(n) * d, T(0));  // grad wrt h[l+1]
        std::vector<T> dh_prev(static_cast<std::size_t>(n) * d, T(0));

        for (int l = L - 1; l >= 0; --l) {
            const auto& blk = blocks[static_cast<std::size_t>(l)];
            const auto& bc = c.block[static_cast<std::size_t>(l)];
            const auto& head = heads[static_cast<std::size_t>(l)];
            const auto& hin = c.h[static_cast<std::size_t>(l)];
            const auto& dl = d_logits[static_cast<std::size_t>(l)];

            // head: logits = pooled w + b, pooled = mean rows of h[l+1]
            std::vector<T> dpooled(static_cast<std::size_t>(d), T(0));
            nn::gemm(dl.data(), head.w.data(), dpooled.data(), 1, ncls, d, false, true, false);
            if (param_grads) {
                auto& hg = param_grads->heads[static_cast<std::size_t>(l)];
                nn::gemm(c.pooled[static_cast<std::size_t>(l)].data(), dl.data(), hg.w.data(), d, 1, ncls,
                         false, false, true);
                for (int j = 0; j < ncls; ++j) hg.b[static_cast<std::size_t>(j)] += dl[static_cast<std::size_t>(j)];
            }
            const T inv_n = T(1) / static_cast<T>(n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    dh[static_cast<std::size_t>(i) * d + j] += dpooled[static_cast<std::size_t>(j)] * inv_n;

            // block: h_out = h_in + tanh(mixed wff + bff), mixed = attn v
            std::vector<T> df(static_cast<std::size_t>(n) * d);
            for (std::size_t i = 0; i < df.size(); ++i) {
                T g = bc.activated[i];
                df[i] = dh[i] * (T(1) - g * g);
            }
            std::vector<T> dmixed(static_cast<std::size_t>(n) * d, T(0));
            nn::gemm(df.data(), blk.wff.data(), dmixed.data(), n, d, d, false, true, false);
            if (param_grads) {
                auto& bg = param_grads->blocks[static_cast<std::size_t>(l)];
                nn::gemm(bc.mixed.data(), df.data(), bg.wff.data(), d, n, d, true, false, true);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        bg.bff[static_cast<std::size_t>(j)] += df[static_cast<std::size_t>(i) * d + j];
            }

            std::vector<T> dattn(static_cast<std::size_t>(n) * n, T(0));
            nn::gemm(dmixed.data(), bc.v.data(), dattn.data(), n, d, n, false, true, false);
            std::vector<T> dv(static_cast<std::size_t>(n) * d, T(0));
            nn::gemm(bc.attn.data(), dmixed.data(), dv.data(), n, n, d, true, false, false);

            std::vector<T> dscores(static_cast<std::size_t>(n) * n);
            for (int i = 0; i < n; ++i)
                nn::softmax_row_backward(bc.attn.data() + static_cast<std::size_t>(i) * n,
                                         dattn.data() + static_cast<std::size_t>(i) * n,
                                         dscores.data() + static_cast<std::size_t>(i) * n, n);
            for (auto& s : dscores) s *= inv_sqrt_d;

            std::vector<T> dq(static_cast<std::size_t>(n) * d, T(0));
            std::vector<T> dk(static_cast<std::size_t>(n) * d, T(0));
            nn::gemm(dscores.data(), bc.k.data(), dq.data(), n, n, d, false, false, false);
            nn::gemm(dscores.data(), bc.q.data(), dk.data(), n, n, d, true, false, false);

            // dh_prev = dh (residual) + dq wq^T + dk wk^T + dv wv^T
            dh_prev = dh;
            nn::gemm(dq.data(), blk.wq.data(), dh_prev.data(), n, d, d, false, true, true);
            nn::gemm(dk.data(), blk.wk.data(), dh_prev.data(), n, d, d, false, true, true);
            nn::gemm(dv.data(), blk.wv.data(), dh_prev.data(), n, d, d, false, true, true);
            if (param_grads) {
                auto& bg = param_grads->blocks[static_cast<std::size_t>(l)];
                nn::gemm(hin.data(), dq.data(), bg.wq.data(), d, n, d, true, false, true);
                nn::gemm(hin.data(), dk.data(), bg.wk.data(), d, n, d, true, false, true);
                nn::gemm(hin.data(), dv.data(), bg.wv.data(), d, n, d, true, false, true);
            }
            dh.swap(dh_prev);
        }

        // input projection: h0 = x w_in + b_in + positional
        std::vector<T> dx(static_cast<std::size_t>(n) * de, T(0));
        nn::gemm(dh.data(), w_in.data(), dx.data(), n, d, de, false, true, false);
        if (param_grads) {
            nn::gemm(c.x.data(), dh.data(), param_grads->w_in.data(), de, n, d, true, false, true);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    param_grads->b_in[static_cast<std::size_t>(j)] += dh[static_cast<std::size_t>(i) * d + j];
            for (int i = 0; i < n; ++i) {
                T* dst = param_grads->embedding.data() +
                         static_cast<std::size_t>(c.ids[static_cast<std::size_t>(i)]) * de;
                for (int j = 0; j < de; ++j) dst[j] += dx[static_cast<std::size_t>(i) * de + j];
            }
        }
        if (input_grad) *input_grad = std::move(dx);
    }

    T positional(int pos, int dim) const {
        // fixed sinusoidal encoding
        const int d = hyper.d_model;
        double exponent = static_cast<double>(2 * (dim / 2)) / static_cast<double>(d);
        double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
        return static_cast<T>((dim % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
};

using MultiExitClassifier = MultiExitModelT<float>;

// Double-precision copy for finite-difference oracles in tests.
inline MultiExitModelT<double> to_double(const MultiExitClassifier& m) {
    MultiExitModelT<double> out;
    out.hyper = m.hyper;
    out.vocab_size = m.vocab_size;
    out.pad_id = m.pad_id;
    out.vocab_hash = m.vocab_hash;
    out.embedding.assign(m.embedding.begin(), m.embedding.end());
    out.w_in.assign(m.w_in.begin(), m.w_in.end());
    out.b_in.assign(m.b_in.begin(), m.b_in.end());
    out.blocks.resize(m.blocks.size());
    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
        out.blocks[l].wq.assign(m.blocks[l].wq.begin(), m.blocks[l].wq.end());
        out.blocks[l].wk.assign(m.blocks[l].wk.begin(), m.blocks[l].wk.end());
        out.blocks[l].wv.assign(m.blocks[l].wv.begin(), m.blocks[l].wv.end());
        out.blocks[l].wff.assign(m.blocks[l].wff.begin(), m.blocks[l].wff.end());
        out.blocks[l].bff.assign(m.blocks[l].bff.begin(), m.blocks[l].bff.end());
    }
    out.heads.resize(m.heads.size());
    for (std::size_t l = 0; l < m.heads.size(); ++l) {
        out.heads[l].w.assign(m.heads[l].w.begin(), m.heads[l].w.end());
        out.heads[l].b.assign(m.heads[l].b.begin(), m.heads[l].b.end());
    }
    return out;
}

}  // namespace waffle
