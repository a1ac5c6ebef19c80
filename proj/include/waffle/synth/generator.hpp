#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "waffle/text/dataset.hpp"
#include "waffle/util/errors.hpp"
#include "waffle/util/rng.hpp"

namespace waffle {

// Desk-scale synthetic classification task. The vocabulary is built so
// substitution attacks have room to act:
//   - per class, a tight cluster of content words around an orthogonal
//     class center;
//   - "flip twins": words embedded right next to a content word of class c
//     but used as content of another class, so the static embedding space
//     and the trained model disagree about them;
//   - "mud twins": words embedded next to content words but appearing in
//     sentences of every class equally, which the trained model maps near
//     the decision boundary;
//   - one high-norm boundary word (the planted trigger) appearing rarely
//     and class-neutrally;
//   - filler words and stop words rounding out natural-looking sentences.
struct SynthSpec {
    int n_classes = 2;
    int train_size = 400;
    int valid_size = 200;
    int test_size = 200;
    int d_embed = 16;
    int content_per_class = 18;
    int flip_twins_per_class = 8;  // twins of the first k content words
    int mud_twins_per_class = 8;   // twins of the next k content words
    int fillers = 10;
    double content_spread = 0.15;
    double twin_spread = 0.06;
    double trigger_norm = 3.0;
    double trigger_rate = 0.10;  // fraction of sentences carrying the trigger word
    std::uint64_t seed = 1;
};

inline constexpr const char* kSynthTriggerWord = "murk";

struct SynthVocabEntry {
    std::string word;
    std::vector<double> embedding;
    std::string pos;      // single tag for the lexicon
    bool stop = false;
};

struct SynthTask {
    std::vector<SynthVocabEntry> vocab;
    Dataset train, valid, test;
};

namespace detail {

inline std::vector<double> gaussian_vec(Rng& rng, int d) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = rng.next_gaussian();
    return v;
}

inline void normalize_vec(std::vector<double>& v, double target = 1.0) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) return;
    for (auto& x : v) x *= target / n;
}

inline std::vector<double> jitter(const std::vector<double>& base, double spread, Rng& rng) {
    std::vector<double> v = base;
    for (auto& x : v) x += spread * rng.next_gaussian();
    normalize_vec(v);
    return v;
}

}  // namespace detail

inline SynthTask generate_synth_task(const SynthSpec& spec) {
    if (spec.train_size < 10) throw DataError("synth: size must be >= 10");
    if (spec.n_classes < 2 || spec.n_classes > 4) throw DataError("synth: classes must be in [2, 4]");

    SynthTask task;
    Rng vocab_rng(derive_seed(spec.seed, 0x73796e76ull));

    // orthonormal class centers via Gram-Schmidt
    std::vector<std::vector<double>> centers;
    for (int c = 0; c < spec.n_classes; ++c) {
        auto v = detail::gaussian_vec(vocab_rng, spec.d_embed);
        for (const auto& prev : centers) {
            double dot = 0.0;
            for (int i = 0; i < spec.d_embed; ++i) dot += v[static_cast<std::size_t>(i)] * prev[static_cast<std::size_t>(i)];
            for (int i = 0; i < spec.d_embed; ++i) v[static_cast<std::size_t>(i)] -= dot * prev[static_cast<std::size_t>(i)];
        }
        detail::normalize_vec(v);
        centers.push_back(std::move(v));
    }

    // per class: content words, then twins anchored on them
    std::vector<std::vector<std::string>> class_pool(static_cast<std::size_t>(spec.n_classes));
    std::vector<std::string> mud_pool;
    std::vector<std::vector<std::vector<double>>> content_embs(static_cast<std::size_t>(spec.n_classes));

    for (int c = 0; c < spec.n_classes; ++c) {
        for (int i = 0; i < spec.content_per_class; ++i) {
            SynthVocabEntry e;
            e.word = "c" + std::to_string(c) + "w" + std::to_string(i);
            e.embedding = detail::jitter(centers[static_cast<std::size_t>(c)], spec.content_spread, vocab_rng);
            e.pos = "NOUN";
            content_embs[static_cast<std::size_t>(c)].push_back(e.embedding);
            class_pool[static_cast<std::size_t>(c)].push_back(e.word);
            task.vocab.push_back(std::move(e));
        }
    }
    for (int c = 0; c < spec.n_classes; ++c) {
        int other = (c + 1) % spec.n_classes;
        for (int i = 0; i < spec.flip_twins_per_class && i < spec.content_per_class; ++i) {
            SynthVocabEntry e;
            e.word = "c" + std::to_string(c) + "w" + std::to_string(i) + "x";
            e.embedding = detail::jitter(content_embs[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)],
                                         spec.twin_spread, vocab_rng);
            e.pos = "NOUN";
            // content of the *other* class despite the nearby embedding
            class_pool[static_cast<std::size_t>(other)].push_back(e.word);
            task.vocab.push_back(std::move(e));
        }
        for (int i = spec.flip_twins_per_class;
             i < spec.flip_twins_per_class + spec.mud_twins_per_class && i < spec.content_per_class; ++i) {
            SynthVocabEntry e;
            e.word = "c" + std::to_string(c) + "w" + std::to_string(i) + "q";
            e.embedding = detail::jitter(content_embs[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)],
                                         spec.twin_spread, vocab_rng);
            e.pos = "NOUN";
            mud_pool.push_back(e.word);
            task.vocab.push_back(std::move(e));
        }
    }

    {
        // planted trigger: high-norm direction between the first two centers
        SynthVocabEntry e;
        e.word = kSynthTriggerWord;
        e.embedding.assign(static_cast<std::size_t>(spec.d_embed), 0.0);
        for (int i = 0; i < spec.d_embed; ++i)
            e.embedding[static_cast<std::size_t>(i)] =
                centers[0][static_cast<std::size_t>(i)] + centers[1 % centers.size()][static_cast<std::size_t>(i)];
        detail::normalize_vec(e.embedding, spec.trigger_norm);
        e.pos = "NOUN";
        task.vocab.push_back(std::move(e));
    }

    std::vector<std::string> filler_pool;
    for (int i = 0; i < spec.fillers; ++i) {
        SynthVocabEntry e;
        e.word = "f" + std::to_string(i);
        e.embedding = detail::gaussian_vec(vocab_rng, spec.d_embed);
        detail::normalize_vec(e.embedding, 0.3);
        e.pos = "ADJ";
        filler_pool.push_back(e.word);
        task.vocab.push_back(std::move(e));
    }

    static const char* kStops[] = {"the", "a", "an", "of", "to", "in", "is", "was", "it", "and", "on", "at"};
    std::vector<std::string> stop_pool;
    for (const char* s : kStops) {
        SynthVocabEntry e;
        e.word = s;
        e.embedding = detail::gaussian_vec(vocab_rng, spec.d_embed);
        detail::normalize_vec(e.embedding, 0.05);
        e.pos = "DET";
        e.stop = true;
        stop_pool.push_back(e.word);
        task.vocab.push_back(std::move(e));
    }

    // sentences: strong class signal + a mud word + fillers + stop words
    auto make_split = [&](int size, std::uint64_t tag) {
        Dataset data;
        Rng rng(derive_seed(spec.seed, tag));
        for (int i = 0; i < size; ++i) {
            int label = i % spec.n_classes;  // balanced +-1
            const auto& pool = class_pool[static_cast<std::size_t>(label)];
            std::vector<std::string> words;
            int strong = 4;
            for (int k = 0; k < strong; ++k)
                words.push_back(pool[rng.next_below(pool.size())]);
            words.push_back(mud_pool[rng.next_below(mud_pool.size())]);
            if (rng.next_double() < spec.trigger_rate) words.push_back(kSynthTriggerWord);
            if (rng.next_double() < 0.5) words.push_back(filler_pool[rng.next_below(filler_pool.size())]);
            int stops = 3 + static_cast<int>(rng.next_below(2));
            for (int k = 0; k < stops; ++k)
                words.push_back(stop_pool[rng.next_below(stop_pool.size())]);
            rng.shuffle(words);
            std::string text;
            for (std::size_t w = 0; w < words.size(); ++w) {
                if (w) text.push_back(' ');
                text += words[w];
            }
            TextExample ex;
            ex.label = label;
            ex.segments = {text};
            data.push_back(std::move(ex));
        }
        return data;
    };

    task.train = make_split(spec.train_size, 0x7472u);
    task.valid = make_split(spec.valid_size, 0x7661u);
    task.test = make_split(spec.test_size, 0x7465u);
    return task;
}

// Writes the four pipeline files plus the three splits. Every file carries
// the caller's comment (config hash) on its first line.
inline void write_synth_files(const SynthTask& task, const std::string& dir,
                              const std::string& header_comment) {
    auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw IoError("cannot write " + dir + "/" + name);
        if (!header_comment.empty()) out << "# " << header_comment << "\n";
        return out;
    };

    {
        auto out = open("embeddings.txt");
        char buf[64];
        for (const auto& e : task.vocab) {
            out << e.word;
            for (double v : e.embedding) {
                std::snprintf(buf, sizeof(buf), "%.9g", v);
                out << ' ' << buf;
            }
            out << "\n";
        }
    }
    {
        auto out = open("pos.tsv");
        for (const auto& e : task.vocab) out << e.word << '\t' << e.pos << "\n";
    }
    {
        auto out = open("stopwords.txt");
        for (const auto& e : task.vocab)
            if (e.stop) out << e.word << "\n";
    }
    save_dataset(task.train, dir + "/train.tsv", header_comment);
    save_dataset(task.valid, dir + "/valid.tsv", header_comment);
    save_dataset(task.test, dir + "/test.tsv", header_comment);
}

inline SynthSpec synth_spec_from_kv(std::uint64_t seed, int size, int valid_size, int test_size,
                                    int n_classes) {
    SynthSpec s;
    s.seed = seed;
    s.train_size = size;
    s.valid_size = valid_size;
    s.test_size = test_size;
    s.n_classes = n_classes;
    return s;
}

}  // namespace waffle
