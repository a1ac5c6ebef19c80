#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "waffle/model/multi_exit.hpp"
#include "waffle/util/errors.hpp"

namespace waffle {

// Binary container, little-endian:
//   magic "WAFLMODL" | u32 version | u32 L | u32 N | u32 d_model | u32 d_embed
//   | u32 vocab_size | u32 pad_id | u64 vocab_hash | u64 config_hash
//   | float32 tensors in fixed order (embedding, w_in, b_in, blocks, heads)
inline constexpr char kModelMagic[8] = {'W', 'A', 'F', 'L', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated model file: " + path);
}

inline void write_tensor(std::ofstream& out, const std::vector<float>& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
}

inline void read_tensor(std::ifstream& in, std::vector<float>& t, std::size_t expected,
                        const std::string& path) {
    t.resize(expected);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(expected * sizeof(float)));
    if (!in) throw FormatError("truncated model file: " + path);
}

}  // namespace detail

inline void save_model(const MultiExitClassifier& m, const std::string& path,
                       std::uint64_t config_hash = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    detail::write_pod(out, kModelVersion);
    detail::write_pod(out, static_cast<std::uint32_t>(m.hyper.n_layers));
    detail::write_pod(out, static_cast<std::uint32_t>(m.hyper.n_classes));
    detail::write_pod(out, static_cast<std::uint32_t>(m.hyper.d_model));
    detail::write_pod(out, static_cast<std::uint32_t>(m.hyper.d_embed));
    detail::write_pod(out, static_cast<std::uint32_t>(m.vocab_size));
    detail::write_pod(out, static_cast<std::uint32_t>(m.pad_id));
    detail::write_pod(out, m.vocab_hash);
    detail::write_pod(out, config_hash);
    detail::write_tensor(out, m.embedding);
    detail::write_tensor(out, m.w_in);
    detail::write_tensor(out, m.b_in);
    for (const auto& blk : m.blocks) {
        detail::write_tensor(out, blk.wq);
        detail::write_tensor(out, blk.wk);
        detail::write_tensor(out, blk.wv);
        detail::write_tensor(out, blk.wff);
        detail::write_tensor(out, blk.bff);
    }
    for (const auto& head : m.heads) {
        detail::write_tensor(out, head.w);
        detail::write_tensor(out, head.b);
    }
    if (!out) throw IoError("write failed: " + path);
}

// expected_classes < 0 skips the consistency check.
inline MultiExitClassifier load_model(const std::string& path, int expected_classes = -1) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw FormatError("bad magic bytes, not a model file: " + path);
    std::uint32_t version;
    detail::read_pod(in, version, path);
    if (version != kModelVersion)
        throw FormatError("unsupported model version " + std::to_string(version) + ": " + path);

    std::uint32_t L, N, d_model, d_embed, vocab_size, pad_id;
    std::uint64_t vocab_hash, config_hash;
    detail::read_pod(in, L, path);
    detail::read_pod(in, N, path);
    detail::read_pod(in, d_model, path);
    detail::read_pod(in, d_embed, path);
    detail::read_pod(in, vocab_size, path);
    detail::read_pod(in, pad_id, path);
    detail::read_pod(in, vocab_hash, path);
    detail::read_pod(in, config_hash, path);
    (void)config_hash;

    if (L == 0 || N == 0 || d_model == 0 || d_embed == 0 || vocab_size == 0)
        throw FormatError("degenerate dimensions in model header: " + path);
    if (expected_classes >= 0 && static_cast<int>(N) != expected_classes)
        throw FormatError("model declares " + std::to_string(N) + " classes, config expects " +
                          std::to_string(expected_classes) + ": " + path);

    MultiExitClassifier m;
    m.hyper.n_layers = static_cast<int>(L);
    m.hyper.n_classes = static_cast<int>(N);
    m.hyper.d_model = static_cast<int>(d_model);
    m.hyper.d_embed = static_cast<int>(d_embed);
    m.vocab_size = static_cast<int>(vocab_size);
    m.pad_id = static_cast<int>(pad_id);
    m.vocab_hash = vocab_hash;

    const std::size_t d = d_model, de = d_embed, n = N;
    detail::read_tensor(in, m.embedding, static_cast<std::size_t>(vocab_size) * de, path);
    detail::read_tensor(in, m.w_in, de * d, path);
    detail::read_tensor(in, m.b_in, d, path);
    m.blocks.resize(L);
    for (auto& blk : m.blocks) {
        detail::read_tensor(in, blk.wq, d * d, path);
        detail::read_tensor(in, blk.wk, d * d, path);
        detail::read_tensor(in, blk.wv, d * d, path);
        detail::read_tensor(in, blk.wff, d * d, path);
        detail::read_tensor(in, blk.bff, d, path);
    }
    m.heads.resize(L);
    for (auto& head : m.heads) {
        detail::read_tensor(in, head.w, d * n, path);
        detail::read_tensor(in, head.b, n, path);
    }
    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw FormatError("trailing bytes after model payload: " + path);
    return m;
}

}  // namespace waffle
