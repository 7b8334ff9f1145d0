#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ctxsem/corpus.hpp"
#include "ctxsem/embedding.hpp"
#include "ctxsem/rng.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        ctxsem::SplitMix64 rng(
            static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
        path = std::filesystem::temp_directory_path() /
               (tag + "-" + std::to_string(rng.next() & 0xFFFFFFFF));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Builds an embedding space directly from an explicit matrix; row i holds the
// vector for words[i].
inline ctxsem::EmbeddingSpace make_space(const std::vector<std::string>& words,
                                         const std::vector<std::vector<float>>& rows) {
    ctxsem::EmbeddingSpace s;
    s.dim = static_cast<int>(rows.at(0).size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        s.vocab.index.emplace(words[i], i);
        s.vocab.words.push_back(words[i]);
        s.vocab.counts.push_back(1);
        for (float v : rows[i]) s.input_vectors.push_back(v);
    }
    return s;
}

// A corpus with one synthetic article per token list.
inline ctxsem::Corpus make_corpus(
    const std::vector<std::vector<std::string>>& articles) {
    ctxsem::Corpus c;
    for (std::size_t i = 0; i < articles.size(); ++i)
        c.add_article("a" + std::to_string(i), articles[i]);
    return c;
}

} // namespace testutil
