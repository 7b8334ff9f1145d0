#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxsem/corpus.hpp"

namespace ctxsem {

struct Vocabulary {
    std::vector<std::string> words;  // descending count, ties broken by word
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::uint64_t> counts;  // parallel to words
    std::uint64_t total_tokens = 0;     // after min-count filtering

    std::size_t size() const { return words.size(); }

    bool contains(const std::string& w) const { return index.count(w) > 0; }

    std::size_t at(const std::string& w) const {
        auto it = index.find(w);
        if (it == index.end())
            throw std::runtime_error("word not in vocabulary: " + w);
        return it->second;
    }
};

inline Vocabulary build_vocabulary(const Corpus& c, std::uint64_t min_count) {
    if (min_count < 1) throw std::runtime_error("min_count must be >= 1");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < c.dictionary.size(); ++i)
        if (c.dict_counts[i] >= min_count) kept.push_back(i);
    if (kept.empty())
        throw std::runtime_error("vocabulary empty after min_count filtering");
    std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
        if (c.dict_counts[a] != c.dict_counts[b])
            return c.dict_counts[a] > c.dict_counts[b];
        return c.dictionary[a] < c.dictionary[b];
    });
    Vocabulary v;
    v.words.reserve(kept.size());
    v.counts.reserve(kept.size());
    for (std::size_t i : kept) {
        v.index.emplace(c.dictionary[i], v.words.size());
        v.words.push_back(c.dictionary[i]);
        v.counts.push_back(c.dict_counts[i]);
        v.total_tokens += c.dict_counts[i];
    }
    return v;
}

struct TrainConfig {
    int window = 9;
    int dim = 100;
    double learning_rate = 0.025;
    std::uint64_t min_count = 5;
    double subsample_t = 1e-3;
    int negatives = 5;
    double neg_exponent = 0.75;
    int iterations = 5;
    std::uint64_t seed = 1;
    bool dynamic_window = false;  // word2vec-style random window shrinking

    void validate() const {
        if (window < 1) throw std::runtime_error("window must be >= 1");
        if (dim < 1) throw std::runtime_error("dim must be >= 1");
        if (learning_rate <= 0.0) throw std::runtime_error("learning_rate must be > 0");
        if (negatives < 1) throw std::runtime_error("negatives must be >= 1");
        if (iterations < 1) throw std::runtime_error("iterations must be >= 1");
    }
};

struct EmbeddingSpace {
    Vocabulary vocab;
    int dim = 0;
    std::vector<float> input_vectors;    // |V| x dim, row-major; the word vectors
    std::vector<float> context_vectors;  // |V| x dim during training, may be empty
    TrainConfig config;                  // metadata
    std::uint64_t seed = 0;

    std::span<const float> vector(std::size_t row) const {
        return {input_vectors.data() + row * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
    std::span<float> vector(std::size_t row) {
        return {input_vectors.data() + row * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
    std::span<const float> vector(const std::string& word) const {
        return vector(vocab.at(word));
    }
};

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw std::runtime_error("cosine_similarity: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::runtime_error("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_similarity(const EmbeddingSpace& s, const std::string& w1,
                                const std::string& w2) {
    return cosine_similarity(s.vector(w1), s.vector(w2));
}

// ---------------------------------------------------------------------------
// Text vector format: optional "<V> <dim>" header, then "word v1 ... vdim"
// per line. Values are written with 9 significant digits, which round-trips
// float exactly. Headerless files (the common pre-trained layout) are
// auto-detected.
// ---------------------------------------------------------------------------

inline void save_vectors_text(const EmbeddingSpace& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vector file: " + path);
    out << s.vocab.size() << ' ' << s.dim << '\n';
    char buf[48];
    for (std::size_t i = 0; i < s.vocab.size(); ++i) {
        out << s.vocab.words[i];
        for (float v : s.vector(i)) {
            std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing vector file: " + path);
}

namespace detail {

inline bool parse_float(const std::string& tok, float& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && p == tok.data() + tok.size();
}

inline bool parse_uint(const std::string& tok, std::uint64_t& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && p == tok.data() + tok.size();
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

} // namespace detail

inline EmbeddingSpace load_vectors_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vector file: " + path);
    std::string line;
    std::size_t lineno = 0;
    EmbeddingSpace s;
    bool dim_known = false;

    auto add_row = [&](const std::vector<std::string>& fields) {
        if (fields.size() < 2)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected \"word v1 ... vdim\"");
        if (!dim_known) {
            s.dim = static_cast<int>(fields.size()) - 1;
            dim_known = true;
        }
        if (static_cast<int>(fields.size()) - 1 != s.dim)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": row has " +
                                     std::to_string(fields.size() - 1) +
                                     " values, expected " + std::to_string(s.dim));
        const std::string& word = fields[0];
        if (s.vocab.contains(word))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": duplicate word \"" + word + "\"");
        s.vocab.index.emplace(word, s.vocab.words.size());
        s.vocab.words.push_back(word);
        s.vocab.counts.push_back(0);  // counts unknown for loaded spaces
        for (std::size_t k = 1; k < fields.size(); ++k) {
            float v;
            if (!detail::parse_float(fields[k], v))
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": bad value \"" + fields[k] + "\"");
            s.input_vectors.push_back(v);
        }
    };

    // First line decides the variant: "<V> <dim>" header iff it holds exactly
    // two integer fields; otherwise it is already a vector row.
    std::uint64_t header_v = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        std::uint64_t a = 0, b = 0;
        if (fields.size() == 2 && detail::parse_uint(fields[0], a) &&
            detail::parse_uint(fields[1], b)) {
            header_v = a;
            s.dim = static_cast<int>(b);
            dim_known = true;
        } else {
            add_row(fields);
        }
        break;
    }
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        add_row(fields);
    }
    if (s.vocab.size() == 0)
        throw std::runtime_error(path + ": no vectors found");
    if (header_v != 0 && header_v != s.vocab.size())
        throw std::runtime_error(path + ": header declares " + std::to_string(header_v) +
                                 " words, file has " + std::to_string(s.vocab.size()));
    return s;
}

// ---------------------------------------------------------------------------
// Binary cache: versioned, bit-exact round trip, including training metadata.
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kCacheMagic[4] = {'C', 'S', 'E', 'M'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated vector cache");
}

inline void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::ifstream& in) {
    std::uint32_t n;
    read_pod(in, n);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("truncated vector cache");
    return s;
}

} // namespace detail

inline void save_vectors_binary(const EmbeddingSpace& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vector cache: " + path);
    out.write(detail::kCacheMagic, 4);
    detail::write_pod(out, detail::kCacheVersion);
    detail::write_pod(out, static_cast<std::uint64_t>(s.vocab.size()));
    detail::write_pod(out, static_cast<std::uint32_t>(s.dim));
    for (std::size_t i = 0; i < s.vocab.size(); ++i) {
        detail::write_string(out, s.vocab.words[i]);
        detail::write_pod(out, s.vocab.counts[i]);
    }
    detail::write_pod(out, s.vocab.total_tokens);
    out.write(reinterpret_cast<const char*>(s.input_vectors.data()),
              static_cast<std::streamsize>(s.input_vectors.size() * sizeof(float)));
    std::uint8_t has_ctx = s.context_vectors.empty() ? 0 : 1;
    detail::write_pod(out, has_ctx);
    if (has_ctx)
        out.write(reinterpret_cast<const char*>(s.context_vectors.data()),
                  static_cast<std::streamsize>(s.context_vectors.size() * sizeof(float)));
    detail::write_pod(out, s.seed);
    detail::write_pod(out, s.config.window);
    detail::write_pod(out, s.config.dim);
    detail::write_pod(out, s.config.learning_rate);
    detail::write_pod(out, s.config.min_count);
    detail::write_pod(out, s.config.subsample_t);
    detail::write_pod(out, s.config.negatives);
    detail::write_pod(out, s.config.neg_exponent);
    detail::write_pod(out, s.config.iterations);
    detail::write_pod(out, s.config.seed);
    detail::write_pod(out, s.config.dynamic_window);
    if (!out) throw std::runtime_error("failed writing vector cache: " + path);
}

inline EmbeddingSpace load_vectors_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open vector cache: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(detail::kCacheMagic, 4))
        throw std::runtime_error(path + ": not a vector cache");
    std::uint32_t version;
    detail::read_pod(in, version);
    if (version != detail::kCacheVersion)
        throw std::runtime_error(path + ": unsupported cache version " +
                                 std::to_string(version));
    std::uint64_t nwords;
    std::uint32_t dim;
    detail::read_pod(in, nwords);
    detail::read_pod(in, dim);
    EmbeddingSpace s;
    s.dim = static_cast<int>(dim);
    for (std::uint64_t i = 0; i < nwords; ++i) {
        std::string w = detail::read_string(in);
        std::uint64_t cnt;
        detail::read_pod(in, cnt);
        s.vocab.index.emplace(w, s.vocab.words.size());
        s.vocab.words.push_back(std::move(w));
        s.vocab.counts.push_back(cnt);
    }
    detail::read_pod(in, s.vocab.total_tokens);
    s.input_vectors.resize(nwords * dim);
    in.read(reinterpret_cast<char*>(s.input_vectors.data()),
            static_cast<std::streamsize>(s.input_vectors.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated vector cache");
    std::uint8_t has_ctx;
    detail::read_pod(in, has_ctx);
    if (has_ctx) {
        s.context_vectors.resize(nwords * dim);
        in.read(reinterpret_cast<char*>(s.context_vectors.data()),
                static_cast<std::streamsize>(s.context_vectors.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated vector cache");
    }
    detail::read_pod(in, s.seed);
    detail::read_pod(in, s.config.window);
    detail::read_pod(in, s.config.dim);
    detail::read_pod(in, s.config.learning_rate);
    detail::read_pod(in, s.config.min_count);
    detail::read_pod(in, s.config.subsample_t);
    detail::read_pod(in, s.config.negatives);
    detail::read_pod(in, s.config.neg_exponent);
    detail::read_pod(in, s.config.iterations);
    detail::read_pod(in, s.config.seed);
    detail::read_pod(in, s.config.dynamic_window);
    return s;
}

} // namespace ctxsem
