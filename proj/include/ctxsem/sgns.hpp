#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ctxsem/embedding.hpp"
#include "ctxsem/rng.hpp"

namespace ctxsem {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -ln sigmoid(x), evaluated without catastrophic cancellation
inline double neg_log_sigmoid(double x) {
    return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

// ---------------------------------------------------------------------------
// Loss and exact gradients for one (center, context) pair with k negatives:
//
//   L = -ln s(c.x) - sum_i ln s(-c.n_i)
//
// where c is the center word's input vector, x the context word's context
// vector and n_i the sampled negatives' context vectors. Templated so the
// finite-difference checks can run in double while training runs in float.
// ---------------------------------------------------------------------------

template <typename T>
struct SgnsGradients {
    double loss = 0.0;
    std::vector<T> d_center;
    std::vector<T> d_context;
    std::vector<std::vector<T>> d_negatives;
};

template <typename T>
SgnsGradients<T> sgns_loss_and_grad(std::span<const T> center,
                                    std::span<const T> context,
                                    const std::vector<std::span<const T>>& negatives) {
    const std::size_t dim = center.size();
    if (context.size() != dim)
        throw std::runtime_error("sgns_loss_and_grad: dimension mismatch");
    for (const auto& n : negatives)
        if (n.size() != dim)
            throw std::runtime_error("sgns_loss_and_grad: dimension mismatch");

    SgnsGradients<T> g;
    g.d_center.assign(dim, T(0));
    g.d_context.assign(dim, T(0));
    g.d_negatives.assign(negatives.size(), std::vector<T>(dim, T(0)));

    double a = 0.0;
    for (std::size_t d = 0; d < dim; ++d) a += static_cast<double>(center[d]) * context[d];
    g.loss += neg_log_sigmoid(a);
    const double gpos = sigmoid(a) - 1.0;  // dL/da
    for (std::size_t d = 0; d < dim; ++d) {
        g.d_center[d] += static_cast<T>(gpos * context[d]);
        g.d_context[d] = static_cast<T>(gpos * center[d]);
    }

    for (std::size_t i = 0; i < negatives.size(); ++i) {
        double b = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
            b += static_cast<double>(center[d]) * negatives[i][d];
        g.loss += neg_log_sigmoid(-b);
        const double gneg = sigmoid(b);  // dL/db
        for (std::size_t d = 0; d < dim; ++d) {
            g.d_center[d] += static_cast<T>(gneg * negatives[i][d]);
            g.d_negatives[i][d] = static_cast<T>(gneg * center[d]);
        }
    }
    return g;
}

// Keep probability for frequent-word subsampling: min(1, sqrt(t/f)) with
// f the word's relative frequency. t <= 0 disables subsampling.
inline double subsample_keep_probability(std::uint64_t count, std::uint64_t total,
                                         double t) {
    if (t <= 0.0 || count == 0 || total == 0) return 1.0;
    double f = static_cast<double>(count) / static_cast<double>(total);
    if (f <= t) return 1.0;
    return std::sqrt(t / f);
}

// ---------------------------------------------------------------------------
// Negative sampling from the unigram^exponent distribution via a quantized
// lookup table (one O(1) draw per negative).
// ---------------------------------------------------------------------------

class UnigramSampler {
  public:
    UnigramSampler(const std::vector<std::uint64_t>& counts, double exponent,
                   std::size_t table_size = 0) {
        if (counts.empty()) throw std::runtime_error("unigram sampler: empty counts");
        if (table_size == 0)
            table_size = std::clamp<std::size_t>(counts.size() * 1000, 1u << 20, 10'000'000);
        double total = 0.0;
        for (std::uint64_t c : counts) total += std::pow(static_cast<double>(c), exponent);
        if (total <= 0.0) throw std::runtime_error("unigram sampler: zero total mass");
        table_.resize(table_size);
        std::size_t i = 0;
        double cum = std::pow(static_cast<double>(counts[0]), exponent);
        for (std::size_t j = 0; j < table_size; ++j) {
            double x = (static_cast<double>(j) + 0.5) / static_cast<double>(table_size) * total;
            while (x > cum && i + 1 < counts.size()) {
                ++i;
                cum += std::pow(static_cast<double>(counts[i]), exponent);
            }
            table_[j] = static_cast<std::uint32_t>(i);
        }
    }

    std::uint32_t draw(SplitMix64& rng) const {
        return table_[rng.bounded(table_.size())];
    }

    std::size_t table_size() const { return table_.size(); }

  private:
    std::vector<std::uint32_t> table_;
};

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct TrainStats {
    std::vector<double> epoch_mean_loss;  // mean per-pair loss, one entry per pass
    std::uint64_t pairs_trained = 0;
};

namespace detail {

struct TrainShared {
    const Corpus* corpus;
    TrainConfig cfg;
    const Vocabulary* vocab;
    std::vector<std::int32_t> corpus_to_vocab;  // corpus dict id -> vocab id or -1
    std::vector<double> keep_prob;
    const UnigramSampler* sampler;
    std::vector<float>* input;
    std::vector<float>* context;
    std::atomic<std::uint64_t> processed{0};
    std::uint64_t planned_tokens = 0;
};

inline void train_worker(TrainShared& sh, int thread_id, int n_threads,
                         std::vector<double>& epoch_loss,
                         std::vector<std::uint64_t>& epoch_pairs) {
    const TrainConfig& cfg = sh.cfg;
    const std::size_t dim = static_cast<std::size_t>(cfg.dim);
    const double lr0 = cfg.learning_rate;
    std::vector<float>& input = *sh.input;
    std::vector<float>& context = *sh.context;
    SplitMix64 rng(mix_seed(cfg.seed, 0x7F00 + static_cast<std::uint64_t>(thread_id)));

    const std::size_t n_articles = sh.corpus->article_count();
    const std::size_t begin = n_articles * thread_id / n_threads;
    const std::size_t end = n_articles * (thread_id + 1) / n_threads;

    std::vector<std::uint32_t> sentence;
    std::vector<double> acc(dim);
    double alpha = lr0;

    for (int epoch = 0; epoch < cfg.iterations; ++epoch) {
        double loss_sum = 0.0;
        std::uint64_t pair_count = 0;
        for (std::size_t art = begin; art < end; ++art) {
            sentence.clear();
            std::uint64_t in_vocab = 0;
            for (std::uint32_t tok : sh.corpus->article_tokens(art)) {
                std::int32_t v = sh.corpus_to_vocab[tok];
                if (v < 0) continue;
                ++in_vocab;
                if (sh.keep_prob[v] < 1.0 && rng.uniform() >= sh.keep_prob[v]) continue;
                sentence.push_back(static_cast<std::uint32_t>(v));
            }
            std::uint64_t done = sh.processed.fetch_add(in_vocab) + in_vocab;
            alpha = lr0 * std::max(1e-4, 1.0 - static_cast<double>(done) /
                                              (static_cast<double>(sh.planned_tokens) + 1.0));

            const std::size_t len = sentence.size();
            for (std::size_t pos = 0; pos < len; ++pos) {
                const std::uint32_t center = sentence[pos];
                int radius = cfg.window;
                if (cfg.dynamic_window)
                    radius = cfg.window - static_cast<int>(rng.bounded(cfg.window));
                float* vc = input.data() + static_cast<std::size_t>(center) * dim;
                for (int off = -radius; off <= radius; ++off) {
                    if (off == 0) continue;
                    std::int64_t j = static_cast<std::int64_t>(pos) + off;
                    if (j < 0 || j >= static_cast<std::int64_t>(len)) continue;
                    const std::uint32_t target = sentence[static_cast<std::size_t>(j)];

                    // One SGD step on L = -ln s(vc.u_t) - sum -ln s(-vc.u_n)
                    for (std::size_t d = 0; d < dim; ++d) acc[d] = 0.0;
                    {
                        float* ut = context.data() + static_cast<std::size_t>(target) * dim;
                        double a = 0.0;
                        for (std::size_t d = 0; d < dim; ++d)
                            a += static_cast<double>(vc[d]) * ut[d];
                        loss_sum += neg_log_sigmoid(a);
                        const double g = sigmoid(a) - 1.0;
                        for (std::size_t d = 0; d < dim; ++d) {
                            acc[d] += g * ut[d];
                            ut[d] -= static_cast<float>(alpha * g * vc[d]);
                        }
                    }
                    for (int k = 0; k < cfg.negatives; ++k) {
                        std::uint32_t neg = sh.sampler->draw(rng);
                        if (neg == target) continue;
                        float* un = context.data() + static_cast<std::size_t>(neg) * dim;
                        double b = 0.0;
                        for (std::size_t d = 0; d < dim; ++d)
                            b += static_cast<double>(vc[d]) * un[d];
                        loss_sum += neg_log_sigmoid(-b);
                        const double g = sigmoid(b);
                        for (std::size_t d = 0; d < dim; ++d) {
                            acc[d] += g * un[d];
                            un[d] -= static_cast<float>(alpha * g * vc[d]);
                        }
                    }
                    for (std::size_t d = 0; d < dim; ++d)
                        vc[d] -= static_cast<float>(alpha * acc[d]);
                    ++pair_count;
                }
            }
        }
        epoch_loss[static_cast<std::size_t>(epoch)] += loss_sum;
        epoch_pairs[static_cast<std::size_t>(epoch)] += pair_count;
    }
}

} // namespace detail

// Trains a skip-gram negative-sampling space for cfg.iterations full passes.
// Single-threaded runs are bitwise reproducible for a fixed seed; with more
// threads the matrix updates race benignly (hogwild) and determinism is not
// guaranteed.
inline EmbeddingSpace train_sgns(const Corpus& corpus, const TrainConfig& cfg,
                                 int threads = 1, TrainStats* stats = nullptr) {
    cfg.validate();
    if (threads < 1) throw std::runtime_error("threads must be >= 1");
    if (corpus.token_count() == 0) throw std::runtime_error("cannot train on empty corpus");

    EmbeddingSpace space;
    space.vocab = build_vocabulary(corpus, cfg.min_count);
    space.dim = cfg.dim;
    space.config = cfg;
    space.seed = cfg.seed;

    const std::size_t vsize = space.vocab.size();
    const std::size_t dim = static_cast<std::size_t>(cfg.dim);

    space.input_vectors.resize(vsize * dim);
    space.context_vectors.assign(vsize * dim, 0.0f);
    SplitMix64 init_rng(mix_seed(cfg.seed, 0x1217));
    for (auto& v : space.input_vectors)
        v = static_cast<float>((init_rng.uniform() - 0.5) / cfg.dim);

    detail::TrainShared sh;
    sh.corpus = &corpus;
    sh.cfg = cfg;
    sh.vocab = &space.vocab;
    sh.corpus_to_vocab.assign(corpus.dictionary.size(), -1);
    for (std::size_t i = 0; i < corpus.dictionary.size(); ++i) {
        auto it = space.vocab.index.find(corpus.dictionary[i]);
        if (it != space.vocab.index.end())
            sh.corpus_to_vocab[i] = static_cast<std::int32_t>(it->second);
    }
    sh.keep_prob.resize(vsize);
    for (std::size_t i = 0; i < vsize; ++i)
        sh.keep_prob[i] = subsample_keep_probability(space.vocab.counts[i],
                                                     space.vocab.total_tokens,
                                                     cfg.subsample_t);
    UnigramSampler sampler(space.vocab.counts, cfg.neg_exponent);
    sh.sampler = &sampler;
    sh.input = &space.input_vectors;
    sh.context = &space.context_vectors;
    sh.planned_tokens =
        static_cast<std::uint64_t>(cfg.iterations) * space.vocab.total_tokens;

    const std::size_t n_epochs = static_cast<std::size_t>(cfg.iterations);
    std::vector<std::vector<double>> loss_parts(threads, std::vector<double>(n_epochs, 0.0));
    std::vector<std::vector<std::uint64_t>> pair_parts(
        threads, std::vector<std::uint64_t>(n_epochs, 0));

    if (threads == 1) {
        detail::train_worker(sh, 0, 1, loss_parts[0], pair_parts[0]);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(detail::train_worker, std::ref(sh), t, threads,
                              std::ref(loss_parts[t]), std::ref(pair_parts[t]));
        for (auto& th : pool) th.join();
    }

    if (stats) {
        stats->epoch_mean_loss.assign(n_epochs, 0.0);
        stats->pairs_trained = 0;
        for (std::size_t e = 0; e < n_epochs; ++e) {
            double loss = 0.0;
            std::uint64_t pairs = 0;
            for (int t = 0; t < threads; ++t) {
                loss += loss_parts[t][e];
                pairs += pair_parts[t][e];
            }
            stats->epoch_mean_loss[e] = pairs ? loss / static_cast<double>(pairs) : 0.0;
            stats->pairs_trained += pairs;
        }
    }
    return space;
}

} // namespace ctxsem
