#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxsem/embedding.hpp"
#include "ctxsem/projection.hpp"

namespace ctxsem {

// ---------------------------------------------------------------------------
// Pairwise similarity scores over a fixed item list. Pairs are canonical:
// (i, j) with i < j by item list position.
// ---------------------------------------------------------------------------

struct PairScores {
    std::string context;
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<double> scores;
    std::string method;
    std::string seed_info;
};

inline std::vector<std::pair<std::string, std::string>> make_pairs(
    const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size(); ++j)
            out.emplace_back(items[i], items[j]);
    return out;
}

inline bool same_pair(const std::pair<std::string, std::string>& a,
                      const std::pair<std::string, std::string>& b) {
    return (a.first == b.first && a.second == b.second) ||
           (a.first == b.second && a.second == b.first);
}

// Reorders `scores` onto the canonical pair list of `pairs`; pair orientation
// does not matter. Every requested pair must be present exactly once.
inline std::vector<double> align_scores(
    const PairScores& scores,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    auto key = [](const std::string& a, const std::string& b) {
        return a < b ? a + "\t" + b : b + "\t" + a;
    };
    std::map<std::string, double> by_pair;
    for (std::size_t i = 0; i < scores.pairs.size(); ++i) {
        auto [it, inserted] = by_pair.emplace(
            key(scores.pairs[i].first, scores.pairs[i].second), scores.scores[i]);
        if (!inserted)
            throw std::runtime_error("duplicate pair in scores: " +
                                     scores.pairs[i].first + "," + scores.pairs[i].second);
    }
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        auto it = by_pair.find(key(p.first, p.second));
        if (it == by_pair.end())
            throw std::runtime_error("missing score for pair: " + p.first + "," + p.second);
        out.push_back(it->second);
    }
    return out;
}

inline void save_pair_scores_csv(const PairScores& ps, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scores file: " + path);
    char buf[40];
    out << "context,item_a,item_b,score,method,seed\n";
    for (std::size_t i = 0; i < ps.pairs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", ps.scores[i]);
        out << ps.context << ',' << ps.pairs[i].first << ',' << ps.pairs[i].second
            << ',' << buf << ',' << ps.method << ',' << ps.seed_info << '\n';
    }
    if (!out) throw std::runtime_error("failed writing scores file: " + path);
}

// ---------------------------------------------------------------------------
// Prediction methods
// ---------------------------------------------------------------------------

inline PairScores predict_cosine(const EmbeddingSpace& s,
                                 const std::vector<std::string>& items,
                                 const std::string& context = "") {
    PairScores ps;
    ps.context = context;
    ps.method = "cosine";
    ps.pairs = make_pairs(items);
    for (const auto& [a, b] : ps.pairs)
        ps.scores.push_back(cosine_similarity(s, a, b));
    return ps;
}

// Cosine similarity between the items' feature-rating rows. With the raw
// embedding dimensions as "features" this reduces to predict_cosine.
inline PairScores predict_subspace_cosine(const RatingsMatrix& r,
                                          const std::vector<std::string>& items,
                                          const std::string& context = "") {
    std::map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < r.items.size(); ++i) row[r.items[i]] = i;
    PairScores ps;
    ps.context = context;
    ps.method = "subspace-cosine";
    ps.pairs = make_pairs(items);
    for (const auto& [a, b] : ps.pairs) {
        auto ia = row.find(a);
        auto ib = row.find(b);
        if (ia == row.end() || ib == row.end())
            throw std::runtime_error("item not in ratings matrix: " +
                                     (ia == row.end() ? a : b));
        auto ra = r.item_row(ia->second);
        auto rb = r.item_row(ib->second);
        auto norm_sq = [](std::span<const double> v) {
            double s = 0;
            for (double x : v) s += x * x;
            return s;
        };
        if (norm_sq(ra) == 0.0 || norm_sq(rb) == 0.0)
            throw std::runtime_error("zero rating row for item: " +
                                     (norm_sq(ra) == 0.0 ? a : b));
        double dot = 0;
        for (std::size_t k = 0; k < ra.size(); ++k) dot += ra[k] * rb[k];
        ps.scores.push_back(dot / std::sqrt(norm_sq(ra) * norm_sq(rb)));
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Pair featurization and least squares
// ---------------------------------------------------------------------------

enum class PairFeature { abs_diff, squared_diff };

struct DesignMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;  // row-major

    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

// One row per canonical item pair; entries are |r[a] - r[b]| per feature
// (or squared differences when requested).
inline DesignMatrix featurize_pairs(const RatingsMatrix& r,
                                    const std::vector<std::string>& items,
                                    PairFeature kind = PairFeature::abs_diff) {
    std::map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < r.items.size(); ++i) row[r.items[i]] = i;
    for (const auto& it : items)
        if (!row.count(it))
            throw std::runtime_error("item not in ratings matrix: " + it);
    auto pairs = make_pairs(items);
    DesignMatrix X;
    X.rows = pairs.size();
    X.cols = r.features.size();
    X.data.resize(X.rows * X.cols);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto ra = r.item_row(row[pairs[p].first]);
        auto rb = r.item_row(row[pairs[p].second]);
        for (std::size_t k = 0; k < X.cols; ++k) {
            double d = std::abs(ra[k] - rb[k]);
            X.at(p, k) = kind == PairFeature::abs_diff ? d : d * d;
        }
    }
    return X;
}

struct RegressionModel {
    std::vector<double> weights;
    double intercept = 0.0;
    std::vector<std::string> predictor_labels;

    double predict_row(std::span<const double> x) const {
        double y = intercept;
        for (std::size_t k = 0; k < weights.size(); ++k) y += weights[k] * x[k];
        return y;
    }
};

// Ordinary least squares with an intercept. Predictors are centered and the
// coefficient system solved by complete orthogonal decomposition, which
// yields the minimum-norm solution when the system is underdetermined.
inline RegressionModel fit_least_squares(const DesignMatrix& X,
                                         const std::vector<double>& y,
                                         std::vector<std::string> labels = {}) {
    if (X.rows != y.size() || X.rows == 0)
        throw std::runtime_error("fit_least_squares: shape mismatch");
    for (double v : X.data)
        if (!std::isfinite(v)) throw std::runtime_error("fit_least_squares: non-finite predictor");
    for (double v : y)
        if (!std::isfinite(v)) throw std::runtime_error("fit_least_squares: non-finite target");

    Eigen::MatrixXd A(X.rows, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = 0; j < X.cols; ++j) A(i, j) = X.at(i, j);
    Eigen::VectorXd b(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) b(i) = y[i];

    Eigen::RowVectorXd col_means = A.colwise().mean();
    double y_mean = b.mean();
    A.rowwise() -= col_means;
    b.array() -= y_mean;

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    Eigen::VectorXd w = cod.solve(b);

    RegressionModel m;
    m.weights.assign(w.data(), w.data() + w.size());
    m.intercept = y_mean - col_means.dot(w);
    m.predictor_labels = std::move(labels);
    return m;
}

// ---------------------------------------------------------------------------
// Leave-one-object-out cross-validation. Each fold leaves out one item,
// trains on the pairs not involving it and predicts the pairs that do; every
// pair ends up with two fold predictions (one per endpoint), which are
// averaged.
// ---------------------------------------------------------------------------

struct LoocvFold {
    std::size_t left_out_item = 0;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

inline std::vector<LoocvFold> make_loocv_folds(std::size_t n_items) {
    auto involves = [n_items](std::size_t row, std::size_t item) {
        // row index -> (i, j) over the canonical pair ordering
        std::size_t i = 0, offset = row;
        while (offset >= n_items - 1 - i) {
            offset -= n_items - 1 - i;
            ++i;
        }
        std::size_t j = i + 1 + offset;
        return i == item || j == item;
    };
    const std::size_t n_pairs = n_items * (n_items - 1) / 2;
    std::vector<LoocvFold> folds(n_items);
    for (std::size_t o = 0; o < n_items; ++o) {
        folds[o].left_out_item = o;
        for (std::size_t row = 0; row < n_pairs; ++row)
            (involves(row, o) ? folds[o].test_rows : folds[o].train_rows).push_back(row);
    }
    return folds;
}

namespace detail {

inline PairScores loocv_regression(const DesignMatrix& X,
                                   const std::vector<double>& truth,
                                   const std::vector<std::string>& items,
                                   const std::string& context,
                                   const std::string& method) {
    if (items.size() < 3)
        throw std::runtime_error("leave-one-object-out CV needs at least 3 items");
    auto pairs = make_pairs(items);
    if (X.rows != pairs.size() || truth.size() != pairs.size())
        throw std::runtime_error("loocv: design/truth size mismatch");

    std::vector<double> sum(pairs.size(), 0.0);
    std::vector<int> hits(pairs.size(), 0);
    for (const auto& fold : make_loocv_folds(items.size())) {
        DesignMatrix Xt;
        Xt.rows = fold.train_rows.size();
        Xt.cols = X.cols;
        Xt.data.reserve(Xt.rows * Xt.cols);
        std::vector<double> yt;
        yt.reserve(Xt.rows);
        for (std::size_t row : fold.train_rows) {
            for (std::size_t k = 0; k < X.cols; ++k) Xt.data.push_back(X.at(row, k));
            yt.push_back(truth[row]);
        }
        RegressionModel m = fit_least_squares(Xt, yt);
        for (std::size_t row : fold.test_rows) {
            std::span<const double> xr{X.data.data() + row * X.cols, X.cols};
            sum[row] += m.predict_row(xr);
            ++hits[row];
        }
    }
    PairScores out;
    out.context = context;
    out.method = method;
    out.pairs = std::move(pairs);
    out.scores.resize(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) out.scores[i] = sum[i] / hits[i];
    return out;
}

} // namespace detail

inline PairScores loocv_projection_regression(const RatingsMatrix& r,
                                              const PairScores& truth,
                                              PairFeature kind = PairFeature::abs_diff) {
    auto pairs = make_pairs(r.items);
    std::vector<double> y = align_scores(truth, pairs);
    DesignMatrix X = featurize_pairs(r, r.items, kind);
    return detail::loocv_regression(X, y, r.items, truth.context, "proj-regression");
}

inline PairScores loocv_rawdim_regression(const EmbeddingSpace& s,
                                          const std::vector<std::string>& items,
                                          const PairScores& truth,
                                          PairFeature kind = PairFeature::abs_diff) {
    RatingsMatrix raw;
    raw.items = items;
    for (int d = 0; d < s.dim; ++d) raw.features.push_back("dim" + std::to_string(d));
    raw.values.reserve(items.size() * static_cast<std::size_t>(s.dim));
    for (const auto& it : items)
        for (float v : s.vector(it)) raw.values.push_back(v);
    auto pairs = make_pairs(items);
    std::vector<double> y = align_scores(truth, pairs);
    DesignMatrix X = featurize_pairs(raw, items, kind);
    return detail::loocv_regression(X, y, items, truth.context, "rawdim-regression");
}

} // namespace ctxsem
