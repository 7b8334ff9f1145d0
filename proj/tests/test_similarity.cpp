#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "ctxsem/eval.hpp"
#include "ctxsem/similarity.hpp"

#include "helpers.hpp"

using namespace ctxsem;

namespace {

// Independent least-squares oracle: normal equations on centered data,
// solved by Gaussian elimination with partial pivoting.
std::vector<double> normal_equations_fit(const DesignMatrix& X,
                                         const std::vector<double>& y) {
    const std::size_t p = X.cols;
    std::vector<double> xm(p, 0.0);
    double ym = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) {
        ym += y[i];
        for (std::size_t j = 0; j < p; ++j) xm[j] += X.at(i, j);
    }
    ym /= static_cast<double>(X.rows);
    for (auto& m : xm) m /= static_cast<double>(X.rows);

    std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double xj = X.at(i, j) - xm[j];
            for (std::size_t k = 0; k < p; ++k)
                A[j][k] += xj * (X.at(i, k) - xm[k]);
            A[j][p] += xj * (y[i] - ym);
        }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            double factor = A[r][col] / A[col][col];
            for (std::size_t k = col; k <= p; ++k) A[r][k] -= factor * A[col][k];
        }
    }
    std::vector<double> w(p);
    for (std::size_t j = 0; j < p; ++j) w[j] = A[j][p] / A[j][j];
    return w;
}

RatingsMatrix random_ratings(std::uint64_t seed, std::size_t n_items,
                             std::size_t n_features) {
    SplitMix64 rng(seed);
    RatingsMatrix r;
    for (std::size_t i = 0; i < n_items; ++i) r.items.push_back("item" + std::to_string(i));
    for (std::size_t k = 0; k < n_features; ++k)
        r.features.push_back("f" + std::to_string(k));
    r.values.resize(n_items * n_features);
    for (auto& v : r.values) v = rng.uniform() * 2.0 - 1.0;
    return r;
}

// truth = 5 - sum_k w_k |df_k| (+ optional noise), the planted-weights oracle
PairScores planted_truth(const RatingsMatrix& r, const std::vector<double>& w,
                         double sigma, std::uint64_t noise_seed) {
    DesignMatrix X = featurize_pairs(r, r.items);
    SplitMix64 rng(noise_seed);
    PairScores truth;
    truth.context = "synthetic";
    truth.method = "planted";
    truth.pairs = make_pairs(r.items);
    for (std::size_t i = 0; i < X.rows; ++i) {
        double v = 5.0;
        for (std::size_t k = 0; k < X.cols; ++k) v -= w[k] * X.at(i, k);
        if (sigma > 0) {
            // Box-Muller
            double u1 = rng.uniform() + 1e-300, u2 = rng.uniform();
            v += sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
        }
        truth.scores.push_back(v);
    }
    return truth;
}

} // namespace

TEST_CASE("predict_cosine produces canonical pairs") {
    EmbeddingSpace s = testutil::make_space(
        {"a", "b", "c"}, {{1, 0}, {1, 0}, {0, 1}});
    PairScores ps = predict_cosine(s, {"a", "b", "c"}, "toy");
    REQUIRE(ps.pairs.size() == 3);
    CHECK(ps.pairs[0] == std::pair<std::string, std::string>{"a", "b"});
    CHECK(ps.pairs[1] == std::pair<std::string, std::string>{"a", "c"});
    CHECK(ps.pairs[2] == std::pair<std::string, std::string>{"b", "c"});
    CHECK(ps.scores[0] == doctest::Approx(1.0));  // identical vectors

    SUBCASE("10 items give 45 scores") {
        std::vector<std::string> words;
        std::vector<std::vector<float>> rows;
        SplitMix64 rng(3);
        for (int i = 0; i < 10; ++i) {
            words.push_back("i" + std::to_string(i));
            rows.push_back({static_cast<float>(rng.uniform() + 0.1),
                            static_cast<float>(rng.uniform())});
        }
        EmbeddingSpace big = testutil::make_space(words, rows);
        CHECK(predict_cosine(big, words).scores.size() == 45);
    }
    SUBCASE("OOV item propagates") {
        CHECK_THROWS_AS(predict_cosine(s, {"a", "nope"}), std::runtime_error);
    }
}

TEST_CASE("featurize_pairs takes absolute rating differences") {
    RatingsMatrix r;
    r.items = {"a", "b"};
    r.features = {"f"};
    r.values = {3.0, 1.0};

    DesignMatrix X = featurize_pairs(r, {"a", "b"});
    REQUIRE(X.rows == 1);
    CHECK(X.at(0, 0) == 2.0);

    SUBCASE("identical items give a zero row") {
        RatingsMatrix q = r;
        q.values = {1.5, 1.5};
        CHECK(featurize_pairs(q, {"a", "b"}).at(0, 0) == 0.0);
    }
    SUBCASE("row is symmetric in item order") {
        DesignMatrix X2 = featurize_pairs(r, {"b", "a"});
        CHECK(X2.at(0, 0) == X.at(0, 0));
    }
    SUBCASE("squared variant") {
        DesignMatrix X2 = featurize_pairs(r, {"a", "b"}, PairFeature::squared_diff);
        CHECK(X2.at(0, 0) == 4.0);
    }
    SUBCASE("10 items x 12 features give a 45x12 design") {
        RatingsMatrix big = random_ratings(1, 10, 12);
        DesignMatrix X3 = featurize_pairs(big, big.items);
        CHECK(X3.rows == 45);
        CHECK(X3.cols == 12);
    }
    SUBCASE("unknown item errors") {
        CHECK_THROWS_AS(featurize_pairs(r, {"a", "zzz"}), std::runtime_error);
    }
}

TEST_CASE("fit_least_squares") {
    SUBCASE("exact line y = 2x") {
        DesignMatrix X;
        X.rows = 4;
        X.cols = 1;
        X.data = {1, 2, 3, 4};
        RegressionModel m = fit_least_squares(X, {2, 4, 6, 8});
        CHECK(m.weights[0] == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(m.intercept == doctest::Approx(0.0).scale(1).epsilon(1e-10));
    }
    SUBCASE("constant target gives zero weights") {
        DesignMatrix X;
        X.rows = 3;
        X.cols = 2;
        X.data = {1, 2, 3, 4, 5, 6};
        RegressionModel m = fit_least_squares(X, {7, 7, 7});
        CHECK(m.weights[0] == doctest::Approx(0.0).scale(1).epsilon(1e-10));
        CHECK(m.weights[1] == doctest::Approx(0.0).scale(1).epsilon(1e-10));
        CHECK(m.intercept == doctest::Approx(7.0).epsilon(1e-10));
    }
    SUBCASE("planted weights recovered from a noisy 36x12 system") {
        SplitMix64 rng(2718);
        for (int trial = 0; trial < 5; ++trial) {
            DesignMatrix X;
            X.rows = 36;
            X.cols = 12;
            X.data.resize(36 * 12);
            for (auto& v : X.data) v = rng.uniform() * 2 - 1;
            std::vector<double> w_true(12);
            for (auto& w : w_true) w = rng.uniform() * 2 - 1;
            double b_true = rng.uniform();
            std::vector<double> y(36);
            for (std::size_t i = 0; i < 36; ++i) {
                y[i] = b_true;
                for (std::size_t k = 0; k < 12; ++k) y[i] += w_true[k] * X.at(i, k);
                double u1 = rng.uniform() + 1e-300, u2 = rng.uniform();
                y[i] += 0.01 * std::sqrt(-2 * std::log(u1)) *
                        std::cos(6.283185307179586 * u2);
            }
            RegressionModel m = fit_least_squares(X, y);
            std::vector<double> oracle = normal_equations_fit(X, y);
            for (std::size_t k = 0; k < 12; ++k) {
                CHECK(std::abs(m.weights[k] - w_true[k]) < 0.05);
                CHECK(m.weights[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
            }
        }
    }
    SUBCASE("non-finite inputs error") {
        DesignMatrix X;
        X.rows = 2;
        X.cols = 1;
        X.data = {1.0, std::numeric_limits<double>::quiet_NaN()};
        CHECK_THROWS_AS(fit_least_squares(X, {1, 2}), std::runtime_error);
        X.data = {1.0, 2.0};
        CHECK_THROWS_AS(
            fit_least_squares(X, {1, std::numeric_limits<double>::infinity()}),
            std::runtime_error);
    }
    SUBCASE("underdetermined system returns the minimum-norm solution") {
        // 2 rows, 3 unknowns; any w with Xc w = yc fits, minimum-norm is unique
        DesignMatrix X;
        X.rows = 2;
        X.cols = 3;
        X.data = {1, 0, 0, 0, 1, 0};
        RegressionModel m = fit_least_squares(X, {1.0, 3.0});
        // residuals must vanish
        CHECK(m.predict_row(std::vector<double>{1, 0, 0}) == doctest::Approx(1.0));
        CHECK(m.predict_row(std::vector<double>{0, 1, 0}) == doctest::Approx(3.0));
        // the untouched third coordinate carries no weight
        CHECK(m.weights[2] == doctest::Approx(0.0).scale(1).epsilon(1e-10));
    }
}

TEST_CASE("leave-one-object-out folds have the right geometry") {
    auto folds = make_loocv_folds(10);
    REQUIRE(folds.size() == 10);
    auto pairs = make_pairs({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"});
    for (const auto& fold : folds) {
        CHECK(fold.train_rows.size() == 36);
        CHECK(fold.test_rows.size() == 9);
        std::string left = std::to_string(fold.left_out_item);
        for (std::size_t row : fold.train_rows) {
            CHECK(pairs[row].first != left);
            CHECK(pairs[row].second != left);
        }
        for (std::size_t row : fold.test_rows)
            CHECK((pairs[row].first == left || pairs[row].second == left));
    }
}

TEST_CASE("loocv_projection_regression recovers planted weights") {
    RatingsMatrix r = random_ratings(99, 10, 12);
    std::vector<double> w_true(12);
    SplitMix64 rng(123);
    for (auto& w : w_true) w = 0.2 + rng.uniform();

    SUBCASE("zero noise: out-of-sample r > 0.999 and predictions match truth") {
        PairScores truth = planted_truth(r, w_true, 0.0, 0);
        PairScores pred = loocv_projection_regression(r, truth);
        CHECK(pred.scores.size() == 45);
        auto corr = correlation(pred.scores, truth.scores, CorrelationMethod::pearson);
        REQUIRE(corr.has_value());
        CHECK(*corr > 0.999);
        for (std::size_t i = 0; i < 45; ++i)
            CHECK(std::abs(pred.scores[i] - truth.scores[i]) < 1e-6);
    }
    SUBCASE("noise sigma=0.1 still gives r > 0.9 across seeds") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            PairScores truth = planted_truth(r, w_true, 0.1, seed);
            PairScores pred = loocv_projection_regression(r, truth);
            auto corr = correlation(pred.scores, truth.scores, CorrelationMethod::pearson);
            REQUIRE(corr.has_value());
            CHECK(*corr > 0.9);
        }
    }
    SUBCASE("constant truth yields constant predictions, correlation undefined") {
        PairScores truth = planted_truth(r, std::vector<double>(12, 0.0), 0.0, 0);
        PairScores pred = loocv_projection_regression(r, truth);
        for (double sc : pred.scores) CHECK(sc == doctest::Approx(5.0));
        CHECK(!correlation(pred.scores, truth.scores, CorrelationMethod::pearson)
                   .has_value());
    }
    SUBCASE("fewer than 3 items errors") {
        RatingsMatrix tiny = random_ratings(1, 2, 3);
        PairScores truth;
        truth.pairs = make_pairs(tiny.items);
        truth.scores = {1.0};
        CHECK_THROWS_AS(loocv_projection_regression(tiny, truth), std::runtime_error);
    }
    SUBCASE("truth pair orientation does not matter") {
        PairScores truth = planted_truth(r, w_true, 0.05, 4);
        PairScores flipped = truth;
        for (auto& p : flipped.pairs) std::swap(p.first, p.second);
        PairScores a = loocv_projection_regression(r, truth);
        PairScores b = loocv_projection_regression(r, flipped);
        CHECK(a.scores == b.scores);
    }
}

TEST_CASE("fold training is blind to rows involving the left-out item") {
    RatingsMatrix r = random_ratings(7, 6, 4);
    std::vector<double> w(4, 0.5);
    PairScores truth = planted_truth(r, w, 0.1, 9);
    DesignMatrix X = featurize_pairs(r, r.items);

    for (const auto& fold : make_loocv_folds(r.items.size())) {
        std::vector<double> y_corrupted = truth.scores;
        for (std::size_t row : fold.test_rows) y_corrupted[row] += 1000.0;

        auto fit_fold = [&](const std::vector<double>& y) {
            DesignMatrix Xt;
            Xt.cols = X.cols;
            std::vector<double> yt;
            for (std::size_t row : fold.train_rows) {
                for (std::size_t k = 0; k < X.cols; ++k) Xt.data.push_back(X.at(row, k));
                yt.push_back(y[row]);
                ++Xt.rows;
            }
            return fit_least_squares(Xt, yt);
        };
        RegressionModel clean = fit_fold(truth.scores);
        RegressionModel corrupted = fit_fold(y_corrupted);
        CHECK(clean.weights == corrupted.weights);
        CHECK(clean.intercept == corrupted.intercept);
    }
}

TEST_CASE("predict_subspace_cosine") {
    RatingsMatrix r;
    r.items = {"a", "b", "c"};
    r.features = {"f1", "f2"};
    r.values = {1, 0,
                2, 0,   // parallel to a
                0, 3};  // orthogonal to a

    PairScores ps = predict_subspace_cosine(r, r.items, "toy");
    CHECK(ps.scores[0] == doctest::Approx(1.0));
    CHECK(ps.scores[1] == doctest::Approx(0.0));

    SUBCASE("zero rating row errors") {
        RatingsMatrix z = r;
        z.values = {1, 0, 0, 0, 0, 3};
        CHECK_THROWS_WITH_AS(predict_subspace_cosine(z, z.items),
                             doctest::Contains("zero rating row"), std::runtime_error);
    }
    SUBCASE("equals predict_cosine when features are the raw dimensions") {
        EmbeddingSpace s = testutil::make_space(
            {"x", "y", "z"}, {{0.3f, -0.7f, 0.2f}, {0.9f, 0.1f, -0.4f}, {0.5f, 0.5f, 0.5f}});
        RatingsMatrix raw;
        raw.items = {"x", "y", "z"};
        raw.features = {"d0", "d1", "d2"};
        for (const auto& w : raw.items)
            for (float v : s.vector(w)) raw.values.push_back(v);
        PairScores via_ratings = predict_subspace_cosine(raw, raw.items);
        PairScores via_vectors = predict_cosine(s, raw.items);
        for (std::size_t i = 0; i < via_ratings.scores.size(); ++i)
            CHECK(via_ratings.scores[i] ==
                  doctest::Approx(via_vectors.scores[i]).epsilon(1e-12));
    }
}

TEST_CASE("loocv_rawdim_regression") {
    SUBCASE("dim=2 planted linear truth gives r > 0.99") {
        SplitMix64 rng(55);
        std::vector<std::string> words;
        std::vector<std::vector<float>> rows;
        for (int i = 0; i < 10; ++i) {
            words.push_back("i" + std::to_string(i));
            rows.push_back({static_cast<float>(rng.uniform()),
                            static_cast<float>(rng.uniform())});
        }
        EmbeddingSpace s = testutil::make_space(words, rows);
        PairScores truth;
        truth.pairs = make_pairs(words);
        for (const auto& [a, b] : truth.pairs) {
            auto va = s.vector(a);
            auto vb = s.vector(b);
            truth.scores.push_back(5.0 - 2.0 * std::abs(va[0] - vb[0]) -
                                   0.5 * std::abs(va[1] - vb[1]));
        }
        PairScores pred = loocv_rawdim_regression(s, words, truth);
        CHECK(pred.scores.size() == 45);
        auto corr = correlation(pred.scores, truth.scores, CorrelationMethod::pearson);
        REQUIRE(corr.has_value());
        CHECK(*corr > 0.99);
    }
    SUBCASE("dim=100 folds train without error via the minimum-norm path") {
        SplitMix64 rng(66);
        std::vector<std::string> words;
        std::vector<std::vector<float>> rows;
        for (int i = 0; i < 10; ++i) {
            words.push_back("i" + std::to_string(i));
            std::vector<float> v(100);
            for (auto& x : v) x = static_cast<float>(rng.uniform() - 0.5);
            rows.push_back(std::move(v));
        }
        EmbeddingSpace s = testutil::make_space(words, rows);
        PairScores truth;
        truth.pairs = make_pairs(words);
        for (std::size_t i = 0; i < 45; ++i) truth.scores.push_back(rng.uniform() * 4 + 1);
        PairScores pred = loocv_rawdim_regression(s, words, truth);
        CHECK(pred.scores.size() == 45);
        for (double sc : pred.scores) CHECK(std::isfinite(sc));
    }
}

TEST_CASE("pair scores CSV emission") {
    testutil::TempDir tmp("scores");
    PairScores ps;
    ps.context = "nature";
    ps.method = "cosine";
    ps.seed_info = "0";
    ps.pairs = {{"bear", "cat"}, {"bear", "deer"}};
    ps.scores = {0.5, -0.25};
    save_pair_scores_csv(ps, tmp.file("s.csv"));
    CHECK(testutil::read_file(tmp.file("s.csv")) ==
          "context,item_a,item_b,score,method,seed\n"
          "nature,bear,cat,0.5,cosine,0\n"
          "nature,bear,deer,-0.25,cosine,0\n");
}
