#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxsem/projection.hpp"
#include "ctxsem/rng.hpp"
#include "ctxsem/similarity.hpp"

namespace ctxsem {

// ---------------------------------------------------------------------------
// Human judgment data. Pair-similarity responses key cells by an unordered
// item pair; feature-rating responses key them by (feature, item).
// ---------------------------------------------------------------------------

struct JudgmentResponse {
    std::string participant;
    std::string a, b;  // item_a/item_b, or feature/item
    double rating = 0.0;
};

struct JudgmentSet {
    enum class Kind { pair_similarity, feature_rating };

    Kind kind = Kind::pair_similarity;
    std::string context;
    std::vector<JudgmentResponse> responses;
    std::set<std::string> retained_participants;  // defaults to everyone

    std::set<std::string> all_participants() const {
        std::set<std::string> out;
        for (const auto& r : responses) out.insert(r.participant);
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            std::string last = line.substr(start);
            if (!last.empty() && last.back() == '\r') last.pop_back();
            out.push_back(last);
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline double parse_likert(const std::string& field, const std::string& where) {
    std::size_t used = 0;
    int v;
    try {
        v = std::stoi(field, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(where + ": rating is not an integer: \"" + field + "\"");
    }
    if (used != field.size())
        throw std::runtime_error(where + ": rating is not an integer: \"" + field + "\"");
    if (v < 1 || v > 5)
        throw std::runtime_error(where + ": rating " + std::to_string(v) +
                                 " outside the 1-5 scale");
    return v;
}

inline JudgmentSet load_judgments(const std::string& path, const std::string& context,
                                  JudgmentSet::Kind kind, const char* header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open judgments file: " + path);
    JudgmentSet j;
    j.kind = kind;
    j.context = context;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (lineno == 1 && line.rfind(header, 0) == 0) continue;  // header row
        auto f = detail::split_csv_line(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (f.size() != 5)
            throw std::runtime_error(where + ": expected 5 fields, got " +
                                     std::to_string(f.size()));
        if (!context.empty() && f[1] != context) continue;
        JudgmentResponse r;
        r.participant = f[0];
        r.a = f[2];
        r.b = f[3];
        r.rating = parse_likert(f[4], where);
        j.responses.push_back(std::move(r));
    }
    j.retained_participants = j.all_participants();
    return j;
}

} // namespace detail

// CSV: participant_id,context,item_a,item_b,rating
inline JudgmentSet load_pair_judgments(const std::string& path,
                                       const std::string& context = "") {
    return detail::load_judgments(path, context, JudgmentSet::Kind::pair_similarity,
                                  "participant_id,context,item_a,item_b");
}

// CSV: participant_id,context,feature,item,rating
inline JudgmentSet load_feature_ratings(const std::string& path,
                                        const std::string& context = "") {
    return detail::load_judgments(path, context, JudgmentSet::Kind::feature_rating,
                                  "participant_id,context,feature,item");
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

enum class CorrelationMethod { pearson, spearman };

inline std::optional<double> pearson(std::span<const double> x,
                                     std::span<const double> y) {
    if (x.size() != y.size()) throw std::runtime_error("correlation: length mismatch");
    if (x.size() < 3) throw std::runtime_error("correlation needs at least 3 points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;  // undefined correlation
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks, ties sharing the mean of their rank range.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> correlation(std::span<const double> x,
                                         std::span<const double> y,
                                         CorrelationMethod method) {
    if (method == CorrelationMethod::pearson) return pearson(x, y);
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

inline CorrelationMethod correlation_method_from_string(const std::string& s) {
    if (s == "pearson") return CorrelationMethod::pearson;
    if (s == "spearman") return CorrelationMethod::spearman;
    throw std::runtime_error("unknown correlation method: " + s);
}

// ---------------------------------------------------------------------------
// Participant filtering and mean truth
// ---------------------------------------------------------------------------

namespace detail {

struct ResponseTable {
    std::vector<std::string> cells;         // canonical sorted cell keys
    std::vector<std::string> participants;  // sorted
    std::vector<std::vector<double>> values;  // participant-major, cell-aligned
};

inline std::string cell_key(const JudgmentSet& j, const JudgmentResponse& r) {
    if (j.kind == JudgmentSet::Kind::pair_similarity)
        return r.a < r.b ? r.a + "\t" + r.b : r.b + "\t" + r.a;
    return r.a + "\t" + r.b;
}

inline ResponseTable build_table(const JudgmentSet& j) {
    std::set<std::string> cells;
    for (const auto& r : j.responses)
        if (j.retained_participants.count(r.participant)) cells.insert(cell_key(j, r));
    if (cells.empty()) throw std::runtime_error("judgment set has no responses");

    std::map<std::string, std::size_t> cell_index;
    ResponseTable t;
    for (const auto& c : cells) {
        cell_index.emplace(c, t.cells.size());
        t.cells.push_back(c);
    }
    std::map<std::string, std::vector<std::optional<double>>> rows;
    for (const auto& r : j.responses) {
        if (!j.retained_participants.count(r.participant)) continue;
        auto& row = rows[r.participant];
        if (row.empty()) row.resize(t.cells.size());
        auto& slot = row[cell_index.at(cell_key(j, r))];
        if (slot.has_value())
            throw std::runtime_error("participant " + r.participant +
                                     " has duplicate responses for cell " +
                                     cell_key(j, r));
        slot = r.rating;
    }
    for (auto& [p, row] : rows) {
        std::vector<double> v;
        v.reserve(row.size());
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!row[c].has_value())
                throw std::runtime_error("participant " + p + " is missing cell " +
                                         t.cells[c]);
            v.push_back(*row[c]);
        }
        t.participants.push_back(p);
        t.values.push_back(std::move(v));
    }
    return t;
}

// Pearson r of each active participant against the mean of the others.
inline std::vector<std::optional<double>> loo_correlations(
    const ResponseTable& t, const std::vector<std::size_t>& active) {
    const std::size_t n_cells = t.cells.size();
    std::vector<double> total(n_cells, 0.0);
    for (std::size_t p : active)
        for (std::size_t c = 0; c < n_cells; ++c) total[c] += t.values[p][c];
    std::vector<std::optional<double>> out;
    out.reserve(active.size());
    std::vector<double> others(n_cells);
    for (std::size_t p : active) {
        for (std::size_t c = 0; c < n_cells; ++c)
            others[c] = (total[c] - t.values[p][c]) /
                        static_cast<double>(active.size() - 1);
        out.push_back(pearson(t.values[p], others));
    }
    return out;
}

} // namespace detail

// Removes zero-variance responders, then iteratively removes the participant
// whose responses correlate least with the mean of the other retained
// participants until everyone's leave-one-out Pearson r clears `threshold`.
inline JudgmentSet filter_participants(const JudgmentSet& j, double threshold = 0.5) {
    if (j.retained_participants.size() < 2)
        throw std::runtime_error("participant filtering needs at least 2 participants");
    detail::ResponseTable t = detail::build_table(j);

    std::vector<std::size_t> active;
    for (std::size_t p = 0; p < t.participants.size(); ++p) {
        std::span<const double> v = t.values[p];
        double m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        bool has_variance = false;
        for (double x : v)
            if (x != m) { has_variance = true; break; }
        if (has_variance) active.push_back(p);
    }
    if (active.size() < 2)
        throw std::runtime_error("fewer than 2 participants left after variance filtering");

    while (true) {
        auto rs = detail::loo_correlations(t, active);
        std::size_t worst = 0;
        double worst_r = 2.0;
        bool all_pass = true;
        for (std::size_t i = 0; i < active.size(); ++i) {
            double r = rs[i].value_or(-2.0);  // undefined correlates worst
            if (r < threshold) all_pass = false;
            if (r < worst_r) {
                worst_r = r;
                worst = i;
            }
        }
        if (all_pass) break;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst));
        if (active.size() < 2)
            throw std::runtime_error("fewer than 2 participants survive the "
                                     "reliability filter");
    }

    JudgmentSet out = j;
    out.retained_participants.clear();
    for (std::size_t p : active) out.retained_participants.insert(t.participants[p]);
    return out;
}

// Mean rating per item pair over retained participants, on the canonical pair
// list of `items` (derived from the data when omitted).
inline PairScores mean_pair_truth(const JudgmentSet& j,
                                  std::vector<std::string> items = {}) {
    if (j.kind != JudgmentSet::Kind::pair_similarity)
        throw std::runtime_error("mean_pair_truth needs pair-similarity judgments");
    if (items.empty()) {
        std::set<std::string> seen;
        for (const auto& r : j.responses)
            if (j.retained_participants.count(r.participant)) {
                seen.insert(r.a);
                seen.insert(r.b);
            }
        items.assign(seen.begin(), seen.end());
    }
    std::map<std::string, std::pair<double, std::size_t>> cells;
    for (const auto& r : j.responses) {
        if (!j.retained_participants.count(r.participant)) continue;
        auto& cell = cells[detail::cell_key(j, r)];
        cell.first += r.rating;
        ++cell.second;
    }
    PairScores ps;
    ps.context = j.context;
    ps.method = "human";
    ps.pairs = make_pairs(items);
    for (const auto& [a, b] : ps.pairs) {
        std::string key = a < b ? a + "\t" + b : b + "\t" + a;
        auto it = cells.find(key);
        if (it == cells.end() || it->second.second == 0)
            throw std::runtime_error("no responses for pair " + a + "," + b);
        ps.scores.push_back(it->second.first / static_cast<double>(it->second.second));
    }
    return ps;
}

// Mean rating per item x feature cell over retained participants.
inline RatingsMatrix mean_feature_truth(const JudgmentSet& j,
                                        std::vector<std::string> items = {},
                                        std::vector<std::string> features = {}) {
    if (j.kind != JudgmentSet::Kind::feature_rating)
        throw std::runtime_error("mean_feature_truth needs feature-rating judgments");
    std::set<std::string> seen_items, seen_features;
    std::map<std::string, std::pair<double, std::size_t>> cells;
    for (const auto& r : j.responses) {
        if (!j.retained_participants.count(r.participant)) continue;
        seen_features.insert(r.a);
        seen_items.insert(r.b);
        auto& cell = cells[r.a + "\t" + r.b];
        cell.first += r.rating;
        ++cell.second;
    }
    if (items.empty()) items.assign(seen_items.begin(), seen_items.end());
    if (features.empty()) features.assign(seen_features.begin(), seen_features.end());
    RatingsMatrix m;
    m.items = items;
    m.features = features;
    m.values.resize(items.size() * features.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t k = 0; k < features.size(); ++k) {
            auto it = cells.find(features[k] + "\t" + items[i]);
            if (it == cells.end())
                throw std::runtime_error("no responses for feature " + features[k] +
                                         ", item " + items[i]);
            m.at(i, k) = it->second.first / static_cast<double>(it->second.second);
        }
    return m;
}

// ---------------------------------------------------------------------------
// Bootstrap statistics
// ---------------------------------------------------------------------------

struct BootstrapStats {
    double r_mean = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double r_full = 0.0;  // correlation on the full, unresampled sample
    int n_boot = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline double percentile(std::vector<double> sorted, double q) {
    // linear interpolation between order statistics
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

constexpr int kMaxResampleRetries = 100;

} // namespace detail

// Resamples the item pairs with replacement, computing the correlation per
// resample. Degenerate resamples (zero variance on either side) are redrawn.
inline BootstrapStats bootstrap_statistics(std::span<const double> pred,
                                           std::span<const double> truth, int n = 1000,
                                           std::uint64_t seed = 0,
                                           CorrelationMethod method =
                                               CorrelationMethod::pearson) {
    if (pred.size() != truth.size())
        throw std::runtime_error("bootstrap: prediction/truth length mismatch");
    if (n < 1) throw std::runtime_error("bootstrap: n must be >= 1");
    const std::size_t len = pred.size();
    SplitMix64 rng(mix_seed(seed, 0xB007));
    std::vector<double> rs;
    rs.reserve(static_cast<std::size_t>(n));
    std::vector<double> px(len), tx(len);
    for (int i = 0; i < n; ++i) {
        std::optional<double> r;
        int tries = 0;
        do {
            if (++tries > detail::kMaxResampleRetries)
                throw std::runtime_error("bootstrap: persistent degenerate resamples");
            for (std::size_t k = 0; k < len; ++k) {
                std::size_t idx = static_cast<std::size_t>(rng.bounded(len));
                px[k] = pred[idx];
                tx[k] = truth[idx];
            }
            r = correlation(px, tx, method);
        } while (!r.has_value());
        rs.push_back(*r);
    }
    BootstrapStats out;
    out.n_boot = n;
    out.seed = seed;
    for (double r : rs) out.r_mean += r;
    out.r_mean /= static_cast<double>(n);
    std::sort(rs.begin(), rs.end());
    out.ci_lo = detail::percentile(rs, 0.025);
    out.ci_hi = detail::percentile(rs, 0.975);
    out.r_full = correlation(pred, truth, method).value_or(
        std::numeric_limits<double>::quiet_NaN());
    return out;
}

inline BootstrapStats bootstrap_statistics(const PairScores& pred,
                                           const PairScores& truth, int n = 1000,
                                           std::uint64_t seed = 0,
                                           CorrelationMethod method =
                                               CorrelationMethod::pearson) {
    std::vector<double> aligned = align_scores(truth, pred.pairs);
    return bootstrap_statistics(pred.scores, aligned, n, seed, method);
}

// Paired model comparison: both models are evaluated on the same resample,
// and p = 1 minus the proportion of r_A - r_B differences above zero.
// Differences of exactly zero carry half weight; a strict reading would send
// the p-value of two equally-scoring models to 1 instead of 1/2, and with
// paired resamples such exact ties are the rule for equivalent models, not a
// corner case.
inline double compare_models(std::span<const double> pred_a,
                             std::span<const double> pred_b,
                             std::span<const double> truth, int n = 1000,
                             std::uint64_t seed = 0,
                             CorrelationMethod method = CorrelationMethod::pearson) {
    if (pred_a.size() != truth.size() || pred_b.size() != truth.size())
        throw std::runtime_error("compare_models: length mismatch");
    if (n < 1) throw std::runtime_error("compare_models: n must be >= 1");
    const std::size_t len = truth.size();
    SplitMix64 rng(mix_seed(seed, 0xB007));
    std::vector<double> ax(len), bx(len), tx(len);
    double above = 0.0;
    for (int i = 0; i < n; ++i) {
        std::optional<double> ra, rb;
        int tries = 0;
        do {
            if (++tries > detail::kMaxResampleRetries)
                throw std::runtime_error("compare_models: persistent degenerate resamples");
            for (std::size_t k = 0; k < len; ++k) {
                std::size_t idx = static_cast<std::size_t>(rng.bounded(len));
                ax[k] = pred_a[idx];
                bx[k] = pred_b[idx];
                tx[k] = truth[idx];
            }
            ra = correlation(ax, tx, method);
            rb = correlation(bx, tx, method);
        } while (!ra.has_value() || !rb.has_value());
        double diff = *ra - *rb;
        if (diff > 0.0)
            above += 1.0;
        else if (diff == 0.0)
            above += 0.5;
    }
    return 1.0 - above / static_cast<double>(n);
}

inline double compare_models(const PairScores& pred_a, const PairScores& pred_b,
                             const PairScores& truth, int n = 1000,
                             std::uint64_t seed = 0,
                             CorrelationMethod method = CorrelationMethod::pearson) {
    std::vector<double> b = align_scores(pred_b, pred_a.pairs);
    std::vector<double> t = align_scores(truth, pred_a.pairs);
    return compare_models(pred_a.scores, b, t, n, seed, method);
}

// Elementwise mean over runs trained from different initializations.
inline PairScores ensemble_mean(const std::vector<PairScores>& runs) {
    if (runs.empty()) throw std::runtime_error("ensemble_mean: no runs");
    PairScores out = runs[0];
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].pairs.size() != out.pairs.size())
            throw std::runtime_error("ensemble_mean: mismatched pair lists");
        for (std::size_t i = 0; i < out.pairs.size(); ++i) {
            if (!same_pair(runs[r].pairs[i], out.pairs[i]))
                throw std::runtime_error("ensemble_mean: mismatched pair lists");
            out.scores[i] += runs[r].scores[i];
        }
    }
    for (auto& s : out.scores) s /= static_cast<double>(runs.size());
    out.seed_info = "ensemble:" + std::to_string(runs.size());
    return out;
}

// Ceiling = mean leave-one-out Pearson r over retained participants (the
// statistic the reliability filter uses); fraction = model_r / ceiling.
inline std::pair<double, double> reliability_ceiling(const JudgmentSet& j,
                                                     double model_r) {
    if (j.retained_participants.size() < 2)
        throw std::runtime_error("reliability ceiling needs at least 2 participants");
    detail::ResponseTable t = detail::build_table(j);
    std::vector<std::size_t> active(t.participants.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
    auto rs = detail::loo_correlations(t, active);
    double ceiling = 0.0;
    for (const auto& r : rs) {
        if (!r.has_value())
            throw std::runtime_error("reliability ceiling undefined: a participant "
                                     "has zero response variance");
        ceiling += *r;
    }
    ceiling /= static_cast<double>(rs.size());
    return {ceiling, model_r / ceiling};
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

struct EvalReport {
    std::string method;
    double r_mean = 0.0;
    std::array<double, 2> ci95{0.0, 0.0};
    int n_boot = 1000;
    std::uint64_t seed = 0;
    std::map<std::string, double> p_values;
    std::optional<double> reliability_ceiling;
    std::optional<double> reliability_fraction;

    json to_json() const {
        json j{{"method", method}, {"r_mean", r_mean},
               {"ci95", std::array<double, 2>{ci95[0], ci95[1]}},
               {"n_boot", n_boot},  {"seed", seed},
               {"p_values", p_values}};
        if (reliability_ceiling)
            j["reliability"] = {{"ceiling", *reliability_ceiling},
                                {"fraction", *reliability_fraction}};
        return j;
    }
};

} // namespace ctxsem
