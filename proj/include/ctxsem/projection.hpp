#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxsem/embedding.hpp"

namespace ctxsem {

enum class ProjectionMode { contextual, adjective };

inline std::string to_string(ProjectionMode m) {
    return m == ProjectionMode::contextual ? "contextual" : "adjective";
}

inline ProjectionMode projection_mode_from_string(const std::string& s) {
    if (s == "contextual") return ProjectionMode::contextual;
    if (s == "adjective") return ProjectionMode::adjective;
    throw std::runtime_error("unknown projection mode: " + s);
}

// A one-dimensional feature subspace spanned by the mean difference between
// high-end and low-end anchor words.
struct FeatureAxis {
    std::string name;
    std::vector<std::string> low_anchors;
    std::vector<std::string> high_anchors;
    std::vector<double> axis;
    ProjectionMode mode = ProjectionMode::contextual;

    double norm() const {
        double s = 0.0;
        for (double v : axis) s += v * v;
        return std::sqrt(s);
    }
};

struct RatingsMatrix {
    std::vector<std::string> items;
    std::vector<std::string> features;
    std::vector<double> values;  // row-major, items x features

    double at(std::size_t item, std::size_t feature) const {
        return values[item * features.size() + feature];
    }
    double& at(std::size_t item, std::size_t feature) {
        return values[item * features.size() + feature];
    }
    std::span<const double> item_row(std::size_t item) const {
        return {values.data() + item * features.size(), features.size()};
    }
};

// The mean over all |low| x |high| pairwise vector differences equals the
// centroid difference, which is what gets computed. Singleton anchor lists
// are allowed here; the shipped anchor config enforces 3+3.
inline FeatureAxis build_axis(const EmbeddingSpace& s,
                              const std::vector<std::string>& lows,
                              const std::vector<std::string>& highs,
                              const std::string& name = "",
                              ProjectionMode mode = ProjectionMode::contextual) {
    if (lows.empty() || highs.empty())
        throw std::runtime_error("build_axis: anchor lists must be non-empty");
    for (const auto& w : lows)
        if (!s.vocab.contains(w))
            throw std::runtime_error("anchor word not in vocabulary: " + w);
    for (const auto& w : highs)
        if (!s.vocab.contains(w))
            throw std::runtime_error("anchor word not in vocabulary: " + w);

    const std::size_t dim = static_cast<std::size_t>(s.dim);
    FeatureAxis f;
    f.name = name;
    f.low_anchors = lows;
    f.high_anchors = highs;
    f.mode = mode;
    f.axis.assign(dim, 0.0);
    for (const auto& w : highs) {
        auto v = s.vector(w);
        for (std::size_t d = 0; d < dim; ++d)
            f.axis[d] += static_cast<double>(v[d]) / static_cast<double>(highs.size());
    }
    for (const auto& w : lows) {
        auto v = s.vector(w);
        for (std::size_t d = 0; d < dim; ++d)
            f.axis[d] -= static_cast<double>(v[d]) / static_cast<double>(lows.size());
    }
    if (f.norm() < 1e-12)
        throw std::runtime_error("degenerate feature axis (anchors coincide): " + name);
    return f;
}

inline double project_vector(std::span<const float> v, const FeatureAxis& f) {
    if (v.size() != f.axis.size())
        throw std::runtime_error("project: dimension mismatch");
    double dot = 0.0;
    for (std::size_t d = 0; d < v.size(); ++d) dot += f.axis[d] * v[d];
    return dot / f.norm();
}

inline double project_word(const EmbeddingSpace& s, const std::string& word,
                           const FeatureAxis& f) {
    return project_vector(s.vector(word), f);
}

inline RatingsMatrix project_items(const EmbeddingSpace& s,
                                   const std::vector<std::string>& items,
                                   const std::vector<FeatureAxis>& axes) {
    RatingsMatrix r;
    r.items = items;
    for (const auto& f : axes) r.features.push_back(f.name);
    r.values.resize(items.size() * axes.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto v = s.vector(items[i]);
        for (std::size_t k = 0; k < axes.size(); ++k)
            r.at(i, k) = project_vector(v, axes[k]);
    }
    return r;
}

// axis^T (v1 - v2) / |axis|; identical to the difference of the two words'
// ratings and to cos(v1 - v2, axis) * |v1 - v2|.
inline double axis_pair_distance(const EmbeddingSpace& s, const std::string& w1,
                                 const std::string& w2, const FeatureAxis& f) {
    auto v1 = s.vector(w1);
    auto v2 = s.vector(w2);
    double dot = 0.0;
    for (std::size_t d = 0; d < v1.size(); ++d)
        dot += f.axis[d] * (static_cast<double>(v1[d]) - v2[d]);
    return dot / f.norm();
}

// ---------------------------------------------------------------------------
// Anchor configuration
// ---------------------------------------------------------------------------

struct AnchorEntry {
    std::string context;
    std::string feature;
    ProjectionMode mode = ProjectionMode::contextual;
    std::vector<std::string> low;
    std::vector<std::string> high;
};

struct AnchorConfig {
    std::vector<AnchorEntry> entries;

    const AnchorEntry& find(const std::string& context, const std::string& feature,
                            ProjectionMode mode) const {
        for (const auto& e : entries)
            if (e.context == context && e.feature == feature && e.mode == mode)
                return e;
        throw std::runtime_error("no anchors for feature \"" + feature +
                                 "\" (context " + context + ", " + to_string(mode) + ")");
    }

    std::vector<std::string> features_for(const std::string& context,
                                          ProjectionMode mode) const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (e.context == context && e.mode == mode) out.push_back(e.feature);
        return out;
    }
};

inline AnchorConfig parse_anchor_config(const json& j) {
    if (!j.is_array()) throw std::runtime_error("anchor config must be a JSON array");
    AnchorConfig cfg;
    for (const auto& e : j) {
        AnchorEntry a;
        a.context = e.at("context").get<std::string>();
        a.feature = e.at("feature").get<std::string>();
        a.mode = projection_mode_from_string(e.at("mode").get<std::string>());
        a.low = e.at("low").get<std::vector<std::string>>();
        a.high = e.at("high").get<std::vector<std::string>>();
        if (a.low.size() != 3 || a.high.size() != 3)
            throw std::runtime_error("anchor entry \"" + a.feature +
                                     "\" must list exactly 3 low and 3 high anchors");
        cfg.entries.push_back(std::move(a));
    }
    return cfg;
}

inline AnchorConfig load_anchor_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open anchor config: " + path);
    return parse_anchor_config(json::parse(in));
}

inline json anchor_config_to_json(const AnchorConfig& cfg) {
    json j = json::array();
    for (const auto& e : cfg.entries)
        j.push_back({{"context", e.context},
                     {"feature", e.feature},
                     {"mode", to_string(e.mode)},
                     {"low", e.low},
                     {"high", e.high}});
    return j;
}

inline std::vector<FeatureAxis> build_axes(const EmbeddingSpace& s,
                                           const AnchorConfig& cfg,
                                           const std::string& context,
                                           ProjectionMode mode) {
    std::vector<FeatureAxis> axes;
    for (const auto& e : cfg.entries)
        if (e.context == context && e.mode == mode)
            axes.push_back(build_axis(s, e.low, e.high, e.feature, mode));
    if (axes.empty())
        throw std::runtime_error("anchor config has no entries for context \"" +
                                 context + "\" in " + to_string(mode) + " mode");
    return axes;
}

} // namespace ctxsem
