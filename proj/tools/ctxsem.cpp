// ctxsem - contextually-constrained embedding pipeline:
// corpus construction, SGNS training sweeps, semantic projection and
// evaluation against human judgments.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctxsem/anchors_default.hpp"
#include "ctxsem/corpus.hpp"
#include "ctxsem/embedding.hpp"
#include "ctxsem/eval.hpp"
#include "ctxsem/projection.hpp"
#include "ctxsem/sgns.hpp"
#include "ctxsem/similarity.hpp"

namespace fs = std::filesystem;
using ctxsem::json;

namespace {

// usage/config problems exit with code 2, runtime failures with 1
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " not specified");
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

// Removes every tracked output unless the command completed.
struct OutputGuard {
    std::vector<fs::path> paths;
    bool committed = false;

    std::string track(const std::string& p) {
        paths.emplace_back(p);
        return p;
    }
    void commit() { committed = true; }
    ~OutputGuard() {
        if (committed) return;
        for (const auto& p : paths) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    require_file(path, "config file");
    std::ifstream in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse config " + path + ": " + e.what());
    }
}

const json* find_section(const json& cfg, const std::string& key) {
    auto it = cfg.find(key);
    return it == cfg.end() ? nullptr : &*it;
}

// Flags win over config values; config values win over defaults.
template <typename T>
void cfg_override(const CLI::Option* opt, const json& section, const std::string& key,
                  T& var) {
    if (opt != nullptr && opt->count() > 0) return;
    if (auto it = section.find(key); it != section.end()) {
        try {
            var = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key \"" + key + "\" has the wrong type");
        }
    }
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& chunk : raw) {
        std::size_t start = 0;
        while (start <= chunk.size()) {
            std::size_t pos = chunk.find(',', start);
            std::string piece = chunk.substr(
                start, pos == std::string::npos ? std::string::npos : pos - start);
            if (!piece.empty()) out.push_back(piece);
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
    }
    return out;
}

std::vector<int> int_list(const std::vector<std::string>& raw, const char* what) {
    std::vector<int> out;
    for (const auto& s : split_list(raw)) {
        try {
            out.push_back(std::stoi(s));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": not an integer: " + s);
        }
    }
    return out;
}

// Corpora live as <prefix>.txt plus <prefix>.json; accept either the prefix
// or the .txt path.
std::pair<std::string, std::string> corpus_paths(const std::string& arg) {
    std::string prefix = arg;
    if (prefix.size() > 4 && prefix.substr(prefix.size() - 4) == ".txt")
        prefix = prefix.substr(0, prefix.size() - 4);
    return {prefix + ".txt", prefix + ".json"};
}

ctxsem::Corpus load_corpus_arg(const std::string& arg, const std::string& what) {
    auto [txt, side] = corpus_paths(arg);
    require_file(txt, what);
    require_file(side, what + " sidecar");
    return ctxsem::load_corpus(txt, side);
}

ctxsem::EmbeddingSpace load_vectors_any(const std::string& path) {
    require_file(path, "vector file");
    std::ifstream probe(path, std::ios::binary);
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    if (probe.gcount() == 4 && std::string(magic, 4) == "CSEM")
        return ctxsem::load_vectors_binary(path);
    return ctxsem::load_vectors_text(path);
}

ctxsem::AnchorConfig load_anchors_arg(const std::string& path) {
    if (path.empty()) return ctxsem::default_anchor_config();
    require_file(path, "anchor config");
    return ctxsem::load_anchor_config(path);
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// shared option state
// ---------------------------------------------------------------------------

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* out_opt = nullptr;

    json config;

    void load() {
        config = load_config(config_path);
        cfg_override(seed_opt, config, "seed", seed);
        cfg_override(threads_opt, config, "threads", threads);
        cfg_override(out_opt, config, "out", out);
    }
};

// ---------------------------------------------------------------------------
// corpus subcommands
// ---------------------------------------------------------------------------

struct CorpusBuildOpts {
    std::string articles, edges, context_name;
    std::vector<std::string> include, exclude, other_context;
    std::uint64_t cap = 0;
    CLI::Option *articles_opt{}, *edges_opt{}, *include_opt{}, *exclude_opt{},
        *other_opt{}, *cap_opt{};
};

void run_corpus_build(GlobalOpts& g, CorpusBuildOpts& o) {
    cfg_override(o.articles_opt, g.config, "articles", o.articles);
    cfg_override(o.edges_opt, g.config, "edges", o.edges);
    if (!o.context_name.empty()) {
        if (const json* contexts = find_section(g.config, "contexts")) {
            auto it = contexts->find(o.context_name);
            if (it == contexts->end())
                throw ConfigError("config has no context named \"" + o.context_name + "\"");
            cfg_override(o.include_opt, *it, "include", o.include);
            cfg_override(o.exclude_opt, *it, "exclude", o.exclude);
            cfg_override(o.other_opt, *it, "other_context", o.other_context);
            cfg_override(o.cap_opt, *it, "cap", o.cap);
        }
    }
    require_file(o.articles, "article file");
    require_file(o.edges, "category edge file");
    if (o.include.empty()) throw ConfigError("at least one --include root is required");
    if (g.out.empty()) throw ConfigError("--out prefix is required");

    ctxsem::IngestResult in = ctxsem::ingest_articles(o.articles, o.edges);
    ctxsem::ContextSpec spec;
    spec.include_roots = split_list(o.include);
    spec.exclude_roots = split_list(o.exclude);
    if (!o.other_context.empty()) {
        ctxsem::ContextSpec other;
        other.include_roots = split_list(o.other_context);
        for (const auto& id : ctxsem::collect_context_articles(in.graph, in.store, other))
            spec.other_context_ids.insert(id);
    }
    if (o.cap > 0) spec.target_tokens = o.cap;

    std::set<std::string> ids = ctxsem::collect_context_articles(in.graph, in.store, spec);
    ctxsem::Corpus corpus = ctxsem::build_corpus(in.store, ids, spec.target_tokens);

    json extra;
    extra["context"] = o.context_name;
    extra["include_roots"] = spec.include_roots;
    extra["exclude_roots"] = spec.exclude_roots;
    extra["subtracted_articles"] = spec.other_context_ids.size();

    OutputGuard guard;
    auto [txt, side] = corpus_paths(g.out);
    ctxsem::save_corpus(corpus, guard.track(txt), guard.track(side), extra);
    guard.commit();
    std::cout << "wrote " << txt << " (" << corpus.token_count() << " tokens, "
              << corpus.article_count() << " articles)\n";
}

struct CorpusMixOpts {
    std::string a, b;
    double fraction = 0.5;
    CLI::Option* fraction_opt{};
};

void run_corpus_mix(GlobalOpts& g, CorpusMixOpts& o) {
    if (const json* mix = find_section(g.config, "mix"))
        cfg_override(o.fraction_opt, *mix, "fraction", o.fraction);
    if (g.out.empty()) throw ConfigError("--out prefix is required");
    ctxsem::Corpus a = load_corpus_arg(o.a, "corpus A");
    ctxsem::Corpus b = load_corpus_arg(o.b, "corpus B");

    ctxsem::MixInfo info;
    ctxsem::Corpus mixed = ctxsem::mix_corpora(a, b, o.fraction, g.seed, &info);

    json extra;
    extra["mix"] = {{"fraction", info.fraction},
                    {"seed", info.seed},
                    {"tokens_from_a", info.tokens_from_a},
                    {"tokens_from_b", info.tokens_from_b},
                    {"articles_from_a", info.articles_from_a},
                    {"articles_from_b", info.articles_from_b}};

    OutputGuard guard;
    auto [txt, side] = corpus_paths(g.out);
    ctxsem::save_corpus(mixed, guard.track(txt), guard.track(side), extra);
    guard.commit();
    std::cout << "wrote " << txt << " (" << info.tokens_from_a << " tokens from A, "
              << info.tokens_from_b << " from B)\n";
}

struct CorpusMatchOpts {
    std::string source, reference;
    std::vector<std::string> targets;
    std::string targets_file;
    CLI::Option* targets_opt{};
};

void run_corpus_match(GlobalOpts& g, CorpusMatchOpts& o) {
    if (const json* match = find_section(g.config, "match"))
        cfg_override(o.targets_opt, *match, "targets", o.targets);
    if (!o.targets_file.empty()) {
        require_file(o.targets_file, "target word file");
        std::ifstream in(o.targets_file);
        std::string w;
        while (in >> w) o.targets.push_back(w);
    }
    std::vector<std::string> targets = split_list(o.targets);
    if (targets.empty()) throw ConfigError("no target words given");
    if (g.out.empty()) throw ConfigError("--out prefix is required");

    ctxsem::Corpus source = load_corpus_arg(o.source, "source corpus");
    ctxsem::Corpus reference = load_corpus_arg(o.reference, "reference corpus");
    ctxsem::Corpus matched = ctxsem::frequency_match(source, reference, targets, g.seed);

    json extra;
    extra["frequency_match"] = {{"reference_counts", ctxsem::count_occurrences(reference, targets)},
                                {"seed", g.seed}};

    OutputGuard guard;
    auto [txt, side] = corpus_paths(g.out);
    ctxsem::save_corpus(matched, guard.track(txt), guard.track(side), extra);
    guard.commit();
    std::cout << "wrote " << txt << " (" << matched.token_count() << " tokens)\n";
}

struct CorpusStatsOpts {
    std::string corpus;
    std::vector<std::string> words;
};

void run_corpus_stats(GlobalOpts&, CorpusStatsOpts& o) {
    ctxsem::Corpus c = load_corpus_arg(o.corpus, "corpus");
    json out;
    out["token_count"] = c.token_count();
    out["article_count"] = c.article_count();
    std::vector<std::string> words = split_list(o.words);
    if (!words.empty()) out["word_counts"] = ctxsem::count_occurrences(c, words);
    std::cout << out.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string corpus;
    std::vector<std::string> windows{"9"}, dims{"100"},
        seeds{"0,1,2,3,4,5,6,7,8,9"};
    double learning_rate = 0.025;
    std::uint64_t min_count = 5;
    double subsample_t = 1e-3;
    int negatives = 5;
    double neg_exponent = 0.75;
    int iterations = 5;
    bool dynamic_window = false;
    bool binary = false;
    CLI::Option *corpus_opt{}, *windows_opt{}, *dims_opt{}, *seeds_opt{}, *lr_opt{},
        *min_count_opt{}, *subsample_opt{}, *negatives_opt{}, *neg_exp_opt{},
        *iterations_opt{}, *dynamic_opt{};
};

void run_train(GlobalOpts& g, TrainOpts& o) {
    json train_cfg = json::object();
    if (const json* t = find_section(g.config, "train")) train_cfg = *t;
    cfg_override(o.corpus_opt, train_cfg, "corpus", o.corpus);
    cfg_override(o.windows_opt, train_cfg, "windows", o.windows);
    cfg_override(o.dims_opt, train_cfg, "dims", o.dims);
    cfg_override(o.seeds_opt, train_cfg, "seeds", o.seeds);
    cfg_override(o.lr_opt, train_cfg, "learning_rate", o.learning_rate);
    cfg_override(o.min_count_opt, train_cfg, "min_count", o.min_count);
    cfg_override(o.subsample_opt, train_cfg, "subsample_t", o.subsample_t);
    cfg_override(o.negatives_opt, train_cfg, "negatives", o.negatives);
    cfg_override(o.neg_exp_opt, train_cfg, "neg_exponent", o.neg_exponent);
    cfg_override(o.iterations_opt, train_cfg, "iterations", o.iterations);
    cfg_override(o.dynamic_opt, train_cfg, "dynamic_window", o.dynamic_window);

    std::vector<int> windows = int_list(o.windows, "--windows");
    std::vector<int> dims = int_list(o.dims, "--dims");
    std::vector<int> seeds = int_list(o.seeds, "--seeds");
    if (windows.empty() || dims.empty()) throw ConfigError("empty window/dim grid");
    if (seeds.empty()) throw ConfigError("empty seed list");
    if (g.out.empty()) throw ConfigError("--out directory is required");

    ctxsem::Corpus corpus = load_corpus_arg(o.corpus, "training corpus");
    fs::create_directories(g.out);

    OutputGuard guard;
    json manifest;
    manifest["corpus"] = o.corpus;
    manifest["hyperparameters"] = {
        {"learning_rate", o.learning_rate}, {"min_count", o.min_count},
        {"subsample_t", o.subsample_t},     {"negatives", o.negatives},
        {"neg_exponent", o.neg_exponent},   {"iterations", o.iterations},
        {"dynamic_window", o.dynamic_window}};
    manifest["runs"] = json::array();

    for (int window : windows)
        for (int dim : dims)
            for (int seed : seeds) {
                ctxsem::TrainConfig cfg;
                cfg.window = window;
                cfg.dim = dim;
                cfg.learning_rate = o.learning_rate;
                cfg.min_count = o.min_count;
                cfg.subsample_t = o.subsample_t;
                cfg.negatives = o.negatives;
                cfg.neg_exponent = o.neg_exponent;
                cfg.iterations = o.iterations;
                cfg.dynamic_window = o.dynamic_window;
                cfg.seed = static_cast<std::uint64_t>(seed);

                ctxsem::EmbeddingSpace space = ctxsem::train_sgns(corpus, cfg, g.threads);
                std::string name = "vectors_w" + std::to_string(window) + "_d" +
                                   std::to_string(dim) + "_s" + std::to_string(seed) +
                                   (o.binary ? ".bin" : ".txt");
                std::string path = (fs::path(g.out) / name).string();
                if (o.binary)
                    ctxsem::save_vectors_binary(space, guard.track(path));
                else
                    ctxsem::save_vectors_text(space, guard.track(path));
                manifest["runs"].push_back({{"window", window},
                                            {"dim", dim},
                                            {"seed", seed},
                                            {"path", name},
                                            {"vocabulary", space.vocab.size()}});
                std::cout << "trained " << name << " (|V|=" << space.vocab.size()
                          << ")\n";
            }

    std::string manifest_path = (fs::path(g.out) / "manifest.json").string();
    write_json_file(guard.track(manifest_path), manifest);
    guard.commit();
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

struct ProjectOpts {
    std::vector<std::string> vectors;
    std::vector<std::string> items;
    std::string context, mode = "contextual", anchors, ratings_csv, report_path;
    std::string dump_anchors;
    int n_boot = 1000;
    CLI::Option *items_opt{}, *anchors_opt{}, *nboot_opt{};
};

std::vector<std::string> resolve_items(const json& config, const std::string& context,
                                       const CLI::Option* items_opt,
                                       std::vector<std::string>& items_raw) {
    if ((items_opt == nullptr || items_opt->count() == 0) && !context.empty()) {
        if (const json* items = find_section(config, "items")) {
            auto it = items->find(context);
            if (it != items->end()) items_raw = it->get<std::vector<std::string>>();
        }
    }
    return split_list(items_raw);
}

void run_project(GlobalOpts& g, ProjectOpts& o) {
    if (!o.dump_anchors.empty()) {
        OutputGuard guard;
        write_json_file(guard.track(o.dump_anchors),
                        ctxsem::anchor_config_to_json(ctxsem::default_anchor_config()));
        guard.commit();
        std::cout << "wrote " << o.dump_anchors << '\n';
        return;
    }
    cfg_override(o.anchors_opt, g.config, "anchors", o.anchors);
    cfg_override(o.nboot_opt, g.config, "n_boot", o.n_boot);
    std::vector<std::string> items = resolve_items(g.config, o.context, o.items_opt, o.items);
    if (o.vectors.empty()) throw ConfigError("--vectors is required");
    if (items.empty()) throw ConfigError("no items given");
    if (o.context.empty()) throw ConfigError("--context is required");
    if (g.out.empty() && o.ratings_csv.empty())
        throw ConfigError("nothing to do: give --out for the ratings matrix and/or "
                          "--ratings to evaluate against human feature ratings");

    ctxsem::AnchorConfig anchors = load_anchors_arg(o.anchors);
    ctxsem::ProjectionMode mode = ctxsem::projection_mode_from_string(o.mode);
    if (anchors.features_for(o.context, mode).empty())
        throw ConfigError("anchor config has no entries for context \"" + o.context +
                          "\" in " + o.mode + " mode");

    // mean projected ratings across the given spaces (ensemble over seeds)
    std::vector<ctxsem::RatingsMatrix> per_space;
    for (const auto& vp : o.vectors) {
        ctxsem::EmbeddingSpace space = load_vectors_any(vp);
        auto axes = ctxsem::build_axes(space, anchors, o.context, mode);
        per_space.push_back(ctxsem::project_items(space, items, axes));
    }
    ctxsem::RatingsMatrix mean_ratings = per_space[0];
    for (std::size_t s = 1; s < per_space.size(); ++s)
        for (std::size_t i = 0; i < mean_ratings.values.size(); ++i)
            mean_ratings.values[i] += per_space[s].values[i];
    for (auto& v : mean_ratings.values) v /= static_cast<double>(per_space.size());

    OutputGuard guard;
    if (!g.out.empty()) {
        std::ofstream out(guard.track(g.out));
        if (!out) throw std::runtime_error("cannot write " + g.out);
        out << "item";
        for (const auto& f : mean_ratings.features) out << ',' << f;
        out << '\n';
        char buf[40];
        for (std::size_t i = 0; i < mean_ratings.items.size(); ++i) {
            out << mean_ratings.items[i];
            for (std::size_t k = 0; k < mean_ratings.features.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.9g", mean_ratings.at(i, k));
                out << ',' << buf;
            }
            out << '\n';
        }
    }

    // optional: correlate projected ratings with human feature ratings
    if (!o.ratings_csv.empty()) {
        require_file(o.ratings_csv, "feature ratings file");
        ctxsem::JudgmentSet raw = ctxsem::load_feature_ratings(o.ratings_csv, o.context);
        ctxsem::JudgmentSet filtered = ctxsem::filter_participants(raw);
        ctxsem::RatingsMatrix human =
            ctxsem::mean_feature_truth(filtered, items, mean_ratings.features);

        json features = json::object();
        for (std::size_t k = 0; k < mean_ratings.features.size(); ++k) {
            std::vector<double> model(items.size()), truth(items.size());
            for (std::size_t i = 0; i < items.size(); ++i) {
                model[i] = mean_ratings.at(i, k);
                truth[i] = human.at(i, k);
            }
            ctxsem::BootstrapStats b =
                ctxsem::bootstrap_statistics(model, truth, o.n_boot, g.seed);
            features[mean_ratings.features[k]] = {{"r_mean", b.r_mean},
                                                  {"ci95", {b.ci_lo, b.ci_hi}},
                                                  {"r_full", b.r_full}};
        }
        json report{{"context", o.context},
                    {"mode", o.mode},
                    {"n_boot", o.n_boot},
                    {"seed", g.seed},
                    {"ensemble", o.vectors.size()},
                    {"features", features}};
        std::string path = o.report_path.empty() ? "feature_report.json" : o.report_path;
        write_json_file(guard.track(path), report);
        std::cout << "wrote " << path << '\n';
    }
    guard.commit();
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

const std::vector<std::string> kEvalMethods{"cosine", "subspace-cosine",
                                            "proj-regression", "rawdim-regression"};

struct EvalOpts {
    std::vector<std::string> vectors;
    std::string manifest;
    std::vector<std::string> items;
    std::string judgments, context, anchors, mode = "contextual";
    std::vector<std::string> methods{"cosine"};
    std::string correlation = "pearson";
    std::string pair_feature = "abs";
    int n_boot = 1000;
    double filter_threshold = 0.5;
    bool plot_csv = false;
    bool no_reliability = false;
    CLI::Option *items_opt{}, *judgments_opt{}, *anchors_opt{}, *methods_opt{},
        *nboot_opt{}, *corr_opt{};
};

void run_eval(GlobalOpts& g, EvalOpts& o) {
    cfg_override(o.judgments_opt, g.config, "judgments", o.judgments);
    cfg_override(o.anchors_opt, g.config, "anchors", o.anchors);
    cfg_override(o.methods_opt, g.config, "methods", o.methods);
    cfg_override(o.nboot_opt, g.config, "n_boot", o.n_boot);
    cfg_override(o.corr_opt, g.config, "correlation", o.correlation);
    std::vector<std::string> items = resolve_items(g.config, o.context, o.items_opt, o.items);

    std::vector<std::string> methods = split_list(o.methods);
    for (const auto& m : methods)
        if (std::find(kEvalMethods.begin(), kEvalMethods.end(), m) == kEvalMethods.end()) {
            std::string valid;
            for (const auto& v : kEvalMethods) valid += (valid.empty() ? "" : ", ") + v;
            throw ConfigError("unknown method \"" + m + "\" (valid: " + valid + ")");
        }
    if (methods.empty()) throw ConfigError("no methods requested");
    if (items.size() < 3) throw ConfigError("need at least 3 items");
    if (g.out.empty()) throw ConfigError("--out directory is required");

    std::vector<std::string> vector_paths = o.vectors;
    if (!o.manifest.empty()) {
        require_file(o.manifest, "manifest");
        std::ifstream in(o.manifest);
        json manifest = json::parse(in);
        fs::path dir = fs::path(o.manifest).parent_path();
        for (const auto& run : manifest.at("runs"))
            vector_paths.push_back((dir / run.at("path").get<std::string>()).string());
    }
    if (vector_paths.empty()) throw ConfigError("--vectors or --manifest is required");

    require_file(o.judgments, "judgments file");
    if (o.correlation != "pearson" && o.correlation != "spearman")
        throw ConfigError("unknown correlation method \"" + o.correlation +
                          "\" (valid: pearson, spearman)");
    ctxsem::CorrelationMethod corr = ctxsem::correlation_method_from_string(o.correlation);
    ctxsem::PairFeature pair_feature = o.pair_feature == "squared"
                                           ? ctxsem::PairFeature::squared_diff
                                           : ctxsem::PairFeature::abs_diff;

    // human truth
    ctxsem::JudgmentSet raw = ctxsem::load_pair_judgments(o.judgments, o.context);
    if (raw.responses.empty())
        throw ConfigError("judgments file has no rows for context \"" + o.context + "\"");
    ctxsem::JudgmentSet filtered = ctxsem::filter_participants(raw, o.filter_threshold);
    ctxsem::PairScores truth = ctxsem::mean_pair_truth(filtered, items);

    // anchors are only needed by the projection-based methods
    bool needs_anchors =
        std::find(methods.begin(), methods.end(), "proj-regression") != methods.end() ||
        std::find(methods.begin(), methods.end(), "subspace-cosine") != methods.end();
    ctxsem::AnchorConfig anchors;
    ctxsem::ProjectionMode mode = ctxsem::projection_mode_from_string(o.mode);
    if (needs_anchors) {
        anchors = load_anchors_arg(o.anchors);
        if (anchors.features_for(o.context, mode).empty())
            throw ConfigError("anchor config has no entries for context \"" + o.context +
                              "\" in " + o.mode + " mode");
    }

    // per-space predictions, ensembled per method
    std::map<std::string, std::vector<ctxsem::PairScores>> runs;
    for (const auto& vp : vector_paths) {
        ctxsem::EmbeddingSpace space = load_vectors_any(vp);
        std::optional<ctxsem::RatingsMatrix> ratings;
        if (needs_anchors) {
            auto axes = ctxsem::build_axes(space, anchors, o.context, mode);
            ratings = ctxsem::project_items(space, items, axes);
        }
        for (const auto& m : methods) {
            ctxsem::PairScores ps;
            if (m == "cosine") {
                ps = ctxsem::predict_cosine(space, items, o.context);
            } else if (m == "subspace-cosine") {
                ps = ctxsem::predict_subspace_cosine(*ratings, items, o.context);
            } else if (m == "proj-regression") {
                ps = ctxsem::loocv_projection_regression(*ratings, truth, pair_feature);
            } else {
                ps = ctxsem::loocv_rawdim_regression(space, items, truth, pair_feature);
            }
            ps.context = o.context;
            ps.seed_info = std::to_string(space.seed);
            runs[m].push_back(std::move(ps));
        }
    }

    fs::create_directories(g.out);
    OutputGuard guard;

    std::map<std::string, ctxsem::PairScores> ensembles;
    for (const auto& m : methods) ensembles.emplace(m, ctxsem::ensemble_mean(runs[m]));

    // paired comparisons between every two requested methods
    std::map<std::string, double> p_values;
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            double p = ctxsem::compare_models(ensembles.at(methods[i]),
                                              ensembles.at(methods[j]), truth,
                                              o.n_boot, g.seed, corr);
            p_values[methods[i] + ">" + methods[j]] = p;
        }

    std::optional<std::pair<double, double>> reliability;
    json reports = json::object();
    for (const auto& m : methods) {
        const ctxsem::PairScores& pred = ensembles.at(m);
        ctxsem::BootstrapStats b =
            ctxsem::bootstrap_statistics(pred, truth, o.n_boot, g.seed, corr);
        ctxsem::EvalReport rep;
        rep.method = m;
        rep.r_mean = b.r_mean;
        rep.ci95 = {b.ci_lo, b.ci_hi};
        rep.n_boot = o.n_boot;
        rep.seed = g.seed;
        rep.p_values = p_values;
        if (!o.no_reliability) {
            if (!reliability)
                reliability = ctxsem::reliability_ceiling(filtered, b.r_mean);
            rep.reliability_ceiling = reliability->first;
            rep.reliability_fraction = b.r_mean / reliability->first;
        }
        reports[m] = rep.to_json();

        std::string csv = (fs::path(g.out) / ("predictions_" + m + ".csv")).string();
        ctxsem::save_pair_scores_csv(pred, guard.track(csv));
    }

    {
        std::string csv = (fs::path(g.out) / "truth.csv").string();
        ctxsem::save_pair_scores_csv(truth, guard.track(csv));
    }

    json report{{"context", o.context},
                {"items", items},
                {"correlation", o.correlation},
                {"n_boot", o.n_boot},
                {"seed", g.seed},
                {"ensemble", vector_paths.size()},
                {"retained_participants", filtered.retained_participants.size()},
                {"methods", reports},
                {"p_values", p_values}};
    std::string report_path = (fs::path(g.out) / "report.json").string();
    write_json_file(guard.track(report_path), report);

    if (o.plot_csv) {
        std::string plot_path = (fs::path(g.out) / "plot.csv").string();
        std::ofstream plot(guard.track(plot_path));
        plot << "context,method,r_mean,ci_lo,ci_hi\n";
        char buf[128];
        for (const auto& m : methods) {
            const json& r = reports[m];
            std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%.9g\n", o.context.c_str(),
                          m.c_str(), r["r_mean"].get<double>(),
                          r["ci95"][0].get<double>(), r["ci95"][1].get<double>());
            plot << buf;
        }
    }
    guard.commit();
    std::cout << "wrote " << report_path << '\n';
}

// ---------------------------------------------------------------------------
// report: merge eval reports into plot-ready CSV bars
// ---------------------------------------------------------------------------

struct ReportOpts {
    std::vector<std::string> reports;
};

void run_report(GlobalOpts& g, ReportOpts& o) {
    if (o.reports.empty()) throw ConfigError("no report files given");
    if (g.out.empty()) throw ConfigError("--out file is required");
    OutputGuard guard;
    std::ofstream out(guard.track(g.out));
    if (!out) throw std::runtime_error("cannot write " + g.out);
    out << "source,context,method,r_mean,ci_lo,ci_hi\n";
    char buf[160];
    for (const auto& path : o.reports) {
        require_file(path, "report file");
        std::ifstream in(path);
        json rep = json::parse(in);
        std::string source = fs::path(path).parent_path().filename().string();
        if (source.empty()) source = path;
        for (const auto& [method, r] : rep.at("methods").items()) {
            std::snprintf(buf, sizeof buf, "%s,%s,%s,%.9g,%.9g,%.9g\n", source.c_str(),
                          rep.value("context", std::string{}).c_str(), method.c_str(),
                          r.at("r_mean").get<double>(), r.at("ci95")[0].get<double>(),
                          r.at("ci95")[1].get<double>());
            out << buf;
        }
    }
    guard.commit();
    std::cout << "wrote " << g.out << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"contextually-constrained word embedding pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config JSON");
    g.seed_opt = app.add_option("--seed", g.seed, "base random seed");
    g.threads_opt = app.add_option("--threads", g.threads, "worker threads (1 = deterministic)");
    g.out_opt = app.add_option("--out", g.out, "output path or directory");

    CLI::App* corpus = app.add_subcommand("corpus", "corpus construction");
    corpus->require_subcommand(1);
    corpus->fallthrough();

    CorpusBuildOpts build_o;
    CLI::App* build = corpus->add_subcommand("build", "build a context-restricted corpus");
    build->fallthrough();
    build_o.articles_opt = build->add_option("--articles", build_o.articles, "JSONL article file");
    build_o.edges_opt = build->add_option("--edges", build_o.edges, "TSV category edges");
    build->add_option("--context", build_o.context_name, "context name (config lookup key)");
    build_o.include_opt = build->add_option("--include", build_o.include, "root categories to include");
    build_o.exclude_opt = build->add_option("--exclude", build_o.exclude, "root categories to exclude");
    build_o.other_opt = build->add_option("--other-context", build_o.other_context,
                                          "roots whose reachable articles are subtracted");
    build_o.cap_opt = build->add_option("--cap", build_o.cap, "token cap (whole articles)");
    build->callback([&] { g.load(); run_corpus_build(g, build_o); });

    CorpusMixOpts mix_o;
    CLI::App* mix = corpus->add_subcommand("mix", "mix two corpora by whole articles");
    mix->fallthrough();
    mix->add_option("--a", mix_o.a, "first corpus (prefix or .txt)")->required();
    mix->add_option("--b", mix_o.b, "second corpus (prefix or .txt)")->required();
    mix_o.fraction_opt = mix->add_option("--fraction", mix_o.fraction,
                                         "share taken from each corpus (A: f, B: 1-f)");
    mix->callback([&] { g.load(); run_corpus_mix(g, mix_o); });

    CorpusMatchOpts match_o;
    CLI::App* match = corpus->add_subcommand("match", "frequency-match target words to a reference");
    match->fallthrough();
    match->add_option("--source", match_o.source, "corpus to subsample")->required();
    match->add_option("--reference", match_o.reference, "corpus whose counts to match")->required();
    match_o.targets_opt = match->add_option("--targets", match_o.targets, "target words (comma lists ok)");
    match->add_option("--targets-file", match_o.targets_file, "file with one target word per line");
    match->callback([&] { g.load(); run_corpus_match(g, match_o); });

    CorpusStatsOpts stats_o;
    CLI::App* stats = corpus->add_subcommand("stats", "print corpus statistics");
    stats->fallthrough();
    stats->add_option("--corpus", stats_o.corpus, "corpus (prefix or .txt)")->required();
    stats->add_option("--words", stats_o.words, "words to count (comma lists ok)");
    stats->callback([&] { g.load(); run_corpus_stats(g, stats_o); });

    TrainOpts train_o;
    CLI::App* train = app.add_subcommand("train", "train SGNS spaces over a grid of settings");
    train->fallthrough();
    train_o.corpus_opt = train->add_option("--corpus", train_o.corpus, "training corpus (prefix or .txt)");
    train_o.windows_opt = train->add_option("--windows", train_o.windows, "window sizes (comma lists ok)");
    train_o.dims_opt = train->add_option("--dims", train_o.dims, "dimensionalities");
    train_o.seeds_opt = train->add_option("--seeds", train_o.seeds, "initialization seeds");
    train_o.lr_opt = train->add_option("--lr", train_o.learning_rate, "initial learning rate");
    train_o.min_count_opt = train->add_option("--min-count", train_o.min_count, "vocabulary count floor");
    train_o.subsample_opt = train->add_option("--subsample", train_o.subsample_t,
                                              "frequent-word downsampling threshold");
    train_o.negatives_opt = train->add_option("--negatives", train_o.negatives, "negative samples per pair");
    train_o.neg_exp_opt = train->add_option("--neg-exponent", train_o.neg_exponent,
                                            "negative sampling distribution exponent");
    train_o.iterations_opt = train->add_option("--iterations", train_o.iterations, "training passes");
    train_o.dynamic_opt = train->add_flag("--dynamic-window", train_o.dynamic_window,
                                          "shrink the window uniformly at random per token");
    train->add_flag("--binary", train_o.binary, "write binary caches instead of text vectors");
    train->callback([&] { g.load(); run_train(g, train_o); });

    ProjectOpts project_o;
    CLI::App* project = app.add_subcommand("project", "project items onto feature axes");
    project->fallthrough();
    project->add_option("--vectors", project_o.vectors, "vector files (repeatable; ensemble-averaged)");
    project_o.items_opt = project->add_option("--items", project_o.items, "test items (comma lists ok)");
    project->add_option("--context", project_o.context, "semantic context name");
    project->add_option("--mode", project_o.mode, "contextual or adjective")
        ->check(CLI::IsMember({"contextual", "adjective"}));
    project_o.anchors_opt = project->add_option("--anchors", project_o.anchors,
                                                "anchor config JSON (default: built-in tables)");
    project->add_option("--ratings", project_o.ratings_csv,
                        "human feature ratings CSV to evaluate against");
    project->add_option("--report", project_o.report_path, "feature report output path");
    project_o.nboot_opt = project->add_option("--n-boot", project_o.n_boot, "bootstrap resamples");
    project->add_option("--dump-anchors", project_o.dump_anchors,
                        "write the built-in anchor tables to this path and exit");
    project->callback([&] { g.load(); run_project(g, project_o); });

    EvalOpts eval_o;
    CLI::App* eval = app.add_subcommand("eval", "evaluate predictions against human judgments");
    eval->fallthrough();
    eval->add_option("--vectors", eval_o.vectors, "vector files (repeatable; ensemble)");
    eval->add_option("--manifest", eval_o.manifest, "train manifest listing vector files");
    eval_o.items_opt = eval->add_option("--items", eval_o.items, "test items (comma lists ok)");
    eval_o.judgments_opt = eval->add_option("--judgments", eval_o.judgments, "pair judgments CSV");
    eval->add_option("--context", eval_o.context, "semantic context name");
    eval_o.methods_opt = eval->add_option("--methods", eval_o.methods,
                                          "cosine, subspace-cosine, proj-regression, rawdim-regression");
    eval_o.anchors_opt = eval->add_option("--anchors", eval_o.anchors, "anchor config JSON");
    eval->add_option("--mode", eval_o.mode, "projection mode")
        ->check(CLI::IsMember({"contextual", "adjective"}));
    eval_o.corr_opt = eval->add_option("--correlation", eval_o.correlation, "pearson or spearman")
                          ->check(CLI::IsMember({"pearson", "spearman"}));
    eval_o.nboot_opt = eval->add_option("--n-boot", eval_o.n_boot, "bootstrap resamples");
    eval->add_option("--pair-feature", eval_o.pair_feature,
                     "pair featurization for the regression methods")
        ->check(CLI::IsMember({"abs", "squared"}));
    eval->add_option("--filter-threshold", eval_o.filter_threshold,
                     "participant leave-one-out correlation floor");
    eval->add_flag("--plot-csv", eval_o.plot_csv, "also emit plot.csv with bars and CI bounds");
    eval->add_flag("--no-reliability", eval_o.no_reliability, "skip the inter-rater ceiling");
    eval->callback([&] { g.load(); run_eval(g, eval_o); });

    ReportOpts report_o;
    CLI::App* report = app.add_subcommand("report", "merge eval reports into a plot-data CSV");
    report->fallthrough();
    report->add_option("reports", report_o.reports, "report.json files");
    report->callback([&] { g.load(); run_report(g, report_o); });

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
