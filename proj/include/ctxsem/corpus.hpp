#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "ctxsem/rng.hpp"

namespace ctxsem {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenization: lowercase, any character outside [a-z0-9] separates tokens.
// ---------------------------------------------------------------------------

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// ---------------------------------------------------------------------------
// Articles and category graph
// ---------------------------------------------------------------------------

struct ArticleRecord {
    std::string id;
    std::string title;
    std::string text;
    std::set<std::string> categories;
};

struct ArticleStore {
    std::vector<ArticleRecord> records;
    std::unordered_map<std::string, std::size_t> by_id;

    void add(ArticleRecord rec) {
        if (by_id.count(rec.id))
            throw std::runtime_error("duplicate article id: " + rec.id);
        by_id.emplace(rec.id, records.size());
        records.push_back(std::move(rec));
    }

    bool contains(const std::string& id) const { return by_id.count(id) > 0; }

    const ArticleRecord& get(const std::string& id) const {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::runtime_error("unknown article id: " + id);
        return records[it->second];
    }
};

// Wikipedia's category "tree" is really a directed graph and may contain
// cycles; every traversal below runs with a visited set.
struct CategoryGraph {
    std::map<std::string, std::set<std::string>> edges;       // parent -> children
    std::map<std::string, std::set<std::string>> membership;  // category -> article ids
    std::set<std::string> categories;

    void add_edge(const std::string& parent, const std::string& child) {
        edges[parent].insert(child);
        categories.insert(parent);
        categories.insert(child);
    }

    void add_member(const std::string& category, const std::string& article_id) {
        membership[category].insert(article_id);
        categories.insert(category);
    }

    bool has_category(const std::string& name) const {
        return categories.count(name) > 0;
    }
};

inline ArticleStore load_articles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open article file: " + path);
    ArticleStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed article record: " + e.what());
        }
        auto bad = [&](const std::string& what) {
            return std::runtime_error(path + ":" + std::to_string(lineno) +
                                      ": " + what);
        };
        if (!j.is_object()) throw bad("article record is not an object");
        if (!j.contains("id") || !j["id"].is_string())
            throw bad("missing or non-string \"id\" field");
        if (!j.contains("text") || !j["text"].is_string())
            throw bad("missing or non-string \"text\" field");
        ArticleRecord rec;
        rec.id = j["id"].get<std::string>();
        rec.text = j["text"].get<std::string>();
        if (j.contains("title")) rec.title = j["title"].get<std::string>();
        if (j.contains("categories")) {
            if (!j["categories"].is_array())
                throw bad("\"categories\" field is not an array");
            for (const auto& c : j["categories"])
                rec.categories.insert(c.get<std::string>());
        }
        try {
            store.add(std::move(rec));
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": " + e.what());
        }
    }
    return store;
}

inline void load_category_edges(const std::string& path, CategoryGraph& graph) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open category edge file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected \"parent<TAB>child\"");
        graph.add_edge(line.substr(0, tab), line.substr(tab + 1));
    }
}

struct IngestResult {
    ArticleStore store;
    CategoryGraph graph;
};

inline IngestResult ingest_articles(const std::string& articles_path,
                                    const std::string& edges_path) {
    IngestResult r;
    r.store = load_articles(articles_path);
    load_category_edges(edges_path, r.graph);
    for (const auto& rec : r.store.records)
        for (const auto& cat : rec.categories)
            r.graph.add_member(cat, rec.id);
    return r;
}

// ---------------------------------------------------------------------------
// Context selection
// ---------------------------------------------------------------------------

struct ContextSpec {
    std::vector<std::string> include_roots;
    std::vector<std::string> exclude_roots;
    std::set<std::string> other_context_ids;  // e.g. articles shared with the other context
    std::optional<std::uint64_t> target_tokens;
};

namespace detail {

inline std::set<std::string> reachable_articles(
    const CategoryGraph& graph, const std::vector<std::string>& roots) {
    std::set<std::string> visited;
    std::vector<std::string> stack;
    for (const auto& root : roots) {
        if (!graph.has_category(root))
            throw std::runtime_error("unknown root category: " + root);
        if (visited.insert(root).second) stack.push_back(root);
    }
    std::set<std::string> articles;
    while (!stack.empty()) {
        std::string cat = std::move(stack.back());
        stack.pop_back();
        if (auto it = graph.membership.find(cat); it != graph.membership.end())
            articles.insert(it->second.begin(), it->second.end());
        if (auto it = graph.edges.find(cat); it != graph.edges.end())
            for (const auto& child : it->second)
                if (visited.insert(child).second) stack.push_back(child);
    }
    return articles;
}

} // namespace detail

inline std::set<std::string> collect_context_articles(const CategoryGraph& graph,
                                                      const ArticleStore& store,
                                                      const ContextSpec& spec) {
    if (spec.include_roots.empty())
        throw std::runtime_error("context spec has no include roots");
    std::set<std::string> included =
        detail::reachable_articles(graph, spec.include_roots);
    if (!spec.exclude_roots.empty())
        for (const auto& id : detail::reachable_articles(graph, spec.exclude_roots))
            included.erase(id);
    for (const auto& id : spec.other_context_ids) included.erase(id);
    // Drop ids the store does not know about (possible with hand-built graphs).
    for (auto it = included.begin(); it != included.end();)
        it = store.contains(*it) ? std::next(it) : included.erase(it);
    return included;
}

// ---------------------------------------------------------------------------
// Corpus: tokens interned as ids, grouped by article
// ---------------------------------------------------------------------------

class Corpus {
  public:
    std::vector<std::string> dictionary;  // word id -> token
    std::vector<std::uint64_t> dict_counts;
    std::vector<std::uint32_t> tokens;          // all articles, concatenated
    std::vector<std::size_t> article_offsets{0};
    std::vector<std::string> source_ids;

    std::uint64_t token_count() const { return tokens.size(); }
    std::size_t article_count() const { return source_ids.size(); }

    std::span<const std::uint32_t> article_tokens(std::size_t i) const {
        return {tokens.data() + article_offsets[i],
                tokens.data() + article_offsets[i + 1]};
    }

    void add_article(const std::string& id, const std::vector<std::string>& toks) {
        source_ids.push_back(id);
        for (const auto& t : toks) {
            std::uint32_t w = intern(t);
            tokens.push_back(w);
            ++dict_counts[w];
        }
        article_offsets.push_back(tokens.size());
    }

    // Copies article i of `other` into this corpus, re-interning its tokens.
    void append_article_from(const Corpus& other, std::size_t i) {
        source_ids.push_back(other.source_ids[i]);
        for (std::uint32_t w : other.article_tokens(i)) {
            std::uint32_t nw = intern(other.dictionary[w]);
            tokens.push_back(nw);
            ++dict_counts[nw];
        }
        article_offsets.push_back(tokens.size());
    }

    std::uint64_t count(const std::string& word) const {
        auto it = index_.find(word);
        return it == index_.end() ? 0 : dict_counts[it->second];
    }

    std::map<std::string, std::uint64_t> word_counts() const {
        std::map<std::string, std::uint64_t> out;
        for (std::size_t i = 0; i < dictionary.size(); ++i)
            if (dict_counts[i] > 0) out.emplace(dictionary[i], dict_counts[i]);
        return out;
    }

  private:
    std::unordered_map<std::string, std::uint32_t> index_;

    std::uint32_t intern(const std::string& word) {
        auto [it, inserted] = index_.emplace(word, dictionary.size());
        if (inserted) {
            dictionary.push_back(word);
            dict_counts.push_back(0);
        }
        return it->second;
    }
};

inline std::map<std::string, std::uint64_t> count_occurrences(
    const Corpus& c, const std::vector<std::string>& words) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& w : words) out[w] = c.count(w);
    return out;
}

// Articles are concatenated in sorted-id order; a token cap truncates at the
// article boundary nearest below the cap.
inline Corpus build_corpus(const ArticleStore& store,
                           const std::set<std::string>& ids,
                           std::optional<std::uint64_t> cap = std::nullopt) {
    if (ids.empty()) throw std::runtime_error("cannot build corpus from empty id set");
    Corpus c;
    for (const auto& id : ids) {
        const ArticleRecord& rec = store.get(id);
        std::vector<std::string> toks = tokenize(rec.text);
        if (cap && c.token_count() + toks.size() > *cap) break;
        c.add_article(id, toks);
    }
    return c;
}

struct MixInfo {
    double fraction = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t tokens_from_a = 0, tokens_from_b = 0;
    std::size_t articles_from_a = 0, articles_from_b = 0;
};

// Takes the first `fraction` share of A's tokens and the first (1-fraction)
// share of B's, by whole articles, then interleaves the selected articles in
// seeded-shuffled order. The fractions apply to each source corpus.
inline Corpus mix_corpora(const Corpus& a, const Corpus& b, double fraction,
                          std::uint64_t seed, MixInfo* info = nullptr) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::runtime_error("mix fraction must be in [0,1]");

    auto select_prefix = [](const Corpus& c, double target) {
        std::vector<std::size_t> picked;
        double cum = 0.0;
        for (std::size_t i = 0; i < c.article_count(); ++i) {
            double size = static_cast<double>(c.article_tokens(i).size());
            if (size == 0.0) continue;
            if (cum + size > target + 1e-9) break;
            picked.push_back(i);
            cum += size;
        }
        return picked;
    };

    std::vector<std::size_t> from_a =
        select_prefix(a, fraction * static_cast<double>(a.token_count()));
    std::vector<std::size_t> from_b =
        select_prefix(b, (1.0 - fraction) * static_cast<double>(b.token_count()));

    std::vector<std::pair<const Corpus*, std::size_t>> order;
    order.reserve(from_a.size() + from_b.size());
    for (std::size_t i : from_a) order.emplace_back(&a, i);
    for (std::size_t i : from_b) order.emplace_back(&b, i);
    SplitMix64 rng(seed);
    deterministic_shuffle(order, rng);

    Corpus out;
    for (const auto& [src, i] : order) out.append_article_from(*src, i);

    if (info) {
        info->fraction = fraction;
        info->seed = seed;
        info->articles_from_a = from_a.size();
        info->articles_from_b = from_b.size();
        info->tokens_from_a = info->tokens_from_b = 0;
        for (std::size_t i : from_a) info->tokens_from_a += a.article_tokens(i).size();
        for (std::size_t i : from_b) info->tokens_from_b += b.article_tokens(i).size();
    }
    return out;
}

// Sub-samples `source` articles so that every target word occurs exactly as
// often as it does in `reference`, then pads with articles containing no
// target occurrences. Greedy, largest-target-mass first; articles that would
// overshoot any target are skipped. The seed only shuffles the final article
// order.
inline Corpus frequency_match(const Corpus& source, const Corpus& reference,
                              const std::vector<std::string>& targets,
                              std::uint64_t seed) {
    if (targets.empty()) throw std::runtime_error("frequency_match: empty target list");

    std::unordered_map<std::string, std::size_t> target_index;
    for (std::size_t k = 0; k < targets.size(); ++k) target_index.emplace(targets[k], k);

    std::vector<std::uint64_t> need(targets.size(), 0);
    for (std::size_t k = 0; k < targets.size(); ++k)
        need[k] = reference.count(targets[k]);

    // Per-article target occurrence counts.
    struct ArticleTargets {
        std::size_t article = 0;
        std::uint64_t total = 0;
        std::vector<std::pair<std::size_t, std::uint64_t>> counts;  // target k -> n
    };
    std::vector<ArticleTargets> with_targets;
    std::vector<std::size_t> without_targets;
    for (std::size_t i = 0; i < source.article_count(); ++i) {
        std::map<std::size_t, std::uint64_t> counts;
        for (std::uint32_t w : source.article_tokens(i)) {
            auto it = target_index.find(source.dictionary[w]);
            if (it != target_index.end()) ++counts[it->second];
        }
        if (counts.empty()) {
            without_targets.push_back(i);
        } else {
            ArticleTargets at;
            at.article = i;
            for (auto& [k, n] : counts) {
                at.counts.emplace_back(k, n);
                at.total += n;
            }
            with_targets.push_back(std::move(at));
        }
    }

    std::stable_sort(with_targets.begin(), with_targets.end(),
                     [&](const ArticleTargets& x, const ArticleTargets& y) {
                         if (x.total != y.total) return x.total > y.total;
                         return source.source_ids[x.article] < source.source_ids[y.article];
                     });

    std::vector<std::uint64_t> have(targets.size(), 0);
    std::vector<std::size_t> picked;
    for (const auto& at : with_targets) {
        bool fits = true;
        for (const auto& [k, n] : at.counts)
            if (have[k] + n > need[k]) { fits = false; break; }
        if (!fits) continue;
        for (const auto& [k, n] : at.counts) have[k] += n;
        picked.push_back(at.article);
    }

    std::string shortfall;
    for (std::size_t k = 0; k < targets.size(); ++k)
        if (have[k] < need[k])
            shortfall += (shortfall.empty() ? "" : ", ") + targets[k] + ": " +
                         std::to_string(need[k] - have[k]) + " short";
    if (!shortfall.empty())
        throw std::runtime_error("frequency_match: target counts unreachable (" +
                                 shortfall + ")");

    picked.insert(picked.end(), without_targets.begin(), without_targets.end());
    SplitMix64 rng(seed);
    deterministic_shuffle(picked, rng);

    Corpus out;
    for (std::size_t i : picked) out.append_article_from(source, i);
    return out;
}

// ---------------------------------------------------------------------------
// Disk format: plain text (one article per line, space-separated tokens) plus
// a JSON sidecar with source_ids, token_count and word_counts.
// ---------------------------------------------------------------------------

inline void save_corpus(const Corpus& c, const std::string& text_path,
                        const std::string& sidecar_path,
                        const json& extra = json::object()) {
    std::ofstream out(text_path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + text_path);
    for (std::size_t i = 0; i < c.article_count(); ++i) {
        auto art = c.article_tokens(i);
        for (std::size_t j = 0; j < art.size(); ++j) {
            if (j) out << ' ';
            out << c.dictionary[art[j]];
        }
        out << '\n';
    }
    out.close();
    if (!out) throw std::runtime_error("failed writing corpus file: " + text_path);

    json side = extra;
    side["source_ids"] = c.source_ids;
    side["token_count"] = c.token_count();
    side["word_counts"] = c.word_counts();
    std::ofstream sout(sidecar_path);
    if (!sout) throw std::runtime_error("cannot write corpus sidecar: " + sidecar_path);
    sout << side.dump(2) << '\n';
    if (!sout) throw std::runtime_error("failed writing corpus sidecar: " + sidecar_path);
}

inline Corpus load_corpus(const std::string& text_path,
                          const std::string& sidecar_path) {
    std::ifstream sin(sidecar_path);
    if (!sin) throw std::runtime_error("cannot open corpus sidecar: " + sidecar_path);
    json side = json::parse(sin);
    std::vector<std::string> ids = side.at("source_ids").get<std::vector<std::string>>();

    std::ifstream in(text_path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + text_path);
    Corpus c;
    std::string line;
    std::size_t lineno = 0;
    auto valid_token = [](const std::string& t) {
        if (t.empty()) return false;
        for (unsigned char ch : t)
            if (!std::isalnum(ch) || std::isupper(ch)) return false;
        return true;
    };
    while (std::getline(in, line)) {
        if (lineno >= ids.size())
            throw std::runtime_error(text_path + ": more articles than sidecar source_ids");
        std::vector<std::string> toks;
        std::istringstream ss(line);
        std::string t;
        while (ss >> t) {
            if (!valid_token(t))
                throw std::runtime_error(text_path + ":" + std::to_string(lineno + 1) +
                                         ": invalid token \"" + t + "\"");
            toks.push_back(t);
        }
        c.add_article(ids[lineno], toks);
        ++lineno;
    }
    if (lineno != ids.size())
        throw std::runtime_error(text_path + ": fewer articles than sidecar source_ids");
    if (c.token_count() != side.at("token_count").get<std::uint64_t>())
        throw std::runtime_error(text_path + ": token_count does not match sidecar");
    return c;
}

} // namespace ctxsem
