#pragma once

// Retrieval over the code index: query classification, five search
// strategies (BM25, calibrated lattice descent, multi-query with synonym
// reformulation, summary-guided beam, structural walk), reciprocal-rank
// fusion and a seven-signal value scorer with maskable signals for
// ablations. Everything is deterministic: ties break on node ids.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rgao/code_index.hpp"
#include "rgao/common.hpp"

namespace rgao {

class needs_summaries_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class retrieval_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- tokenization -----------------------------------------------------------

namespace detail {

inline void push_lower(std::vector<std::string>& out, const std::string& s) {
    if (s.empty()) return;
    std::string low;
    low.reserve(s.size());
    for (char c : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    out.push_back(std::move(low));
}

}  // namespace detail

// Subword-aware tokenizer: splits on non-alphanumerics and camelCase humps,
// lowercases, and additionally keeps the whole identifier (lowercased, with
// '_' joints) when it splits into several parts — so "compute_total" yields
// {compute, total, compute_total}. Exact-name hits then carry high IDF.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!std::isalnum(static_cast<unsigned char>(text[i])) && text[i] != '_') {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) {
            ++j;
        }
        std::string word = text.substr(i, j - i);
        i = j;

        // Split the word on '_' and camel humps.
        std::vector<std::string> parts;
        std::string cur;
        for (std::size_t p = 0; p < word.size(); ++p) {
            char c = word[p];
            if (c == '_') {
                if (!cur.empty()) parts.push_back(cur);
                cur.clear();
                continue;
            }
            bool hump = !cur.empty() && std::isupper(static_cast<unsigned char>(c)) &&
                        (std::islower(static_cast<unsigned char>(cur.back())) ||
                         (p + 1 < word.size() && std::islower(static_cast<unsigned char>(word[p + 1]))));
            if (hump) {
                parts.push_back(cur);
                cur.clear();
            }
            cur.push_back(c);
        }
        if (!cur.empty()) parts.push_back(cur);
        for (const auto& p : parts) detail::push_lower(out, p);
        if (parts.size() > 1) detail::push_lower(out, word);
    }
    return out;
}

// --- query classification ---------------------------------------------------

enum class QueryType : std::uint8_t { Identifier, Exact, Conceptual, Dependency, Structural };

inline const char* to_string(QueryType t) {
    switch (t) {
        case QueryType::Identifier: return "identifier";
        case QueryType::Exact: return "exact";
        case QueryType::Conceptual: return "conceptual";
        case QueryType::Dependency: return "dependency";
        case QueryType::Structural: return "structural";
    }
    return "conceptual";
}

struct QueryClass {
    QueryType type = QueryType::Conceptual;
    double confidence = 0.6;
};

// Ordered rule cascade: quoted phrase, single code-shaped token, dependency
// cues, structural cues, conceptual fallback.
inline QueryClass classify_query(const std::string& query) {
    std::string q;
    for (char c : query) q.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    std::size_t q1 = query.find('"');
    if (q1 != std::string::npos) {
        std::size_t q2 = query.find('"', q1 + 1);
        if (q2 != std::string::npos && q2 > q1 + 1) return {QueryType::Exact, 0.95};
    }

    std::string trimmed = detail::strip(query);
    if (!trimmed.empty() && trimmed.find(' ') == std::string::npos) {
        bool code_shaped = true;
        for (char c : trimmed) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != ':' && c != '.') {
                code_shaped = false;
                break;
            }
        }
        if (code_shaped && !std::isdigit(static_cast<unsigned char>(trimmed[0]))) {
            return {QueryType::Identifier, 0.9};
        }
    }

    auto has_word = [&q](const std::string& w) {
        std::size_t at = 0;
        while ((at = q.find(w, at)) != std::string::npos) {
            bool left_ok = at == 0 || !detail::ident_char(q[at - 1]);
            std::size_t end = at + w.size();
            bool right_ok = end >= q.size() || !detail::ident_char(q[end]);
            if (left_ok && right_ok) return true;
            at = end;
        }
        return false;
    };
    if (has_word("imports") || has_word("calls") || q.find("depends on") != std::string::npos ||
        q.find("callers of") != std::string::npos) {
        return {QueryType::Dependency, 0.8};
    }
    if (has_word("directory") || has_word("layout") || has_word("structure") ||
        q.find("module tree") != std::string::npos) {
        return {QueryType::Structural, 0.8};
    }
    return {QueryType::Conceptual, 0.6};
}

// --- BM25 -------------------------------------------------------------------

struct Bm25Doc {
    std::string id;
    std::unordered_map<std::string, std::uint32_t> tf;
    std::uint32_t length = 0;
};

struct Bm25Index {
    std::vector<Bm25Doc> docs;
    std::unordered_map<std::string, std::uint32_t> df;
    double avgdl = 0.0;

    double idf(const std::string& token) const {
        auto it = df.find(token);
        double d = it == df.end() ? 0.0 : it->second;
        double n = static_cast<double>(docs.size());
        return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }
};

namespace detail {

inline std::string node_text(const CodeNode& n) {
    std::string text = n.name;
    if (!n.qualified.empty() && n.qualified != n.name) text += " " + n.qualified;
    if (n.kind == NodeKind::File || n.kind == NodeKind::Directory) text += " " + n.path;
    const std::string& sum = n.semantic_summary.empty() ? n.summary : n.semantic_summary;
    if (!sum.empty()) text += " " + sum;
    if (!n.docstring.empty()) text += " " + n.docstring;
    return text;
}

}  // namespace detail

inline Bm25Index build_bm25_index(const CodeIndexTree& tree) {
    Bm25Index idx;
    idx.docs.reserve(tree.nodes().size());
    std::uint64_t total_len = 0;
    for (const auto& n : tree.nodes()) {
        Bm25Doc doc;
        doc.id = n.id;
        for (auto& tok : tokenize(detail::node_text(n))) ++doc.tf[tok];
        for (const auto& [tok, cnt] : doc.tf) {
            (void)cnt;
            ++idx.df[tok];
            doc.length += doc.tf[tok];
        }
        total_len += doc.length;
        idx.docs.push_back(std::move(doc));
    }
    idx.avgdl = idx.docs.empty() ? 0.0 : static_cast<double>(total_len) /
                                             static_cast<double>(idx.docs.size());
    return idx;
}

// One ranked list from a single search strategy; raw scores are
// strategy-specific and only ranks matter for fusion.
struct RankedList {
    std::string system;
    double weight = 1.0;
    std::vector<std::pair<std::string, double>> items;  // (node id, raw score) descending
};

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

// Okapi BM25 over node names, summaries and docstrings. Symbols whose exact
// name or qualified name equals the query are force-included even when they
// fall outside the top k.
inline RankedList bm25_search(const CodeIndexTree& tree, const Bm25Index& idx,
                              const std::string& query, std::size_t k) {
    RankedList out{"bm25", 1.0, {}};
    auto q_tokens = tokenize(query);
    if (q_tokens.empty() || idx.docs.empty()) return out;

    std::vector<std::pair<std::string, double>> scored;
    for (const auto& doc : idx.docs) {
        double s = 0.0;
        for (const auto& t : q_tokens) {
            auto it = doc.tf.find(t);
            if (it == doc.tf.end()) continue;
            double tf = it->second;
            double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * doc.length / idx.avgdl);
            s += idx.idf(t) * (tf * (kBm25K1 + 1.0)) / (tf + norm);
        }
        if (s > 0.0) scored.emplace_back(doc.id, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);

    std::string want = detail::strip(query);
    std::unordered_set<std::string> present;
    for (const auto& [id, s] : scored) present.insert(id);
    for (const auto& n : tree.nodes()) {
        if (n.kind != NodeKind::Symbol) continue;
        if (n.name != want && n.qualified != want) continue;
        if (present.count(n.id)) continue;
        scored.emplace_back(n.id, 0.0);
        present.insert(n.id);
    }
    out.items = std::move(scored);
    return out;
}

// --- value scorer -----------------------------------------------------------

inline constexpr std::size_t kSignalCount = 7;
inline constexpr std::array<const char*, kSignalCount> kSignalNames = {
    "tfidf", "lang", "type", "ctx", "hub", "len", "pr"};

struct SignalMask {
    std::array<bool, kSignalCount> enabled{true, true, true, true, true, true, true};

    static SignalMask full() { return {}; }
    static SignalMask without(std::size_t signal) {
        SignalMask m;
        m.enabled[signal] = false;
        return m;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (bool b : enabled) n += b;
        return n;
    }

    bool operator==(const SignalMask&) const = default;
};

struct ValueScore {
    std::array<double, kSignalCount> signals{};
    double composite = 0.0;
};

// Precomputed per-tree state the scorer needs (corpus document frequencies).
// Build once, reuse across calls; trees are immutable after construction.
struct ScoringContext {
    const CodeIndexTree* tree = nullptr;
    Bm25Index bm25;
};

inline ScoringContext make_scoring_context(const CodeIndexTree& tree) {
    return {&tree, build_bm25_index(tree)};
}

namespace detail {

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline std::string dirname(const std::string& path) {
    std::size_t at = path.find_last_of('/');
    return at == std::string::npos ? "" : path.substr(0, at);
}

// IDF-weighted coverage of the query tokens by the node's token set, in
// [0, 1]. Tokens absent from the whole corpus still weigh the denominator,
// so off-topic queries score low everywhere.
inline double tfidf_signal(const ScoringContext& ctx, const CodeNode& node,
                           const std::vector<std::string>& q_tokens) {
    if (q_tokens.empty()) return 0.0;
    std::unordered_set<std::string> doc_tokens;
    for (auto& t : tokenize(node_text(node))) doc_tokens.insert(t);
    // De-duplicate query tokens so repeated words don't double-count.
    std::unordered_set<std::string> uniq(q_tokens.begin(), q_tokens.end());
    double num = 0.0, den = 0.0;
    for (const auto& t : uniq) {
        double w = ctx.bm25.idf(t);
        den += w;
        if (doc_tokens.count(t)) num += w;
    }
    return den > 0.0 ? num / den : 0.0;
}

inline double type_signal(const CodeNode& n) {
    if (n.kind == NodeKind::File) return 0.3;
    if (n.kind == NodeKind::Directory) return 0.2;
    if (n.kind == NodeKind::Root) return 0.1;
    switch (n.symbol_type) {
        case SymbolType::Function: return 1.0;
        case SymbolType::Method: return 0.85;
        case SymbolType::Class: return 0.7;
        case SymbolType::Variable: return 0.55;
        case SymbolType::Import: return 0.4;
        case SymbolType::Block: return 0.25;
    }
    return 0.25;
}

inline double ctx_signal(const CodeNode& n, const std::string& context_file) {
    if (context_file.empty()) return 0.0;
    const std::string& node_path = n.path;
    if (node_path.empty()) return 0.0;
    if (node_path == context_file) return 1.0;
    std::string nd = dirname(node_path), cd = dirname(context_file);
    if (nd == cd) return 0.6;
    if (!nd.empty() && nd == dirname(cd)) return 0.3;
    if (!cd.empty() && dirname(nd) == cd) return 0.3;
    return 0.0;
}

}  // namespace detail

// Seven-signal value score: the composite is the arithmetic mean over the
// enabled signals. All signals and the composite land in [0, 1]. Throws if
// every signal is masked off.
inline ValueScore value_score(const ScoringContext& ctx, const std::string& node_id,
                              const std::string& query, const std::string& context_file = "",
                              const SignalMask& mask = SignalMask::full()) {
    if (mask.count() == 0) {
        throw std::invalid_argument("signal mask must keep at least one signal enabled");
    }
    const CodeIndexTree& tree = *ctx.tree;
    const CodeNode& n = tree.node(node_id);
    auto q_tokens = tokenize(query);

    ValueScore v;
    v.signals[0] = detail::tfidf_signal(ctx, n, q_tokens);
    v.signals[1] = n.language.empty() ? 1.0 : (language_fully_supported(n.language) ? 1.0 : 0.5);
    v.signals[2] = detail::type_signal(n);
    v.signals[3] = detail::ctx_signal(n, context_file);
    double maxdeg = static_cast<double>(tree.max_degree());
    v.signals[4] = maxdeg > 0.0
                       ? std::log(1.0 + static_cast<double>(tree.degree(node_id))) / std::log(1.0 + maxdeg)
                       : 0.0;
    v.signals[5] = std::min(1.0, static_cast<double>(n.span_bytes) / 2000.0);
    v.signals[6] = tree.pagerank_norm(node_id);

    double sum = 0.0;
    for (std::size_t i = 0; i < kSignalCount; ++i) {
        if (mask.enabled[i]) sum += v.signals[i];
    }
    v.composite = sum / static_cast<double>(mask.count());
    return v;
}

inline ValueScore value_score(const CodeIndexTree& tree, const std::string& node_id,
                              const std::string& query, const std::string& context_file = "",
                              const SignalMask& mask = SignalMask::full()) {
    auto ctx = make_scoring_context(tree);
    return value_score(ctx, node_id, query, context_file, mask);
}

// --- lattice search ---------------------------------------------------------

struct LatticeParams {
    double alpha = 0.6;          // calibration weight on the node's own score
    std::size_t beam = 4;        // frontier width per level
    std::size_t max_expansions = 32;
    std::size_t max_branch = 8;  // children considered per expansion
};

// Best-first beam descent from the root. Each node's calibrated score is
// alpha * raw + (1 - alpha) * parent's calibrated score, so good ancestors
// buoy mediocre descendants and vice versa. Collects symbols and leaf files.
inline RankedList lattice_search(const ScoringContext& ctx, const std::string& query,
                                 std::size_t k, const LatticeParams& params = {},
                                 const std::string& context_file = "",
                                 const SignalMask& mask = SignalMask::full()) {
    const CodeIndexTree& tree = *ctx.tree;
    RankedList out{"lattice", 1.0, {}};
    if (tree.nodes().empty()) return out;

    struct Entry {
        std::string id;
        double cal;
    };
    double root_raw = value_score(ctx, tree.root_id(), query, context_file, mask).composite;
    std::vector<Entry> level = {{tree.root_id(), root_raw}};
    std::vector<std::pair<std::string, double>> collected;
    std::size_t expansions = 0;

    while (!level.empty() && expansions < params.max_expansions) {
        std::vector<Entry> next;
        for (const auto& e : level) {
            if (expansions >= params.max_expansions) break;
            ++expansions;
            const CodeNode& n = tree.node(e.id);
            std::vector<Entry> kids;
            kids.reserve(n.children.size());
            for (const auto& cid : n.children) {
                double raw = value_score(ctx, cid, query, context_file, mask).composite;
                kids.push_back({cid, params.alpha * raw + (1.0 - params.alpha) * e.cal});
            }
            std::sort(kids.begin(), kids.end(), [](const Entry& a, const Entry& b) {
                return a.cal != b.cal ? a.cal > b.cal : a.id < b.id;
            });
            if (kids.size() > params.max_branch) kids.resize(params.max_branch);
            for (const auto& kid : kids) {
                const CodeNode& kn = tree.node(kid.id);
                if (kn.kind == NodeKind::Symbol || kn.children.empty()) {
                    collected.emplace_back(kid.id, kid.cal);
                }
                if (!kn.children.empty()) next.push_back(kid);
            }
        }
        std::sort(next.begin(), next.end(), [](const Entry& a, const Entry& b) {
            return a.cal != b.cal ? a.cal > b.cal : a.id < b.id;
        });
        if (next.size() > params.beam) next.resize(params.beam);
        level = std::move(next);
    }

    std::sort(collected.begin(), collected.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::unordered_set<std::string> seen;
    for (auto& item : collected) {
        if (!seen.insert(item.first).second) continue;
        out.items.push_back(std::move(item));
        if (out.items.size() >= k) break;
    }
    return out;
}

// --- reciprocal rank fusion -------------------------------------------------

inline constexpr double kRrfK = 60.0;

// RRF(d) = sum over lists of weight / (k + rank(d)); ranks are 1-based,
// absence contributes zero. Ties break on ascending node id.
inline std::vector<std::pair<std::string, double>> rrf_fuse(
    const std::vector<RankedList>& lists, double k = kRrfK) {
    std::map<std::string, double> acc;
    for (const auto& list : lists) {
        for (std::size_t r = 0; r < list.items.size(); ++r) {
            acc[list.items[r].first] += list.weight / (k + static_cast<double>(r + 1));
        }
    }
    std::vector<std::pair<std::string, double>> fused(acc.begin(), acc.end());
    std::sort(fused.begin(), fused.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return fused;
}

// --- multi-query ------------------------------------------------------------

// Code-flavoured synonym table used for query reformulation (18 entries).
inline const std::map<std::string, std::vector<std::string>>& default_synonyms() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"args", {"params", "arguments"}},  {"auth", {"login", "authentication"}},
        {"cache", {"memo", "buffer"}},      {"close", {"shutdown", "finish"}},
        {"compute", {"calculate", "derive"}}, {"config", {"settings", "options"}},
        {"db", {"database", "store"}},      {"delete", {"remove", "drop"}},
        {"dir", {"folder", "directory"}},   {"error", {"exception", "fault"}},
        {"fetch", {"get", "retrieve"}},     {"init", {"setup", "initialize"}},
        {"parse", {"decode", "scan"}},      {"path", {"route", "location"}},
        {"send", {"dispatch", "emit"}},     {"test", {"check", "verify"}},
        {"update", {"modify", "change"}},   {"user", {"account", "member"}},
    };
    return table;
}

// Reformulates the query by substituting dictionary synonyms (at most four
// variants including the original), runs BM25 per variant, fuses with RRF.
inline RankedList multi_query_search(
    const CodeIndexTree& tree, const Bm25Index& idx, const std::string& query, std::size_t k,
    const std::map<std::string, std::vector<std::string>>& synonyms = default_synonyms()) {
    std::vector<std::string> variants = {query};

    // Word-level substitution, preserving the rest of the query.
    std::vector<std::string> words;
    std::string cur;
    for (char c : query) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(cur);

    for (const auto& [key, subs] : synonyms) {
        if (variants.size() >= 4) break;
        for (std::size_t w = 0; w < words.size() && variants.size() < 4; ++w) {
            std::string low;
            for (char c : words[w]) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            if (low != key) continue;
            for (const auto& sub : subs) {
                if (variants.size() >= 4) break;
                std::string v;
                for (std::size_t x = 0; x < words.size(); ++x) {
                    if (x) v += " ";
                    v += (x == w) ? sub : words[x];
                }
                variants.push_back(std::move(v));
            }
        }
    }

    std::vector<RankedList> lists;
    lists.reserve(variants.size());
    for (const auto& v : variants) lists.push_back(bm25_search(tree, idx, v, k));
    auto fused = rrf_fuse(lists);
    if (fused.size() > k) fused.resize(k);
    return RankedList{"multi_query", 1.0, std::move(fused)};
}

// --- summary-guided beam ----------------------------------------------------

namespace detail {

inline double summary_overlap(const CodeNode& n, const std::vector<std::string>& q_tokens) {
    if (q_tokens.empty()) return 0.0;
    const std::string& text = n.semantic_summary.empty() ? n.summary : n.semantic_summary;
    std::unordered_set<std::string> toks;
    for (auto& t : tokenize(text + " " + n.name)) toks.insert(t);
    std::unordered_set<std::string> uniq(q_tokens.begin(), q_tokens.end());
    std::size_t hit = 0;
    for (const auto& t : uniq) hit += toks.count(t);
    return static_cast<double>(hit) / static_cast<double>(uniq.size());
}

}  // namespace detail

// Beam search steered purely by lexical overlap between the query and node
// summaries. With beam = 1 this degenerates to a greedy walk.
inline RankedList beam_summary_search(const CodeIndexTree& tree, const std::string& query,
                                      std::size_t k, std::size_t beam = 4) {
    RankedList out{"beam_summary", 1.0, {}};
    if (tree.nodes().empty()) return out;
    auto q_tokens = tokenize(query);

    struct Entry {
        std::string id;
        double score;
    };
    std::vector<Entry> level = {{tree.root_id(), 0.0}};
    std::vector<std::pair<std::string, double>> collected;
    while (!level.empty()) {
        std::vector<Entry> next;
        for (const auto& e : level) {
            const CodeNode& n = tree.node(e.id);
            for (const auto& cid : n.children) {
                const CodeNode& kid = tree.node(cid);
                double s = detail::summary_overlap(kid, q_tokens);
                if (kid.kind == NodeKind::Symbol || kid.children.empty()) {
                    collected.emplace_back(cid, s);
                }
                if (!kid.children.empty()) next.push_back({cid, s});
            }
        }
        std::sort(next.begin(), next.end(), [](const Entry& a, const Entry& b) {
            return a.score != b.score ? a.score > b.score : a.id < b.id;
        });
        if (next.size() > beam) next.resize(beam);
        level = std::move(next);
    }
    std::sort(collected.begin(), collected.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (collected.size() > k) collected.resize(k);
    out.items = std::move(collected);
    return out;
}

// --- rerank -----------------------------------------------------------------

inline constexpr double kDocstringBonusWeight = 0.5;

struct ScoredCandidate {
    std::string id;
    double score = 0.0;
    ValueScore value;
};

// Re-scores candidates with the value scorer plus a docstring term-overlap
// bonus, clamped to [0, 1]. Stable: candidates with equal scores keep their
// incoming order.
inline std::vector<ScoredCandidate> rerank(const ScoringContext& ctx, const std::string& query,
                                           const std::vector<std::string>& candidates,
                                           const std::string& context_file = "",
                                           const SignalMask& mask = SignalMask::full()) {
    auto q_tokens = tokenize(query);
    std::unordered_set<std::string> uniq(q_tokens.begin(), q_tokens.end());
    std::vector<ScoredCandidate> out;
    out.reserve(candidates.size());
    for (const auto& id : candidates) {
        ScoredCandidate sc;
        sc.id = id;
        sc.value = value_score(ctx, id, query, context_file, mask);
        double bonus = 0.0;
        if (!uniq.empty()) {
            const CodeNode& n = ctx.tree->node(id);
            std::unordered_set<std::string> doc;
            for (auto& t : tokenize(n.docstring)) doc.insert(t);
            std::size_t hit = 0;
            for (const auto& t : uniq) hit += doc.count(t);
            bonus = kDocstringBonusWeight * static_cast<double>(hit) /
                    static_cast<double>(uniq.size());
        }
        sc.score = detail::clamp01(sc.value.composite + bonus);
        out.push_back(std::move(sc));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) {
                         return a.score > b.score;
                     });
    return out;
}

// --- retrieve ---------------------------------------------------------------

enum class ResultFlag : std::uint8_t { Primary = 0, Context = 1, Expansion = 2 };

inline const char* to_string(ResultFlag f) {
    switch (f) {
        case ResultFlag::Primary: return "primary";
        case ResultFlag::Context: return "context";
        case ResultFlag::Expansion: return "expansion";
    }
    return "primary";
}

struct RetrievedItem {
    std::string id;
    double score = 0.0;
    ResultFlag flag = ResultFlag::Primary;
    ValueScore value;
};

struct RetrievalResult {
    std::string query;
    QueryType query_type = QueryType::Conceptual;
    double confidence = 0.0;
    double ambiguity = 1.0;
    std::vector<RetrievedItem> items;
    std::vector<std::string> paths_used;  // strategy names, in fusion order

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(items.size());
        for (const auto& it : items) out.push_back(it.id);
        return out;
    }
};

namespace detail {

// Ambiguity: complement of the top-2 margin over the final primary scores.
// Fewer than two primary results leave the query maximally ambiguous.
inline double ambiguity_of(const std::vector<RetrievedItem>& items) {
    std::vector<double> primary;
    for (const auto& it : items) {
        if (it.flag == ResultFlag::Primary) primary.push_back(it.score);
    }
    if (primary.size() < 2) return 1.0;
    return clamp01(1.0 - (primary[0] - primary[1]));
}

inline void append_expansions(const ScoringContext& ctx, RetrievalResult& result,
                              std::size_t max_sources = 3, std::size_t cap = 6) {
    const CodeIndexTree& tree = *ctx.tree;
    std::unordered_set<std::string> present;
    for (const auto& it : result.items) present.insert(it.id);
    std::size_t added = 0, sources = 0;
    std::vector<RetrievedItem> extra;
    for (const auto& it : result.items) {
        if (it.flag != ResultFlag::Primary) continue;
        if (tree.node(it.id).kind != NodeKind::Symbol) continue;
        if (++sources > max_sources) break;
        std::vector<std::string> targets;
        for (const auto* e : tree.out_edges(it.id)) targets.push_back(e->to);
        std::sort(targets.begin(), targets.end());
        for (const auto& t : targets) {
            if (added >= cap) break;
            if (!present.insert(t).second) continue;
            RetrievedItem x;
            x.id = t;
            x.score = 0.0;
            x.flag = ResultFlag::Expansion;
            extra.push_back(std::move(x));
            ++added;
        }
        if (added >= cap) break;
    }
    for (auto& x : extra) result.items.push_back(std::move(x));
}

inline std::vector<std::string> take_ids(const std::vector<std::pair<std::string, double>>& items,
                                         std::size_t n) {
    std::vector<std::string> out;
    out.reserve(std::min(items.size(), n));
    for (const auto& [id, s] : items) {
        out.push_back(id);
        if (out.size() >= n) break;
    }
    return out;
}

}  // namespace detail

// Full retrieval path: classify, dispatch to the per-type strategy mix,
// rerank with the value scorer, attach ambiguity, then append the one-hop
// dependency neighborhood of the top results flagged as expansions.
inline RetrievalResult retrieve(const CodeIndexTree& tree, const std::string& query,
                                const std::string& context_file = "", std::size_t k = 10,
                                const SignalMask& mask = SignalMask::full()) {
    RetrievalResult result;
    result.query = query;
    auto qc = classify_query(query);
    result.query_type = qc.type;
    result.confidence = qc.confidence;

    if (qc.type == QueryType::Conceptual && !tree.has_summaries()) {
        throw needs_summaries_error(
            "conceptual queries need a summarized tree; run summarize() first");
    }

    ScoringContext ctx = make_scoring_context(tree);
    std::vector<std::string> candidates;

    switch (qc.type) {
        case QueryType::Identifier: {
            std::string want = detail::strip(query);
            std::vector<std::string> matched;
            for (const auto& n : tree.nodes()) {
                if (n.kind != NodeKind::Symbol) continue;
                if (n.name == want || n.qualified == want) matched.push_back(n.id);
            }
            if (matched.empty()) {
                // Fall back to subword matching via BM25.
                candidates = detail::take_ids(
                    bm25_search(tree, ctx.bm25, query, 2 * k).items, 2 * k);
            } else {
                for (const auto& id : matched) {
                    candidates.push_back(id);
                    for (const auto& cid : tree.node(id).children) {
                        if (tree.node(cid).kind == NodeKind::Symbol) candidates.push_back(cid);
                    }
                }
            }
            result.paths_used = {"identifier"};
            break;
        }
        case QueryType::Exact: {
            std::size_t q1 = query.find('"');
            std::size_t q2 = query.find('"', q1 + 1);
            std::string phrase = q2 != std::string::npos && q2 > q1 + 1
                                     ? query.substr(q1 + 1, q2 - q1 - 1)
                                     : query;
            candidates = detail::take_ids(
                bm25_search(tree, ctx.bm25, phrase, 2 * k).items, 2 * k);
            result.paths_used = {"bm25"};
            break;
        }
        case QueryType::Conceptual: {
            std::vector<RankedList> lists;
            lists.push_back(beam_summary_search(tree, query, 2 * k));
            lists.push_back(lattice_search(ctx, query, 2 * k, {}, context_file, mask));
            lists.push_back(multi_query_search(tree, ctx.bm25, query, 2 * k));
            lists.push_back(bm25_search(tree, ctx.bm25, query, 2 * k));
            result.paths_used = {"beam_summary", "lattice", "multi_query", "bm25"};
            candidates = detail::take_ids(rrf_fuse(lists), 2 * k);
            break;
        }
        case QueryType::Dependency: {
            auto seeds = detail::take_ids(bm25_search(tree, ctx.bm25, query, k).items, k);
            std::unordered_set<std::string> seen;
            for (const auto& id : seeds) {
                if (seen.insert(id).second) candidates.push_back(id);
            }
            for (const auto& id : seeds) {
                if (tree.node(id).kind != NodeKind::Symbol) continue;
                for (const auto& [nid, et] : neighbors_1hop(tree, id, EdgeDirection::Both)) {
                    (void)et;
                    if (seen.insert(nid).second) candidates.push_back(nid);
                }
            }
            result.paths_used = {"bm25", "neighbors"};
            break;
        }
        case QueryType::Structural: {
            // Coarse-to-fine: directories and files only, ranked by overlap.
            auto q_tokens = tokenize(query);
            std::vector<std::pair<std::string, double>> scored;
            for (const auto& n : tree.nodes()) {
                if (n.kind != NodeKind::Directory && n.kind != NodeKind::File) continue;
                scored.emplace_back(n.id, detail::summary_overlap(n, q_tokens));
            }
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
            candidates = detail::take_ids(scored, 2 * k);
            result.paths_used = {"structural"};
            break;
        }
    }

    auto ranked = rerank(ctx, query, candidates, context_file, mask);
    if (ranked.size() > k) ranked.resize(k);
    for (auto& sc : ranked) {
        RetrievedItem item;
        item.id = std::move(sc.id);
        item.score = sc.score;
        item.flag = ResultFlag::Primary;
        item.value = sc.value;
        result.items.push_back(std::move(item));
    }
    result.ambiguity = detail::ambiguity_of(result.items);

    // Identifier queries carry their enclosing file as context.
    if (qc.type == QueryType::Identifier && !result.items.empty()) {
        const CodeNode& top = tree.node(result.items.front().id);
        if (top.kind == NodeKind::Symbol && tree.has(top.path)) {
            bool present = false;
            for (const auto& it : result.items) present |= it.id == top.path;
            if (!present) {
                RetrievedItem fctx;
                fctx.id = top.path;
                fctx.score = 0.0;
                fctx.flag = ResultFlag::Context;
                result.items.push_back(std::move(fctx));
            }
        }
    }

    detail::append_expansions(ctx, result);
    return result;
}

inline json to_json(const ValueScore& v) {
    json signals;
    for (std::size_t i = 0; i < kSignalCount; ++i) signals[kSignalNames[i]] = v.signals[i];
    signals["composite"] = v.composite;
    return signals;
}

inline json to_json(const RetrievalResult& r) {
    json items = json::array();
    for (const auto& it : r.items) {
        items.push_back({{"id", it.id},
                         {"score", it.score},
                         {"flag", to_string(it.flag)},
                         {"signals", to_json(it.value)}});
    }
    return {{"query", r.query},
            {"query_type", to_string(r.query_type)},
            {"confidence", r.confidence},
            {"ambiguity", r.ambiguity},
            {"paths", r.paths_used},
            {"results", items}};
}

}  // namespace rgao
