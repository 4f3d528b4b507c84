#pragma once

// Topology router: turns a retrieval result into a five-component complexity
// vector, normalizes it against fixed caps, and applies an ordered rule table
// to pick an execution topology. A keyword-table baseline router lives here
// too so the two can be compared on the same tasks.

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rgao/code_index.hpp"
#include "rgao/common.hpp"
#include "rgao/retrieval.hpp"

namespace rgao {

// --- complexity extraction ---------------------------------------------------

struct ComplexityVector {
    std::uint32_t dependency_depth = 0;  // longest simple dependency chain
    std::uint32_t file_count = 0;        // distinct files touched
    std::uint32_t symbol_count = 0;      // retrieved symbols
    std::uint32_t tree_height = 0;       // deepest retrieved node
    double cross_ratio = 0.0;            // fraction of symbols with cross-directory deps
};

namespace detail {

// Longest simple path (edge count) in the dependency subgraph induced by the
// retrieved symbols, via depth-capped DFS with a global step budget. The cap
// keeps worst-case cost bounded; chains deeper than the router's saturation
// point all normalize to 1 anyway.
inline std::uint32_t longest_dependency_chain(
    const std::vector<std::string>& ids,
    const std::unordered_map<std::string, std::vector<std::string>>& adj,
    std::uint32_t depth_cap = 12, std::uint64_t step_budget = 1'000'000) {
    std::uint32_t best = 0;
    std::uint64_t steps = 0;
    std::unordered_set<std::string> on_path;

    auto dfs = [&](auto&& self, const std::string& u, std::uint32_t depth) -> void {
        if (depth > best) best = depth;
        if (depth >= depth_cap || steps >= step_budget) return;
        auto it = adj.find(u);
        if (it == adj.end()) return;
        for (const auto& v : it->second) {
            if (++steps >= step_budget) return;
            if (on_path.count(v)) continue;
            on_path.insert(v);
            self(self, v, depth + 1);
            on_path.erase(v);
        }
    };
    for (const auto& id : ids) {
        on_path = {id};
        dfs(dfs, id, 0);
    }
    return best;
}

}  // namespace detail

// Derives the complexity vector from a set of retrieved node ids. Unknown
// ids throw; the router must only ever see nodes of the tree it was given.
inline ComplexityVector extract_complexity(const CodeIndexTree& tree,
                                           const std::vector<std::string>& ids) {
    ComplexityVector c;
    std::unordered_set<std::string> files;
    std::vector<std::string> symbols;
    for (const auto& id : ids) {
        if (!tree.has(id)) throw std::invalid_argument("extract_complexity: unknown node " + id);
        const CodeNode& n = tree.node(id);
        c.tree_height = std::max(c.tree_height, tree.depth(id));
        if (n.kind == NodeKind::Symbol) {
            symbols.push_back(id);
            files.insert(n.path);
        } else if (n.kind == NodeKind::File) {
            files.insert(n.id);
        }
    }
    c.file_count = static_cast<std::uint32_t>(files.size());
    c.symbol_count = static_cast<std::uint32_t>(symbols.size());

    // Adjacency restricted to the retrieved symbol set, resolved edges only.
    std::unordered_set<std::string> in_set(symbols.begin(), symbols.end());
    std::unordered_map<std::string, std::vector<std::string>> adj;
    std::uint32_t crossing = 0;
    for (const auto& id : symbols) {
        const CodeNode& n = tree.node(id);
        std::string own_dir = detail::dirname(n.path);
        bool crosses = false;
        for (const auto* e : tree.out_edges(id)) {
            if (in_set.count(e->to)) adj[id].push_back(e->to);
            const CodeNode& target = tree.node(e->to);
            if (target.kind == NodeKind::Symbol && detail::dirname(target.path) != own_dir) {
                crosses = true;
            }
        }
        if (crosses) ++crossing;
    }
    for (auto& [id, v] : adj) std::sort(v.begin(), v.end());
    c.dependency_depth = detail::longest_dependency_chain(symbols, adj);
    c.cross_ratio = symbols.empty()
                        ? 0.0
                        : static_cast<double>(crossing) / static_cast<double>(symbols.size());
    return c;
}

inline ComplexityVector extract_complexity(const CodeIndexTree& tree,
                                           const RetrievalResult& result) {
    return extract_complexity(tree, result.ids());
}

// --- routing ----------------------------------------------------------------

enum class Topology : std::uint8_t { FastPath, SubAgent, MultiAgent, DeepResearch };
enum class MultiAgentMode : std::uint8_t { None, Pipeline, Swarm };

inline const char* to_string(Topology t) {
    switch (t) {
        case Topology::FastPath: return "fast_path";
        case Topology::SubAgent: return "sub_agent";
        case Topology::MultiAgent: return "multi_agent";
        case Topology::DeepResearch: return "deep_research";
    }
    return "sub_agent";
}

inline Topology topology_from_string(const std::string& s) {
    if (s == "fast_path") return Topology::FastPath;
    if (s == "sub_agent") return Topology::SubAgent;
    if (s == "multi_agent") return Topology::MultiAgent;
    if (s == "deep_research") return Topology::DeepResearch;
    throw std::invalid_argument("unknown topology: " + s);
}

inline const char* to_string(MultiAgentMode m) {
    switch (m) {
        case MultiAgentMode::None: return "none";
        case MultiAgentMode::Pipeline: return "pipeline";
        case MultiAgentMode::Swarm: return "swarm";
    }
    return "none";
}

struct RouterConfig {
    double ambiguity_floor = 0.70;       // at or above: escalate to research
    double fast_path_ceiling = 0.45;     // aggregate below this can fast-path
    double multi_agent_floor = 1.05;     // aggregate at or above forces fan-out
    std::uint32_t multi_agent_files = 3; // strictly more files forces fan-out
    double breadth_promote = 0.60;       // normalized file count
    double depth_promote = 0.50;         // normalized dependency depth
    double risk_promote = 0.40;          // modification risk score
    double swarm_cross_cut = 0.50;       // cross ratio at or above: swarm, else pipeline
    double cap_dependency_depth = 8.0;
    double cap_file_count = 12.0;
    double cap_symbol_count = 60.0;
    double cap_tree_height = 10.0;
    std::vector<std::string> sensitive_patterns = {"auth", "security", "migrations"};
};

struct RoutingDecision {
    Topology topology = Topology::SubAgent;
    MultiAgentMode mode = MultiAgentMode::None;
    ComplexityVector raw;
    std::array<double, 5> normalized{};  // depth, files, symbols, height, cross
    double aggregate = 0.0;
    double ambiguity = 0.0;
    double risk = 0.0;
    std::vector<std::string> triggered;  // rule names, in evaluation order
};

namespace detail {

inline double modification_risk(const std::vector<std::string>& paths,
                                const std::vector<std::string>& patterns) {
    for (const auto& p : paths) {
        std::string low;
        low.reserve(p.size());
        for (char c : p) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        for (const auto& pat : patterns) {
            if (low.find(pat) != std::string::npos) return 1.0;
        }
    }
    return 0.0;
}

}  // namespace detail

// Ordered threshold rules over the normalized complexity vector:
//   1. high ambiguity wins outright (research);
//   2. single-file, no cross-directory coupling, low aggregate: fast path;
//   3. wide file span or high aggregate: multi-agent (mode by cross ratio);
//   4. otherwise a single sub-agent, promoted to multi-agent when breadth,
//      depth, or modification risk crosses its promotion threshold.
inline RoutingDecision route(const ComplexityVector& c, double ambiguity,
                             const RouterConfig& cfg = {},
                             const std::vector<std::string>& retrieved_paths = {}) {
    RoutingDecision d;
    d.raw = c;
    d.ambiguity = ambiguity;
    d.normalized = {
        detail::clamp01(c.dependency_depth / cfg.cap_dependency_depth),
        detail::clamp01(c.file_count / cfg.cap_file_count),
        detail::clamp01(c.symbol_count / cfg.cap_symbol_count),
        detail::clamp01(c.tree_height / cfg.cap_tree_height),
        detail::clamp01(c.cross_ratio),
    };
    for (double v : d.normalized) d.aggregate += v;
    d.risk = detail::modification_risk(retrieved_paths, cfg.sensitive_patterns);

    auto pick_mode = [&] {
        bool swarm = c.cross_ratio >= cfg.swarm_cross_cut;
        d.mode = swarm ? MultiAgentMode::Swarm : MultiAgentMode::Pipeline;
        d.triggered.push_back(swarm ? "mode_swarm_cross" : "mode_pipeline_cross");
    };

    if (ambiguity >= cfg.ambiguity_floor) {
        d.triggered.push_back("research_ambiguity");
        d.topology = Topology::DeepResearch;
        return d;
    }
    if (c.file_count == 1 && c.cross_ratio == 0.0 && d.aggregate < cfg.fast_path_ceiling) {
        d.triggered.push_back("fast_path_narrow");
        d.topology = Topology::FastPath;
        return d;
    }
    bool many_files = c.file_count > cfg.multi_agent_files;
    bool heavy = d.aggregate >= cfg.multi_agent_floor;
    if (many_files || heavy) {
        if (many_files) d.triggered.push_back("multi_agent_files");
        if (heavy) d.triggered.push_back("multi_agent_aggregate");
        d.topology = Topology::MultiAgent;
        pick_mode();
        return d;
    }

    d.triggered.push_back("sub_agent_default");
    d.topology = Topology::SubAgent;
    bool promote = false;
    if (d.normalized[1] >= cfg.breadth_promote) {
        d.triggered.push_back("promote_breadth");
        promote = true;
    }
    if (d.normalized[0] >= cfg.depth_promote) {
        d.triggered.push_back("promote_depth");
        promote = true;
    }
    if (d.risk >= cfg.risk_promote) {
        d.triggered.push_back("promote_risk");
        promote = true;
    }
    if (promote) {
        d.topology = Topology::MultiAgent;
        pick_mode();
    }
    return d;
}

// --- keyword baseline ---------------------------------------------------------

inline constexpr int kRegexRulesVersion = 1;

struct RegexRule {
    std::string name;
    std::vector<std::string> keywords;  // any keyword must appear as a word
    std::vector<std::string> cues;      // when non-empty, one cue must also appear
    Topology topology = Topology::SubAgent;
};

struct RegexRuleTable {
    int version = kRegexRulesVersion;
    std::vector<RegexRule> rules;       // evaluated in order; first hit wins
    Topology fallback = Topology::FastPath;
};

inline RegexRuleTable default_regex_rules() {
    RegexRuleTable t;
    t.rules = {
        {"research_verbs", {"research", "investigate", "find", "explore"}, {}, Topology::DeepResearch},
        {"chained_change", {"implement", "fix", "refactor"}, {"then", "pipeline", "and test"}, Topology::MultiAgent},
        {"single_change", {"implement", "fix", "test", "review"}, {}, Topology::SubAgent},
    };
    return t;
}

namespace detail {

inline bool text_has_word(const std::string& low, const std::string& w) {
    std::size_t at = 0;
    while ((at = low.find(w, at)) != std::string::npos) {
        bool left_ok = at == 0 || !ident_char(low[at - 1]);
        std::size_t end = at + w.size();
        bool right_ok = end >= low.size() || !ident_char(low[end]);
        if (left_ok && right_ok) return true;
        at = end;
    }
    return false;
}

inline bool text_has_cue(const std::string& low, const std::string& cue) {
    if (cue.find(' ') != std::string::npos) return low.find(cue) != std::string::npos;
    return text_has_word(low, cue);
}

}  // namespace detail

// The comparison baseline: first rule whose keyword (plus cue, when the rule
// has cues) appears in the task text wins; no rule hits means fast path.
inline Topology regex_route(const std::string& task,
                            const RegexRuleTable& table = default_regex_rules()) {
    std::string low;
    low.reserve(task.size());
    for (char c : task) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (const auto& rule : table.rules) {
        bool kw = false;
        for (const auto& w : rule.keywords) kw |= detail::text_has_word(low, w);
        if (!kw) continue;
        if (!rule.cues.empty()) {
            bool cue = false;
            for (const auto& c : rule.cues) cue |= detail::text_has_cue(low, c);
            if (!cue) continue;
        }
        return rule.topology;
    }
    return table.fallback;
}

// --- serialization ------------------------------------------------------------

inline json to_json(const ComplexityVector& c) {
    return {{"dependency_depth", c.dependency_depth},
            {"file_count", c.file_count},
            {"symbol_count", c.symbol_count},
            {"tree_height", c.tree_height},
            {"cross_ratio", c.cross_ratio}};
}

inline json to_json(const RoutingDecision& d) {
    return {{"topology", to_string(d.topology)},
            {"mode", to_string(d.mode)},
            {"complexity", to_json(d.raw)},
            {"normalized", d.normalized},
            {"aggregate", d.aggregate},
            {"ambiguity", d.ambiguity},
            {"risk", d.risk},
            {"triggered", d.triggered}};
}

inline json to_json(const RouterConfig& cfg) {
    return {{"ambiguity_floor", cfg.ambiguity_floor},
            {"fast_path_ceiling", cfg.fast_path_ceiling},
            {"multi_agent_floor", cfg.multi_agent_floor},
            {"multi_agent_files", cfg.multi_agent_files},
            {"breadth_promote", cfg.breadth_promote},
            {"depth_promote", cfg.depth_promote},
            {"risk_promote", cfg.risk_promote},
            {"swarm_cross_cut", cfg.swarm_cross_cut},
            {"cap_dependency_depth", cfg.cap_dependency_depth},
            {"cap_file_count", cfg.cap_file_count},
            {"cap_symbol_count", cfg.cap_symbol_count},
            {"cap_tree_height", cfg.cap_tree_height},
            {"sensitive_patterns", cfg.sensitive_patterns}};
}

inline RouterConfig router_config_from_json(const json& j) {
    RouterConfig cfg;
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("ambiguity_floor", cfg.ambiguity_floor);
    get("fast_path_ceiling", cfg.fast_path_ceiling);
    get("multi_agent_floor", cfg.multi_agent_floor);
    get("multi_agent_files", cfg.multi_agent_files);
    get("breadth_promote", cfg.breadth_promote);
    get("depth_promote", cfg.depth_promote);
    get("risk_promote", cfg.risk_promote);
    get("swarm_cross_cut", cfg.swarm_cross_cut);
    get("cap_dependency_depth", cfg.cap_dependency_depth);
    get("cap_file_count", cfg.cap_file_count);
    get("cap_symbol_count", cfg.cap_symbol_count);
    get("cap_tree_height", cfg.cap_tree_height);
    get("sensitive_patterns", cfg.sensitive_patterns);
    return cfg;
}

inline json to_json(const RegexRuleTable& t) {
    json rules = json::array();
    for (const auto& r : t.rules) {
        rules.push_back({{"name", r.name},
                         {"keywords", r.keywords},
                         {"cues", r.cues},
                         {"topology", to_string(r.topology)}});
    }
    return {{"version", t.version}, {"rules", rules}, {"fallback", to_string(t.fallback)}};
}

inline RegexRuleTable regex_rules_from_json(const json& j) {
    RegexRuleTable t;
    t.version = j.at("version").get<int>();
    if (t.version != kRegexRulesVersion) {
        throw std::invalid_argument("unsupported rule table version " +
                                    std::to_string(t.version));
    }
    for (const auto& r : j.at("rules")) {
        RegexRule rule;
        rule.name = r.at("name").get<std::string>();
        rule.keywords = r.at("keywords").get<std::vector<std::string>>();
        rule.cues = r.value("cues", std::vector<std::string>{});
        rule.topology = topology_from_string(r.at("topology").get<std::string>());
        t.rules.push_back(std::move(rule));
    }
    if (j.contains("fallback")) t.fallback = topology_from_string(j.at("fallback").get<std::string>());
    return t;
}

}  // namespace rgao
