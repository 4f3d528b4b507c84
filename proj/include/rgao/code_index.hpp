#pragma once

// Hierarchical code index: root -> directories -> files -> symbols, with
// typed dependency edges (calls / imports / inherits) resolved by name across
// the indexed repo. Analysis is deliberately line/regex-level — one
// indentation-based grammar (Python) and one brace-based grammar (C/C++,
// partial JS/TS) — so indexing stays fast and dependency-free. Content is
// never stored; fetch_content re-reads from disk and detects staleness.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rgao/common.hpp"

namespace rgao {

inline constexpr int kIndexFormatVersion = 1;

class index_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Index no longer matches the on-disk tree (file changed, moved or deleted).
class stale_index_error : public index_error {
public:
    using index_error::index_error;
};

// Persisted index was written by an incompatible format version.
class format_version_error : public index_error {
public:
    using index_error::index_error;
};

enum class NodeKind : std::uint8_t { Root = 0, Directory, File, Symbol };

enum class SymbolType : std::uint8_t { Function = 0, Method, Class, Variable, Import, Block };

enum class EdgeType : std::uint8_t { Calls = 0, Imports, Inherits };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Root: return "root";
        case NodeKind::Directory: return "directory";
        case NodeKind::File: return "file";
        case NodeKind::Symbol: return "symbol";
    }
    return "root";
}

inline const char* to_string(SymbolType t) {
    switch (t) {
        case SymbolType::Function: return "function";
        case SymbolType::Method: return "method";
        case SymbolType::Class: return "class";
        case SymbolType::Variable: return "variable";
        case SymbolType::Import: return "import";
        case SymbolType::Block: return "block";
    }
    return "function";
}

inline const char* to_string(EdgeType t) {
    switch (t) {
        case EdgeType::Calls: return "calls";
        case EdgeType::Imports: return "imports";
        case EdgeType::Inherits: return "inherits";
    }
    return "calls";
}

inline NodeKind node_kind_from_string(const std::string& s) {
    if (s == "root") return NodeKind::Root;
    if (s == "directory") return NodeKind::Directory;
    if (s == "file") return NodeKind::File;
    if (s == "symbol") return NodeKind::Symbol;
    throw index_error("unknown node kind '" + s + "'");
}

inline SymbolType symbol_type_from_string(const std::string& s) {
    if (s == "function") return SymbolType::Function;
    if (s == "method") return SymbolType::Method;
    if (s == "class") return SymbolType::Class;
    if (s == "variable") return SymbolType::Variable;
    if (s == "import") return SymbolType::Import;
    if (s == "block") return SymbolType::Block;
    throw index_error("unknown symbol type '" + s + "'");
}

inline EdgeType edge_type_from_string(const std::string& s) {
    if (s == "calls") return EdgeType::Calls;
    if (s == "imports") return EdgeType::Imports;
    if (s == "inherits") return EdgeType::Inherits;
    throw index_error("unknown edge type '" + s + "'");
}

struct CodeNode {
    std::string id;
    NodeKind kind = NodeKind::Symbol;
    std::string name;
    std::string path;  // repo-relative; empty for the root node
    std::string parent;
    std::vector<std::string> children;

    // Symbols.
    SymbolType symbol_type = SymbolType::Function;
    std::string qualified;  // e.g. "Account.close"
    std::string signature;
    std::string docstring;  // raw text, capped at 400 chars at analysis time
    std::uint32_t line_start = 0;  // 1-based; files use 1..line_end
    std::uint32_t line_end = 0;
    std::uint64_t span_bytes = 0;  // content length backing the scorer

    // Files.
    std::string language;
    std::uint64_t file_size = 0;
    std::int64_t file_mtime_ns = 0;
    std::vector<std::string> imports;  // textual import list for summaries

    // Filled by summarize().
    std::string summary;           // deterministic mode
    std::string semantic_summary;  // semantic mode

    bool operator==(const CodeNode&) const = default;
};

struct DependencyEdge {
    std::string from;  // symbol node id
    std::string to;    // node id when resolved, raw target name otherwise
    EdgeType type = EdgeType::Calls;
    bool resolved = false;

    bool operator==(const DependencyEdge&) const = default;
};

struct IndexStats {
    std::uint64_t directories = 0;
    std::uint64_t files = 0;
    std::uint64_t symbols = 0;
    std::uint64_t edges = 0;
    std::uint64_t resolved_edges = 0;
    std::uint32_t max_depth = 0;
    std::vector<std::string> warnings;

    std::uint64_t total_nodes() const { return 1 + directories + files + symbols; }

    bool operator==(const IndexStats&) const = default;
};

enum class SummaryMode : std::uint8_t { Deterministic = 0, Semantic = 1 };

// Immutable after build/load; safe for concurrent readers. Nodes are stored
// in deterministic build order (sorted directory walks, line order within
// files), which save_index preserves.
class CodeIndexTree {
public:
    const std::string& root_id() const { return root_id_; }
    const std::string& root_dir() const { return root_dir_; }

    bool has(const std::string& id) const { return index_.count(id) != 0; }

    const CodeNode& node(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw index_error("unknown node id '" + id + "'");
        return nodes_[it->second];
    }

    const std::vector<CodeNode>& nodes() const { return nodes_; }
    const std::vector<DependencyEdge>& edges() const { return edges_; }
    const IndexStats& stats() const { return stats_; }

    std::uint32_t depth(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw index_error("unknown node id '" + id + "'");
        return depths_[it->second];
    }

    // Resolved edges leaving / entering a node.
    std::vector<const DependencyEdge*> out_edges(const std::string& id) const {
        return collect(out_, id);
    }
    std::vector<const DependencyEdge*> in_edges(const std::string& id) const {
        return collect(in_, id);
    }

    std::uint64_t degree(const std::string& id) const {
        auto it = degree_.find(id);
        return it == degree_.end() ? 0 : it->second;
    }
    std::uint64_t max_degree() const { return max_degree_; }

    double pagerank_norm(const std::string& id) const {
        auto it = pagerank_.find(id);
        return it == pagerank_.end() ? 0.0 : it->second;
    }

    bool summarized(SummaryMode mode) const {
        return mode == SummaryMode::Deterministic ? det_summaries_ : sem_summaries_;
    }
    bool has_summaries() const { return det_summaries_ || sem_summaries_; }

    // --- construction (build_index / load_index / summarize only) ---

    CodeNode& mutable_node(const std::string& id) {
        return nodes_[index_.at(id)];
    }

    std::vector<CodeNode>& mutable_nodes() { return nodes_; }

    void add_node(CodeNode n) {
        if (!index_.emplace(n.id, nodes_.size()).second) {
            throw index_error("duplicate node id '" + n.id + "'");
        }
        nodes_.push_back(std::move(n));
    }

    void set_root(const std::string& id, const std::string& dir) {
        root_id_ = id;
        root_dir_ = dir;
    }

    void set_edges(std::vector<DependencyEdge> e) { edges_ = std::move(e); }
    void set_stats(IndexStats s) { stats_ = std::move(s); }
    void mark_summarized(SummaryMode mode) {
        (mode == SummaryMode::Deterministic ? det_summaries_ : sem_summaries_) = true;
    }

    // Computes depths, adjacency, degrees and the normalized PageRank cache.
    // Called once at the end of build_index / load_index.
    void finalize() {
        depths_.assign(nodes_.size(), 0);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            // Parents always precede children in build order, so one forward
            // pass suffices.
            const auto& n = nodes_[i];
            depths_[i] = n.parent.empty() ? 0 : depths_[index_.at(n.parent)] + 1;
            stats_.max_depth = std::max(stats_.max_depth, depths_[i]);
        }
        out_.clear();
        in_.clear();
        degree_.clear();
        max_degree_ = 0;
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            if (!edges_[e].resolved) continue;
            out_[edges_[e].from].push_back(e);
            in_[edges_[e].to].push_back(e);
            ++degree_[edges_[e].from];
            ++degree_[edges_[e].to];
        }
        for (const auto& [id, d] : degree_) max_degree_ = std::max(max_degree_, d);
        compute_pagerank();
    }

private:
    std::vector<const DependencyEdge*> collect(
        const std::unordered_map<std::string, std::vector<std::size_t>>& adj,
        const std::string& id) const {
        std::vector<const DependencyEdge*> out;
        auto it = adj.find(id);
        if (it == adj.end()) return out;
        out.reserve(it->second.size());
        for (auto e : it->second) out.push_back(&edges_[e]);
        return out;
    }

    // PageRank over the dependency graph: rank flows from dependents to what
    // they depend on, so widely used symbols score high. 20 iterations,
    // damping 0.85, min-max normalized over symbol nodes.
    void compute_pagerank() {
        pagerank_.clear();
        std::vector<std::size_t> symbols;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].kind == NodeKind::Symbol) symbols.push_back(i);
        }
        if (symbols.empty()) return;
        std::unordered_map<std::string, std::size_t> pos;
        for (std::size_t k = 0; k < symbols.size(); ++k) pos[nodes_[symbols[k]].id] = k;

        const std::size_t n = symbols.size();
        std::vector<std::vector<std::size_t>> incoming(n);
        std::vector<std::size_t> outdeg(n, 0);
        for (const auto& e : edges_) {
            if (!e.resolved) continue;
            auto f = pos.find(e.from);
            auto t = pos.find(e.to);
            if (f == pos.end() || t == pos.end()) continue;
            incoming[t->second].push_back(f->second);
            ++outdeg[f->second];
        }
        const double d = 0.85;
        std::vector<double> pr(n, 1.0 / static_cast<double>(n)), next(n);
        for (int iter = 0; iter < 20; ++iter) {
            double dangling = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (outdeg[i] == 0) dangling += pr[i];
            }
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (auto u : incoming[i]) acc += pr[u] / static_cast<double>(outdeg[u]);
                next[i] = (1.0 - d) / static_cast<double>(n) +
                          d * (acc + dangling / static_cast<double>(n));
            }
            pr.swap(next);
        }
        double lo = pr[0], hi = pr[0];
        for (double x : pr) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        for (std::size_t k = 0; k < n; ++k) {
            pagerank_[nodes_[symbols[k]].id] = hi > lo ? (pr[k] - lo) / (hi - lo) : 0.0;
        }
    }

    std::vector<CodeNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<DependencyEdge> edges_;
    std::vector<std::uint32_t> depths_;
    std::unordered_map<std::string, std::vector<std::size_t>> out_, in_;
    std::unordered_map<std::string, std::uint64_t> degree_;
    std::unordered_map<std::string, double> pagerank_;
    std::uint64_t max_degree_ = 0;
    IndexStats stats_;
    std::string root_id_;
    std::string root_dir_;
    bool det_summaries_ = false;
    bool sem_summaries_ = false;
};

struct BuildOptions {
    std::uint32_t max_height = 10;  // directories deeper than this are skipped
};

namespace detail {

inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool is_call_keyword(const std::string& name, bool python) {
    static const std::unordered_set<std::string> py = {
        "if", "elif", "else", "for", "while", "return", "yield", "def", "class", "print",
        "in", "is", "and", "or", "not", "with", "as", "try", "except", "finally", "lambda",
        "assert", "raise", "pass", "import", "from", "self", "super", "str", "int", "float",
        "list", "dict", "set", "tuple", "len", "range", "isinstance", "Exception", "True",
        "False", "None"};
    static const std::unordered_set<std::string> brace = {
        "if", "for", "while", "switch", "catch", "return", "sizeof", "new", "delete",
        "throw", "do", "else", "case", "defined", "assert", "static_cast", "dynamic_cast",
        "reinterpret_cast", "const_cast", "function", "typeof", "require"};
    return (python ? py : brace).count(name) != 0;
}

// Symbol found by an analyzer, before node-id assignment.
struct RawSymbol {
    std::string name;
    std::string qualified;
    SymbolType type = SymbolType::Function;
    std::string signature;
    std::string docstring;
    std::uint32_t line_start = 0;
    std::uint32_t line_end = 0;
    int nest = 0;  // 0 = top level of the file
    std::string parent_qualified;
};

struct RawEdge {
    std::size_t from_symbol;  // index into RawSymbol vector
    std::string target;       // unresolved name
    EdgeType type = EdgeType::Calls;
};

struct FileAnalysis {
    std::vector<RawSymbol> symbols;
    std::vector<RawEdge> edges;
    std::vector<std::string> imports;  // textual module/header list
    std::string module_docstring;
};

inline void split_lines(const std::string& text, std::vector<std::string>& lines) {
    lines.clear();
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n') {
        lines.pop_back();
    }
}

inline std::string cap_text(std::string s, std::size_t n) {
    if (s.size() > n) s.resize(n);
    return s;
}

// Extracts call sites on a line: identifiers directly followed by '(' that
// are not keywords and not the definition itself.
inline void extract_calls(const std::string& line, bool python, std::vector<std::string>& out) {
    std::string t = strip(line);
    if (python && (t.rfind("def ", 0) == 0 || t.rfind("class ", 0) == 0)) {
        // Still scan the argument list (default-value calls), but skip the
        // defined name itself by starting past it.
        std::size_t paren = line.find('(');
        if (paren == std::string::npos) return;
        extract_calls(line.substr(paren + 1), python, out);
        return;
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] != '(') continue;
        std::size_t e = i;
        while (e > 0 && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
        std::size_t b = e;
        while (b > 0 && ident_char(line[b - 1])) --b;
        if (b == e) continue;
        std::string name = line.substr(b, e - b);
        if (std::isdigit(static_cast<unsigned char>(name[0]))) continue;
        if (is_call_keyword(name, python)) continue;
        out.push_back(std::move(name));
    }
}

// --- Python analyzer (indentation grammar) ---

inline std::size_t indent_of(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return i;
}

// Reads a docstring starting at `at` (0-based line index just after a def /
// class / module start). Returns the text and advances nothing.
inline std::string read_py_docstring(const std::vector<std::string>& lines, std::size_t at) {
    while (at < lines.size() && strip(lines[at]).empty()) ++at;
    if (at >= lines.size()) return "";
    std::string t = strip(lines[at]);
    std::string quote;
    if (t.rfind("\"\"\"", 0) == 0) quote = "\"\"\"";
    else if (t.rfind("'''", 0) == 0) quote = "'''";
    else return "";
    std::string body = t.substr(3);
    std::size_t close = body.find(quote);
    if (close != std::string::npos) return cap_text(strip(body.substr(0, close)), 400);
    std::string acc = strip(body);
    for (std::size_t i = at + 1; i < lines.size(); ++i) {
        std::string s = lines[i];
        std::size_t c = s.find(quote);
        if (c != std::string::npos) {
            std::string last = strip(s.substr(0, c));
            if (!last.empty()) acc += (acc.empty() ? "" : " ") + last;
            return cap_text(acc, 400);
        }
        std::string mid = strip(s);
        if (!mid.empty()) acc += (acc.empty() ? "" : " ") + mid;
    }
    return cap_text(acc, 400);
}

inline FileAnalysis analyze_python(const std::string& text) {
    FileAnalysis fa;
    std::vector<std::string> lines;
    split_lines(text, lines);
    fa.module_docstring = read_py_docstring(lines, 0);

    struct Open {
        std::size_t sym;
        std::size_t indent;
    };
    std::vector<Open> stack;

    auto close_down_to = [&](std::size_t indent, std::uint32_t line_no) {
        while (!stack.empty() && stack.back().indent >= indent) {
            fa.symbols[stack.back().sym].line_end = line_no;
            stack.pop_back();
        }
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& raw = lines[i];
        std::string t = strip(raw);
        if (t.empty() || t[0] == '#') continue;
        std::size_t ind = indent_of(raw);
        const auto line_no = static_cast<std::uint32_t>(i + 1);

        auto parent_q = [&]() -> std::string {
            return stack.empty() ? "" : fa.symbols[stack.back().sym].qualified;
        };
        auto in_class = [&]() {
            return !stack.empty() && fa.symbols[stack.back().sym].type == SymbolType::Class;
        };

        if (t.rfind("def ", 0) == 0 || t.rfind("class ", 0) == 0) {
            bool is_class = t[0] == 'c';
            close_down_to(ind, static_cast<std::uint32_t>(i));
            std::size_t b = is_class ? 6 : 4;
            std::size_t e = b;
            while (e < t.size() && ident_char(t[e])) ++e;
            std::string name = t.substr(b, e - b);
            if (name.empty()) continue;

            RawSymbol sym;
            sym.name = name;
            sym.parent_qualified = parent_q();
            sym.qualified = sym.parent_qualified.empty() ? name : sym.parent_qualified + "." + name;
            sym.type = is_class ? SymbolType::Class
                                : (in_class() ? SymbolType::Method : SymbolType::Function);
            sym.signature = cap_text(t, 200);
            sym.line_start = line_no;
            sym.line_end = static_cast<std::uint32_t>(lines.size());
            sym.nest = static_cast<int>(stack.size());
            sym.docstring = read_py_docstring(lines, i + 1);

            if (is_class) {
                std::size_t po = t.find('(', e);
                if (po != std::string::npos) {
                    std::size_t pc = t.find(')', po);
                    std::string bases = t.substr(po + 1, pc == std::string::npos ? std::string::npos
                                                                                 : pc - po - 1);
                    std::stringstream ss(bases);
                    std::string base;
                    while (std::getline(ss, base, ',')) {
                        base = strip(base);
                        if (!base.empty() && base != "object") {
                            fa.edges.push_back({fa.symbols.size(), base, EdgeType::Inherits});
                        }
                    }
                }
            }
            stack.push_back({fa.symbols.size(), ind});
            fa.symbols.push_back(std::move(sym));
            continue;
        }

        // Any other statement at indent <= an open symbol's indent closes it
        // at the previous line.
        close_down_to(ind, static_cast<std::uint32_t>(i));

        if (ind == 0 && (t.rfind("import ", 0) == 0 || t.rfind("from ", 0) == 0)) {
            if (t.rfind("import ", 0) == 0) {
                std::stringstream ss(t.substr(7));
                std::string mod;
                while (std::getline(ss, mod, ',')) {
                    mod = strip(mod);
                    std::size_t as = mod.find(" as ");
                    if (as != std::string::npos) mod = strip(mod.substr(0, as));
                    if (mod.empty()) continue;
                    fa.imports.push_back(mod);
                    RawSymbol sym;
                    sym.name = mod;
                    sym.qualified = mod;
                    sym.type = SymbolType::Import;
                    sym.signature = cap_text(t, 200);
                    sym.line_start = sym.line_end = line_no;
                    fa.edges.push_back({fa.symbols.size(), mod, EdgeType::Imports});
                    fa.symbols.push_back(std::move(sym));
                }
            } else {
                std::size_t imp = t.find(" import ");
                if (imp == std::string::npos) continue;
                std::string module = strip(t.substr(5, imp - 5));
                std::stringstream ss(t.substr(imp + 8));
                std::string item;
                while (std::getline(ss, item, ',')) {
                    item = strip(item);
                    std::size_t as = item.find(" as ");
                    if (as != std::string::npos) item = strip(item.substr(0, as));
                    if (item.empty() || item == "*") continue;
                    fa.imports.push_back(module + "." + item);
                    RawSymbol sym;
                    sym.name = item;
                    sym.qualified = item;
                    sym.type = SymbolType::Import;
                    sym.signature = cap_text(t, 200);
                    sym.line_start = sym.line_end = line_no;
                    fa.edges.push_back({fa.symbols.size(), item, EdgeType::Imports});
                    fa.symbols.push_back(std::move(sym));
                }
            }
            continue;
        }

        // Module-level assignment => variable symbol.
        if (ind == 0) {
            std::size_t e = 0;
            while (e < t.size() && ident_char(t[e])) ++e;
            if (e > 0 && !std::isdigit(static_cast<unsigned char>(t[0]))) {
                std::size_t p = e;
                while (p < t.size() && t[p] == ' ') ++p;
                if (p < t.size() && t[p] == '=' && (p + 1 >= t.size() || t[p + 1] != '=')) {
                    RawSymbol sym;
                    sym.name = t.substr(0, e);
                    sym.qualified = sym.name;
                    sym.type = SymbolType::Variable;
                    sym.signature = cap_text(t, 200);
                    sym.line_start = sym.line_end = line_no;
                    fa.symbols.push_back(std::move(sym));
                }
            }
        }
    }
    for (auto& open : stack) {
        fa.symbols[open.sym].line_end = static_cast<std::uint32_t>(lines.size());
    }

    // Call extraction: attribute each call site to the innermost enclosing
    // symbol (smallest containing span). Module-level calls have no symbol
    // to originate from and are dropped.
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line_no = static_cast<std::uint32_t>(i + 1);
        std::vector<std::string> calls;
        extract_calls(lines[i], /*python=*/true, calls);
        if (calls.empty()) continue;
        std::size_t best = fa.symbols.size();
        std::uint64_t best_span = UINT64_MAX;
        for (std::size_t s = 0; s < fa.symbols.size(); ++s) {
            const auto& sym = fa.symbols[s];
            if (sym.type == SymbolType::Import) continue;
            if (line_no < sym.line_start || line_no > sym.line_end) continue;
            std::uint64_t span = sym.line_end - sym.line_start;
            if (span < best_span) {
                best = s;
                best_span = span;
            }
        }
        if (best == fa.symbols.size()) continue;
        for (auto& c : calls) {
            if (c == fa.symbols[best].name) continue;  // skip trivial self-hit on def line
            fa.edges.push_back({best, std::move(c), EdgeType::Calls});
        }
    }
    return fa;
}

// --- Brace analyzer (C/C++ fully, JS/TS partially) ---

inline FileAnalysis analyze_brace(const std::string& text) {
    FileAnalysis fa;
    std::vector<std::string> lines;
    split_lines(text, lines);

    struct Scope {
        std::size_t sym;   // index into fa.symbols, or SIZE_MAX for plain blocks
        int open_depth;    // brace depth at which this scope began
        bool is_class;
    };
    std::vector<Scope> scopes;
    int depth = 0;

    auto class_parent = [&]() -> std::string {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            if (it->sym != SIZE_MAX && it->is_class) return fa.symbols[it->sym].qualified;
        }
        return "";
    };
    auto inside_function = [&]() {
        for (const auto& s : scopes) {
            if (s.sym != SIZE_MAX && !s.is_class) return true;
        }
        return false;
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& raw = lines[i];
        std::string t = strip(raw);
        const auto line_no = static_cast<std::uint32_t>(i + 1);

        if (t.rfind("#include", 0) == 0) {
            std::size_t b = t.find_first_of("\"<");
            std::size_t e = t.find_first_of("\">", b + 1);
            if (b != std::string::npos && e != std::string::npos && e > b + 1) {
                std::string header = t.substr(b + 1, e - b - 1);
                fa.imports.push_back(header);
                RawSymbol sym;
                sym.name = header;
                sym.qualified = header;
                sym.type = SymbolType::Import;
                sym.signature = cap_text(t, 200);
                sym.line_start = sym.line_end = line_no;
                fa.edges.push_back({fa.symbols.size(), header, EdgeType::Imports});
                fa.symbols.push_back(std::move(sym));
            }
        } else if (t.rfind("import ", 0) == 0 && t.find(" from ") != std::string::npos) {
            std::size_t q1 = t.find_first_of("'\"");
            std::size_t q2 = t.find_first_of("'\"", q1 + 1);
            if (q1 != std::string::npos && q2 != std::string::npos) {
                std::string module = t.substr(q1 + 1, q2 - q1 - 1);
                fa.imports.push_back(module);
                RawSymbol sym;
                sym.name = module;
                sym.qualified = module;
                sym.type = SymbolType::Import;
                sym.signature = cap_text(t, 200);
                sym.line_start = sym.line_end = line_no;
                fa.edges.push_back({fa.symbols.size(), module, EdgeType::Imports});
                fa.symbols.push_back(std::move(sym));
            }
        } else if (!t.empty() && t[0] != '/' && t[0] != '*' && t.find('{') != std::string::npos) {
            // Class / struct definition?
            bool handled = false;
            for (const char* kw : {"class ", "struct "}) {
                std::size_t at = t.find(kw);
                if (at != 0) continue;
                std::size_t b = std::string(kw).size();
                std::size_t e = b;
                while (e < t.size() && ident_char(t[e])) ++e;
                if (e == b) break;
                RawSymbol sym;
                sym.name = t.substr(b, e - b);
                sym.parent_qualified = class_parent();
                sym.qualified = sym.parent_qualified.empty() ? sym.name
                                                             : sym.parent_qualified + "." + sym.name;
                sym.type = SymbolType::Class;
                sym.signature = cap_text(t, 200);
                sym.line_start = line_no;
                sym.line_end = static_cast<std::uint32_t>(lines.size());
                sym.nest = static_cast<int>(scopes.size());
                std::size_t colon = t.find(':', e);
                std::size_t brace = t.find('{', e);
                if (colon != std::string::npos && colon < brace) {
                    std::string bases = t.substr(colon + 1, brace - colon - 1);
                    std::stringstream ss(bases);
                    std::string base;
                    while (std::getline(ss, base, ',')) {
                        base = strip(base);
                        for (const char* mod : {"public ", "protected ", "private ", "virtual "}) {
                            if (base.rfind(mod, 0) == 0) base = strip(base.substr(std::string(mod).size()));
                        }
                        std::size_t lt = base.find('<');
                        if (lt != std::string::npos) base = base.substr(0, lt);
                        if (!base.empty()) {
                            fa.edges.push_back({fa.symbols.size(), base, EdgeType::Inherits});
                        }
                    }
                }
                std::size_t ext = t.find(" extends ");
                if (ext != std::string::npos) {
                    std::string base = strip(t.substr(ext + 9));
                    std::size_t be = 0;
                    while (be < base.size() && ident_char(base[be])) ++be;
                    if (be > 0) fa.edges.push_back({fa.symbols.size(), base.substr(0, be), EdgeType::Inherits});
                }
                scopes.push_back({fa.symbols.size(), depth, true});
                fa.symbols.push_back(std::move(sym));
                handled = true;
                break;
            }
            if (!handled && !inside_function()) {
                // Function or method definition: `name(args) ... {` with no
                // terminating semicolon before the brace.
                std::size_t paren = t.find('(');
                if (paren != std::string::npos && paren > 0 &&
                    t.find(';') == std::string::npos &&
                    t.find("=") > t.find('(')) {
                    std::size_t e = paren;
                    while (e > 0 && std::isspace(static_cast<unsigned char>(t[e - 1]))) --e;
                    std::size_t b = e;
                    while (b > 0 && ident_char(t[b - 1])) --b;
                    if (e > b) {
                        std::string name = t.substr(b, e - b);
                        if (!std::isdigit(static_cast<unsigned char>(name[0])) &&
                            !is_call_keyword(name, /*python=*/false)) {
                            RawSymbol sym;
                            sym.name = name;
                            sym.parent_qualified = class_parent();
                            sym.qualified = sym.parent_qualified.empty()
                                                ? name
                                                : sym.parent_qualified + "." + name;
                            sym.type = sym.parent_qualified.empty() ? SymbolType::Function
                                                                    : SymbolType::Method;
                            sym.signature = cap_text(t, 200);
                            sym.line_start = line_no;
                            sym.line_end = static_cast<std::uint32_t>(lines.size());
                            sym.nest = static_cast<int>(scopes.size());
                            scopes.push_back({fa.symbols.size(), depth, false});
                            fa.symbols.push_back(std::move(sym));
                            handled = true;
                        }
                    }
                }
            }
            if (!handled && depth == 0 && t == "{") {
                RawSymbol sym;
                sym.name = "block@" + std::to_string(line_no);
                sym.qualified = sym.name;
                sym.type = SymbolType::Block;
                sym.signature = "{";
                sym.line_start = line_no;
                sym.line_end = static_cast<std::uint32_t>(lines.size());
                scopes.push_back({fa.symbols.size(), depth, false});
                fa.symbols.push_back(std::move(sym));
            }
        }

        for (char c : raw) {
            if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                while (!scopes.empty() && depth <= scopes.back().open_depth) {
                    if (scopes.back().sym != SIZE_MAX) {
                        fa.symbols[scopes.back().sym].line_end = line_no;
                    }
                    scopes.pop_back();
                }
            }
        }
    }
    for (auto& s : scopes) {
        if (s.sym != SIZE_MAX) fa.symbols[s.sym].line_end = static_cast<std::uint32_t>(lines.size());
    }

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line_no = static_cast<std::uint32_t>(i + 1);
        std::string t = strip(lines[i]);
        if (t.rfind("#include", 0) == 0) continue;
        std::vector<std::string> calls;
        extract_calls(lines[i], /*python=*/false, calls);
        if (calls.empty()) continue;
        std::size_t best = fa.symbols.size();
        std::uint64_t best_span = UINT64_MAX;
        for (std::size_t s = 0; s < fa.symbols.size(); ++s) {
            const auto& sym = fa.symbols[s];
            if (sym.type == SymbolType::Import) continue;
            if (line_no < sym.line_start || line_no > sym.line_end) continue;
            std::uint64_t span = sym.line_end - sym.line_start;
            if (span < best_span) {
                best = s;
                best_span = span;
            }
        }
        if (best == fa.symbols.size()) continue;
        for (auto& c : calls) {
            if (line_no == fa.symbols[best].line_start && c == fa.symbols[best].name) continue;
            fa.edges.push_back({best, std::move(c), EdgeType::Calls});
        }
    }
    return fa;
}

struct LanguageInfo {
    std::string name;
    bool python = false;
    bool full_support = false;
};

inline std::optional<LanguageInfo> language_for(const std::filesystem::path& file) {
    std::string ext = file.extension().string();
    if (ext == ".py") return LanguageInfo{"python", true, true};
    if (ext == ".cpp" || ext == ".cc" || ext == ".cxx" || ext == ".hpp" || ext == ".h" || ext == ".hh") {
        return LanguageInfo{"cpp", false, true};
    }
    if (ext == ".js") return LanguageInfo{"javascript", false, false};
    if (ext == ".ts") return LanguageInfo{"typescript", false, false};
    return std::nullopt;
}

}  // namespace detail

inline bool language_fully_supported(const std::string& lang) {
    return lang == "python" || lang == "cpp";
}

// Builds the index for a directory tree. Deterministic: directory entries
// are walked in sorted order and symbol ids derive from path + qualified
// name + start line, so two builds of the same tree are identical.
inline CodeIndexTree build_index(const std::string& root_dir,
                                 const BuildOptions& options = {}) {
    namespace fs = std::filesystem;
    fs::path root(root_dir);
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw index_error("not a directory: " + root_dir);
    }

    CodeIndexTree tree;
    IndexStats stats;
    std::vector<DependencyEdge> edges;

    CodeNode root_node;
    root_node.id = "<root>";
    root_node.kind = NodeKind::Root;
    root_node.name = root.filename().string();
    tree.add_node(root_node);
    tree.set_root("<root>", fs::absolute(root).string());

    // Name -> symbol node ids, for cross-repo edge resolution.
    std::unordered_map<std::string, std::vector<std::string>> by_name;
    auto note_symbol = [&by_name](const std::string& name, const std::string& id) {
        by_name[name].push_back(id);
    };
    struct PendingEdge {
        std::string from;
        std::string target;
        EdgeType type;
    };
    std::vector<PendingEdge> pending;

    auto process_file = [&](const fs::path& file, const std::string& rel,
                            const std::string& parent_id, const detail::LanguageInfo& lang) {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            stats.warnings.push_back("unreadable file skipped: " + rel);
            return;
        }
        std::stringstream buf;
        buf << in.rdbuf();
        std::string text = buf.str();

        auto fa = lang.python ? detail::analyze_python(text) : detail::analyze_brace(text);

        std::vector<std::string> lines;
        detail::split_lines(text, lines);

        CodeNode fnode;
        fnode.id = rel;
        fnode.kind = NodeKind::File;
        fnode.name = file.filename().string();
        fnode.path = rel;
        fnode.parent = parent_id;
        fnode.language = lang.name;
        fnode.line_start = 1;
        fnode.line_end = static_cast<std::uint32_t>(lines.size());
        fnode.span_bytes = text.size();
        fnode.file_size = text.size();
        std::error_code ec;
        auto mtime = fs::last_write_time(file, ec);
        fnode.file_mtime_ns = ec ? 0 : static_cast<std::int64_t>(mtime.time_since_epoch().count());
        fnode.docstring = fa.module_docstring;
        fnode.imports = fa.imports;

        // Assign node ids and parentage for symbols.
        std::vector<std::string> ids(fa.symbols.size());
        std::unordered_map<std::string, std::string> by_qualified;
        for (std::size_t s = 0; s < fa.symbols.size(); ++s) {
            const auto& raw = fa.symbols[s];
            ids[s] = rel + "::" + raw.qualified + "@" + std::to_string(raw.line_start);
            by_qualified[raw.qualified] = ids[s];
        }
        std::vector<CodeNode> sym_nodes;
        sym_nodes.reserve(fa.symbols.size());
        for (std::size_t s = 0; s < fa.symbols.size(); ++s) {
            const auto& raw = fa.symbols[s];
            CodeNode n;
            n.id = ids[s];
            n.kind = NodeKind::Symbol;
            n.name = raw.name;
            n.qualified = raw.qualified;
            n.path = rel;
            n.symbol_type = raw.type;
            n.signature = raw.signature;
            n.docstring = raw.docstring;
            n.line_start = raw.line_start;
            n.line_end = raw.line_end;
            n.language = lang.name;
            std::uint64_t bytes = 0;
            for (std::uint32_t ln = raw.line_start; ln <= raw.line_end && ln <= lines.size(); ++ln) {
                bytes += lines[ln - 1].size() + 1;
            }
            n.span_bytes = bytes;
            auto pit = raw.parent_qualified.empty() ? by_qualified.end()
                                                    : by_qualified.find(raw.parent_qualified);
            n.parent = pit == by_qualified.end() ? rel : pit->second;
            sym_nodes.push_back(std::move(n));
        }
        // Duplicate ids can only come from duplicate (qualified, line) pairs;
        // drop later duplicates rather than fail the whole build.
        std::unordered_set<std::string> seen;
        std::vector<std::size_t> kept_index(fa.symbols.size(), SIZE_MAX);
        tree.add_node(fnode);
        for (std::size_t s = 0; s < sym_nodes.size(); ++s) {
            if (!seen.insert(sym_nodes[s].id).second) {
                stats.warnings.push_back("duplicate symbol dropped: " + sym_nodes[s].id);
                continue;
            }
            kept_index[s] = s;
            note_symbol(sym_nodes[s].name, sym_nodes[s].id);
            if (sym_nodes[s].symbol_type != SymbolType::Import) {
                note_symbol(sym_nodes[s].qualified, sym_nodes[s].id);
            }
            ++stats.symbols;
        }
        for (std::size_t s = 0; s < sym_nodes.size(); ++s) {
            if (kept_index[s] == SIZE_MAX) continue;
            tree.add_node(sym_nodes[s]);
            tree.mutable_node(sym_nodes[s].parent).children.push_back(sym_nodes[s].id);
        }
        for (const auto& e : fa.edges) {
            if (kept_index[e.from_symbol] == SIZE_MAX) continue;
            pending.push_back({ids[e.from_symbol], e.target, e.type});
        }
        tree.mutable_node(parent_id).children.push_back(rel);
        ++stats.files;
    };

    // Sorted, depth-capped walk.
    struct DirEntry {
        fs::path path;
        std::string rel;
        std::string parent_id;
        std::uint32_t depth;
    };
    std::vector<DirEntry> queue = {{root, "", "<root>", 0}};
    while (!queue.empty()) {
        DirEntry at = queue.front();
        queue.erase(queue.begin());
        std::vector<fs::directory_entry> entries;
        for (const auto& entry : fs::directory_iterator(at.path)) entries.push_back(entry);
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
        for (const auto& entry : entries) {
            std::string fname = entry.path().filename().string();
            if (fname.empty() || fname[0] == '.') continue;
            std::string rel = at.rel.empty() ? fname : at.rel + "/" + fname;
            if (entry.is_directory()) {
                if (at.depth + 1 >= options.max_height) {
                    stats.warnings.push_back("depth cap reached, skipped: " + rel);
                    continue;
                }
                CodeNode dir;
                dir.id = rel;
                dir.kind = NodeKind::Directory;
                dir.name = fname;
                dir.path = rel;
                dir.parent = at.parent_id;
                tree.add_node(dir);
                tree.mutable_node(at.parent_id).children.push_back(rel);
                ++stats.directories;
                queue.push_back({entry.path(), rel, rel, at.depth + 1});
            } else if (entry.is_regular_file()) {
                auto lang = detail::language_for(entry.path());
                if (!lang) continue;
                process_file(entry.path(), rel, at.parent_id, *lang);
            }
        }
    }

    // Resolve pending edges by name. Non-import symbols win over import
    // bindings; remaining ties break on lexicographically smallest id.
    for (auto& pe : pending) {
        DependencyEdge edge;
        edge.from = pe.from;
        edge.type = pe.type;
        auto it = by_name.find(pe.target);
        std::string best;
        if (it != by_name.end()) {
            for (const auto& cand : it->second) {
                if (cand == pe.from) continue;
                const auto& cn = tree.node(cand);
                bool cand_import = cn.symbol_type == SymbolType::Import;
                if (best.empty()) {
                    best = cand;
                    continue;
                }
                const auto& bn = tree.node(best);
                bool best_import = bn.symbol_type == SymbolType::Import;
                if (cand_import != best_import ? !cand_import : cand < best) best = cand;
            }
        }
        if (!best.empty()) {
            edge.to = best;
            edge.resolved = true;
            ++stats.resolved_edges;
        } else {
            edge.to = pe.target;
            edge.resolved = false;
        }
        edges.push_back(std::move(edge));
    }
    // De-duplicate identical edges (same origin, target, type).
    std::sort(edges.begin(), edges.end(), [](const DependencyEdge& a, const DependencyEdge& b) {
        return std::tie(a.from, a.to, a.type, a.resolved) < std::tie(b.from, b.to, b.type, b.resolved);
    });
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    stats.edges = edges.size();
    stats.resolved_edges = 0;
    for (const auto& e : edges) {
        if (e.resolved) ++stats.resolved_edges;
    }

    tree.set_edges(std::move(edges));
    tree.set_stats(std::move(stats));
    tree.finalize();
    return tree;
}

namespace detail {

inline std::string join_imports(const std::vector<std::string>& imports, std::size_t limit) {
    std::string out;
    std::size_t n = std::min(imports.size(), limit);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ", ";
        out += imports[i];
    }
    if (imports.size() > limit) out += ", …";
    return out;
}

inline std::string first_line(const std::string& s) {
    std::size_t nl = s.find('\n');
    std::string line = nl == std::string::npos ? s : s.substr(0, nl);
    std::size_t dot = line.find(". ");
    return strip(dot == std::string::npos ? line : line.substr(0, dot + 1));
}

inline std::string edge_count_summary(const CodeIndexTree& tree, const std::string& id) {
    std::size_t calls = 0, imports = 0, inherits = 0;
    for (const auto* e : tree.out_edges(id)) {
        switch (e->type) {
            case EdgeType::Calls: ++calls; break;
            case EdgeType::Imports: ++imports; break;
            case EdgeType::Inherits: ++inherits; break;
        }
    }
    std::string out;
    auto add = [&out](const char* label, std::size_t n) {
        if (n == 0) return;
        if (!out.empty()) out += ", ";
        out += std::string(label) + "(" + std::to_string(n) + ")";
    };
    add("calls", calls);
    add("imports", imports);
    add("inherits", inherits);
    return out;
}

}  // namespace detail

// Fills per-node summaries, children before parents. Deterministic mode is
// purely structural; semantic mode layers in docstrings (≤ 200 chars), typed
// edge counts and complete import lists. Pure text generation — repeated
// calls produce identical strings.
inline void summarize(CodeIndexTree& tree, SummaryMode mode) {
    // Nodes are stored parents-first, so walking backwards is bottom-up.
    auto& nodes = tree.mutable_nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        CodeNode& n = *it;
        std::string det;
        std::string head;  // symbol header without the docstring excerpt
        switch (n.kind) {
            case NodeKind::Symbol: {
                head = std::string(to_string(n.symbol_type)) + " " + n.qualified + " (" + n.path +
                       ":" + std::to_string(n.line_start) + ")";
                det = head;
                std::string doc = detail::first_line(n.docstring);
                if (!doc.empty()) det += " — " + doc;
                break;
            }
            case NodeKind::File: {
                std::size_t syms = n.children.size();
                det = "file " + n.name + " (" + n.path + "): " + n.language + ", " +
                      std::to_string(syms) + " symbols";
                if (!n.imports.empty()) det += "; imports: " + detail::join_imports(n.imports, 5);
                break;
            }
            case NodeKind::Directory: {
                std::size_t files = 0, dirs = 0;
                for (const auto& c : n.children) {
                    (tree.node(c).kind == NodeKind::File ? files : dirs) += 1;
                }
                det = "directory " + n.path + ": " + std::to_string(files) + " files, " +
                      std::to_string(dirs) + " subdirectories";
                break;
            }
            case NodeKind::Root: {
                const auto& s = tree.stats();
                det = "root: " + std::to_string(s.directories) + " directories, " +
                      std::to_string(s.files) + " files, " + std::to_string(s.symbols) + " symbols";
                break;
            }
        }
        n.summary = det;
        if (mode == SummaryMode::Semantic) {
            std::string sem = det;
            if (n.kind == NodeKind::Symbol) {
                // The capped full docstring replaces the first-line excerpt
                // rather than joining it, so long first lines cannot leak
                // past the 200-char cap.
                sem = head;
                if (!n.docstring.empty()) sem += " | doc: " + detail::cap_text(n.docstring, 200);
                std::string edges = detail::edge_count_summary(tree, n.id);
                if (!edges.empty()) sem += " | edges: " + edges;
            } else if (n.kind == NodeKind::File && !n.imports.empty()) {
                sem = "file " + n.name + " (" + n.path + "): " + n.language + ", " +
                      std::to_string(n.children.size()) + " symbols; imports: " +
                      detail::join_imports(n.imports, n.imports.size());
            }
            n.semantic_summary = sem;
        }
    }
    tree.mark_summarized(mode);
}

// Reads back the exact content a node covers: whole file for file nodes, the
// line span for symbols. Verifies size+mtime against the file node recorded
// at index time and throws stale_index_error on any mismatch or missing file.
inline std::string fetch_content(const CodeIndexTree& tree, const std::string& id) {
    namespace fs = std::filesystem;
    const CodeNode& n = tree.node(id);
    if (n.kind == NodeKind::Root || n.kind == NodeKind::Directory) {
        throw std::invalid_argument("fetch_content targets files or symbols, got " +
                                    std::string(to_string(n.kind)));
    }
    const CodeNode& fnode = n.kind == NodeKind::File ? n : tree.node(n.path);
    fs::path file = fs::path(tree.root_dir()) / fnode.path;
    std::error_code ec;
    if (!fs::exists(file, ec) || ec) {
        throw stale_index_error("indexed file no longer exists: " + fnode.path);
    }
    auto size = fs::file_size(file, ec);
    if (ec || size != fnode.file_size) {
        throw stale_index_error("file size changed since indexing: " + fnode.path);
    }
    auto mtime = fs::last_write_time(file, ec);
    if (ec || static_cast<std::int64_t>(mtime.time_since_epoch().count()) != fnode.file_mtime_ns) {
        throw stale_index_error("file modified since indexing: " + fnode.path);
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) throw stale_index_error("indexed file unreadable: " + fnode.path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (n.kind == NodeKind::File) return text;

    std::vector<std::string> lines;
    detail::split_lines(text, lines);
    std::string out;
    for (std::uint32_t ln = n.line_start; ln <= n.line_end && ln <= lines.size(); ++ln) {
        out += lines[ln - 1];
        out += '\n';
    }
    return out;
}

enum class EdgeDirection : std::uint8_t { Out = 0, In = 1, Both = 2 };

// One-hop dependency neighborhood over resolved edges, deterministically
// ordered by (node id, edge type).
inline std::vector<std::pair<std::string, EdgeType>> neighbors_1hop(
    const CodeIndexTree& tree, const std::string& id, EdgeDirection dir = EdgeDirection::Both) {
    std::vector<std::pair<std::string, EdgeType>> out;
    if (dir == EdgeDirection::Out || dir == EdgeDirection::Both) {
        for (const auto* e : tree.out_edges(id)) out.emplace_back(e->to, e->type);
    }
    if (dir == EdgeDirection::In || dir == EdgeDirection::Both) {
        for (const auto* e : tree.in_edges(id)) out.emplace_back(e->from, e->type);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline json to_json(const CodeIndexTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
        json jn = {{"id", n.id},
                   {"kind", to_string(n.kind)},
                   {"name", n.name},
                   {"path", n.path},
                   {"parent", n.parent},
                   {"children", n.children}};
        if (n.kind == NodeKind::Symbol) {
            jn["symbol_type"] = to_string(n.symbol_type);
            jn["qualified"] = n.qualified;
            jn["signature"] = n.signature;
        }
        if (n.kind == NodeKind::Symbol || n.kind == NodeKind::File) {
            jn["docstring"] = n.docstring;
            jn["line_start"] = n.line_start;
            jn["line_end"] = n.line_end;
            jn["span_bytes"] = n.span_bytes;
            jn["language"] = n.language;
        }
        if (n.kind == NodeKind::File) {
            jn["file_size"] = n.file_size;
            jn["file_mtime_ns"] = n.file_mtime_ns;
            jn["imports"] = n.imports;
        }
        if (!n.summary.empty()) jn["summary"] = n.summary;
        if (!n.semantic_summary.empty()) jn["semantic_summary"] = n.semantic_summary;
        nodes.push_back(std::move(jn));
    }
    json edges = json::array();
    for (const auto& e : tree.edges()) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"type", to_string(e.type)},
                         {"resolved", e.resolved}});
    }
    const auto& s = tree.stats();
    return {{"version", kIndexFormatVersion},
            {"root", tree.root_id()},
            {"root_dir", tree.root_dir()},
            {"summarized",
             {{"deterministic", tree.summarized(SummaryMode::Deterministic)},
              {"semantic", tree.summarized(SummaryMode::Semantic)}}},
            {"nodes", nodes},
            {"edges", edges},
            {"stats",
             {{"directories", s.directories},
              {"files", s.files},
              {"symbols", s.symbols},
              {"edges", s.edges},
              {"resolved_edges", s.resolved_edges},
              {"max_depth", s.max_depth},
              {"warnings", s.warnings}}}};
}

inline CodeIndexTree index_from_json(const json& j) {
    if (!j.is_object() || !j.contains("version")) {
        throw index_error("not an index document");
    }
    if (!j["version"].is_number_integer() || j["version"].get<int>() != kIndexFormatVersion) {
        throw format_version_error("index format version " + j["version"].dump() +
                                   " unsupported (expected " +
                                   std::to_string(kIndexFormatVersion) + ")");
    }
    CodeIndexTree tree;
    try {
        for (const auto& jn : j.at("nodes")) {
            CodeNode n;
            n.id = jn.at("id").get<std::string>();
            n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
            n.name = jn.at("name").get<std::string>();
            n.path = jn.at("path").get<std::string>();
            n.parent = jn.at("parent").get<std::string>();
            n.children = jn.at("children").get<std::vector<std::string>>();
            if (n.kind == NodeKind::Symbol) {
                n.symbol_type = symbol_type_from_string(jn.at("symbol_type").get<std::string>());
                n.qualified = jn.at("qualified").get<std::string>();
                n.signature = jn.at("signature").get<std::string>();
            }
            if (n.kind == NodeKind::Symbol || n.kind == NodeKind::File) {
                n.docstring = jn.at("docstring").get<std::string>();
                n.line_start = jn.at("line_start").get<std::uint32_t>();
                n.line_end = jn.at("line_end").get<std::uint32_t>();
                n.span_bytes = jn.at("span_bytes").get<std::uint64_t>();
                n.language = jn.at("language").get<std::string>();
            }
            if (n.kind == NodeKind::File) {
                n.file_size = jn.at("file_size").get<std::uint64_t>();
                n.file_mtime_ns = jn.at("file_mtime_ns").get<std::int64_t>();
                n.imports = jn.at("imports").get<std::vector<std::string>>();
            }
            if (jn.contains("summary")) n.summary = jn["summary"].get<std::string>();
            if (jn.contains("semantic_summary")) {
                n.semantic_summary = jn["semantic_summary"].get<std::string>();
            }
            tree.add_node(std::move(n));
        }
        std::vector<DependencyEdge> edges;
        for (const auto& je : j.at("edges")) {
            edges.push_back({je.at("from").get<std::string>(), je.at("to").get<std::string>(),
                             edge_type_from_string(je.at("type").get<std::string>()),
                             je.at("resolved").get<bool>()});
        }
        tree.set_edges(std::move(edges));
        const json& js = j.at("stats");
        IndexStats stats;
        stats.directories = js.at("directories").get<std::uint64_t>();
        stats.files = js.at("files").get<std::uint64_t>();
        stats.symbols = js.at("symbols").get<std::uint64_t>();
        stats.edges = js.at("edges").get<std::uint64_t>();
        stats.resolved_edges = js.at("resolved_edges").get<std::uint64_t>();
        stats.warnings = js.at("warnings").get<std::vector<std::string>>();
        tree.set_stats(std::move(stats));
        tree.set_root(j.at("root").get<std::string>(), j.at("root_dir").get<std::string>());
        const json& sum = j.at("summarized");
        if (sum.at("deterministic").get<bool>()) tree.mark_summarized(SummaryMode::Deterministic);
        if (sum.at("semantic").get<bool>()) tree.mark_summarized(SummaryMode::Semantic);
    } catch (const json::exception& e) {
        throw index_error(std::string("corrupt index document: ") + e.what());
    }
    tree.finalize();
    return tree;
}

inline void save_index(const CodeIndexTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw index_error("cannot write index file: " + path);
    out << to_json(tree).dump(2) << '\n';
}

inline CodeIndexTree load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw index_error("cannot read index file: " + path);
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw index_error("corrupt index file (not valid JSON): " + path);
    return index_from_json(j);
}

}  // namespace rgao
