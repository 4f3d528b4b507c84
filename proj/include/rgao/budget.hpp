#pragma once

// Six-dimensional resource budgets and the delegation-forest conservation
// checker. A budget vector counts (iterations, tool_calls, tokens, seconds,
// retries, handoffs); all arithmetic is checked, all comparisons are
// component-wise, and the verifier runs one linear pass over the forest.

#include <array>
#include <cstdint>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rgao/common.hpp"

namespace rgao {

inline constexpr std::size_t kBudgetDims = 6;

inline constexpr std::array<const char*, kBudgetDims> kBudgetDimNames = {
    "iterations", "tool_calls", "tokens", "seconds", "retries", "handoffs"};

class budget_overflow_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structural problems in a delegation forest: duplicate ids, dangling child
// references, a child claimed by two parents, cycles. Distinct from budget
// violations, which are reported (not thrown) by verify_conservation.
class forest_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BudgetVector {
    std::array<std::uint64_t, kBudgetDims> v{};

    static BudgetVector zero() { return {}; }
    static BudgetVector of(std::uint64_t iterations, std::uint64_t tool_calls,
                           std::uint64_t tokens, std::uint64_t seconds,
                           std::uint64_t retries, std::uint64_t handoffs) {
        return BudgetVector{{iterations, tool_calls, tokens, seconds, retries, handoffs}};
    }

    std::uint64_t& operator[](std::size_t i) { return v[i]; }
    std::uint64_t operator[](std::size_t i) const { return v[i]; }

    std::uint64_t iterations() const { return v[0]; }
    std::uint64_t tool_calls() const { return v[1]; }
    std::uint64_t tokens() const { return v[2]; }
    std::uint64_t seconds() const { return v[3]; }
    std::uint64_t retries() const { return v[4]; }
    std::uint64_t handoffs() const { return v[5]; }

    bool operator==(const BudgetVector&) const = default;

    bool is_zero() const {
        for (auto x : v) if (x != 0) return false;
        return true;
    }

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < kBudgetDims; ++i) {
            if (i) s += ",";
            s += std::to_string(v[i]);
        }
        return s + ")";
    }
};

// Component-wise sum with explicit overflow detection.
inline BudgetVector oplus(const BudgetVector& a, const BudgetVector& b) {
    BudgetVector out;
    for (std::size_t i = 0; i < kBudgetDims; ++i) {
        if (__builtin_add_overflow(a.v[i], b.v[i], &out.v[i])) {
            throw budget_overflow_error(std::string("budget component '") +
                                        kBudgetDimNames[i] + "' overflows");
        }
    }
    return out;
}

// Component-wise partial order: a fits within b.
inline bool leq(const BudgetVector& a, const BudgetVector& b) {
    for (std::size_t i = 0; i < kBudgetDims; ++i) {
        if (a.v[i] > b.v[i]) return false;
    }
    return true;
}

// Sequential composition of budget requirements. Running two phases back to
// back needs the component-wise sum of their budgets, so this is oplus under
// a second name that documents intent at call sites.
inline BudgetVector otimes_sequential(const BudgetVector& a, const BudgetVector& b) {
    return oplus(a, b);
}

inline json to_json(const BudgetVector& b) {
    return json(std::vector<std::uint64_t>(b.v.begin(), b.v.end()));
}

inline BudgetVector budget_from_json(const json& j) {
    if (!j.is_array() || j.size() != kBudgetDims) {
        throw forest_error("budget vector must be an array of 6 non-negative integers");
    }
    BudgetVector out;
    for (std::size_t i = 0; i < kBudgetDims; ++i) {
        if (!j[i].is_number_unsigned() && !(j[i].is_number_integer() && j[i].get<std::int64_t>() >= 0)) {
            throw forest_error("budget component must be a non-negative integer");
        }
        out.v[i] = j[i].get<std::uint64_t>();
    }
    return out;
}

// Monotone usage counter with check-before-operation admission. A cost is
// refused when admitting it would bring any used component up to (or past)
// its limit; refusal latches the exceeded flag for the tracker's lifetime
// and never mutates the usage counters. Thread-safe: concurrent admits are
// atomic with respect to each other.
class BudgetTracker {
public:
    explicit BudgetTracker(const BudgetVector& limit) : limit_(limit) {}

    BudgetTracker(const BudgetTracker&) = delete;
    BudgetTracker& operator=(const BudgetTracker&) = delete;

    bool admit(const BudgetVector& cost) {
        std::lock_guard<std::mutex> lock(mu_);
        if (!fits_locked(cost)) {
            exceeded_ = true;
            return false;
        }
        for (std::size_t i = 0; i < kBudgetDims; ++i) used_.v[i] += cost.v[i];
        return true;
    }

    // Pure capacity probe: same predicate as admit, but neither consumes nor
    // latches. Used by schedulers to decide whether a retry is even possible.
    bool would_admit(const BudgetVector& cost) const {
        std::lock_guard<std::mutex> lock(mu_);
        return fits_locked(cost);
    }

    bool exceeded() const {
        std::lock_guard<std::mutex> lock(mu_);
        return exceeded_;
    }

    BudgetVector used() const {
        std::lock_guard<std::mutex> lock(mu_);
        return used_;
    }

    const BudgetVector& limit() const { return limit_; }

private:
    bool fits_locked(const BudgetVector& cost) const {
        for (std::size_t i = 0; i < kBudgetDims; ++i) {
            if (cost.v[i] == 0) continue;
            std::uint64_t after = 0;
            if (__builtin_add_overflow(used_.v[i], cost.v[i], &after)) return false;
            if (after >= limit_.v[i]) return false;
        }
        return true;
    }

    BudgetVector limit_;
    BudgetVector used_{};
    bool exceeded_ = false;
    mutable std::mutex mu_;
};

// One agent in a delegation forest. `budget` bounds the whole subtree rooted
// here; `direct_cost` is the allowance this agent declares for its own direct
// work on top of what it delegates to children.
struct DelegationNode {
    std::string id;
    BudgetVector budget;
    BudgetVector direct_cost;  // defaults to zero: pure orchestrator
    std::vector<std::string> children;
};

using DelegationForest = std::vector<DelegationNode>;

struct BudgetViolation {
    std::string node;
    std::size_t component = 0;      // index into kBudgetDimNames
    std::uint64_t composed = 0;     // direct_cost + sum of child budgets
    std::uint64_t limit = 0;        // the node's own budget component
};

struct VerificationReport {
    bool ok = false;
    std::vector<BudgetViolation> violations;
    std::size_t nodes_visited = 0;
    std::size_t edges_visited = 0;
};

namespace detail {

struct ForestShape {
    std::unordered_map<std::string, std::size_t> index;  // id -> position
    std::vector<std::size_t> roots;                      // positions without a parent
};

// Validates structure (unique ids, single parent, no dangling refs, acyclic)
// and returns the id map plus root set. Linear in nodes + edges.
inline ForestShape forest_shape(const DelegationForest& forest) {
    ForestShape shape;
    shape.index.reserve(forest.size());
    for (std::size_t i = 0; i < forest.size(); ++i) {
        if (!shape.index.emplace(forest[i].id, i).second) {
            throw forest_error("duplicate node id '" + forest[i].id + "'");
        }
    }
    std::vector<int> parents(forest.size(), 0);
    for (const auto& node : forest) {
        for (const auto& child : node.children) {
            auto it = shape.index.find(child);
            if (it == shape.index.end()) {
                throw forest_error("node '" + node.id + "' references missing child '" + child + "'");
            }
            if (forest[it->second].id == node.id) {
                throw forest_error("node '" + node.id + "' lists itself as a child");
            }
            if (++parents[it->second] > 1) {
                throw forest_error("node '" + child + "' has more than one parent");
            }
        }
    }
    for (std::size_t i = 0; i < forest.size(); ++i) {
        if (parents[i] == 0) shape.roots.push_back(i);
    }
    // With single parents and no dangling refs, any node unreachable from a
    // root sits on a cycle.
    std::vector<char> seen(forest.size(), 0);
    std::vector<std::size_t> stack(shape.roots.begin(), shape.roots.end());
    std::size_t reached = 0;
    while (!stack.empty()) {
        std::size_t at = stack.back();
        stack.pop_back();
        if (seen[at]) continue;
        seen[at] = 1;
        ++reached;
        for (const auto& child : forest[at].children) {
            stack.push_back(shape.index.at(child));
        }
    }
    if (reached != forest.size()) {
        throw forest_error("forest contains a cycle");
    }
    return shape;
}

}  // namespace detail

// Static conservation check: every node must cover its declared direct cost
// plus the budgets it hands to children. Single pass, O(nodes + edges);
// structural defects throw, budget violations are collected and reported.
inline VerificationReport verify_conservation(const DelegationForest& forest) {
    auto shape = detail::forest_shape(forest);
    VerificationReport report;
    report.nodes_visited = forest.size();
    for (const auto& node : forest) {
        BudgetVector composed = node.direct_cost;
        for (const auto& child : node.children) {
            composed = oplus(composed, forest[shape.index.at(child)].budget);
            ++report.edges_visited;
        }
        for (std::size_t i = 0; i < kBudgetDims; ++i) {
            if (composed.v[i] > node.budget.v[i]) {
                report.violations.push_back({node.id, i, composed.v[i], node.budget.v[i]});
            }
        }
    }
    report.ok = report.violations.empty();
    return report;
}

// A forest bundled with the report that vouched for it; compose_parallel
// demands verified inputs so it can skip re-walking the subtrees.
struct VerifiedForest {
    DelegationForest forest;
    VerificationReport report;
};

inline VerifiedForest verify(DelegationForest forest) {
    auto report = verify_conservation(forest);
    return {std::move(forest), report};
}

// Joins two verified forests under a fresh synthetic root budgeted with the
// exact sum of both sides, so the combined forest is conservation-clean by
// construction. Only id uniqueness needs re-checking.
inline VerifiedForest compose_parallel(const VerifiedForest& a, const VerifiedForest& b,
                                       const std::string& root_id = "parallel-root") {
    if (!a.report.ok || !b.report.ok) {
        throw std::invalid_argument("compose_parallel requires verified, conservation-clean inputs");
    }
    std::unordered_set<std::string> ids;
    ids.reserve(a.forest.size() + b.forest.size() + 1);
    for (const auto& n : a.forest) ids.insert(n.id);
    for (const auto& n : b.forest) {
        if (!ids.insert(n.id).second) {
            throw forest_error("duplicate node id '" + n.id + "' across composed forests");
        }
    }
    if (ids.count(root_id)) {
        throw forest_error("synthetic root id '" + root_id + "' collides with an existing node");
    }

    VerifiedForest out;
    out.forest.reserve(a.forest.size() + b.forest.size() + 1);
    DelegationNode root;
    root.id = root_id;

    auto append = [&out, &root](const VerifiedForest& part) {
        auto shape = detail::forest_shape(part.forest);
        BudgetVector side = BudgetVector::zero();
        for (auto r : shape.roots) {
            side = oplus(side, part.forest[r].budget);
            root.children.push_back(part.forest[r].id);
        }
        for (const auto& n : part.forest) out.forest.push_back(n);
        return side;
    };
    const BudgetVector left = append(a);  // sequence explicitly: argument order is unspecified
    root.budget = oplus(left, append(b));
    out.forest.push_back(root);

    out.report.ok = true;
    out.report.nodes_visited = a.report.nodes_visited + b.report.nodes_visited + 1;
    out.report.edges_visited = a.report.edges_visited + b.report.edges_visited + root.children.size();
    return out;
}

inline json to_json(const DelegationForest& forest) {
    json arr = json::array();
    for (const auto& n : forest) {
        arr.push_back({{"id", n.id},
                       {"budget", to_json(n.budget)},
                       {"direct_cost", to_json(n.direct_cost)},
                       {"children", n.children}});
    }
    return arr;
}

inline DelegationForest forest_from_json(const json& j) {
    if (!j.is_array()) throw forest_error("forest document must be a JSON array of nodes");
    DelegationForest forest;
    forest.reserve(j.size());
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("id") || !item["id"].is_string()) {
            throw forest_error("forest node must be an object with a string 'id'");
        }
        DelegationNode n;
        n.id = item["id"].get<std::string>();
        if (item.contains("budget")) n.budget = budget_from_json(item["budget"]);
        if (item.contains("direct_cost")) n.direct_cost = budget_from_json(item["direct_cost"]);
        if (item.contains("children")) {
            if (!item["children"].is_array()) throw forest_error("'children' must be an array of ids");
            for (const auto& c : item["children"]) {
                if (!c.is_string()) throw forest_error("'children' must be an array of ids");
                n.children.push_back(c.get<std::string>());
            }
        }
        forest.push_back(std::move(n));
    }
    return forest;
}

inline json to_json(const VerificationReport& r) {
    json v = json::array();
    for (const auto& viol : r.violations) {
        v.push_back({{"node", viol.node},
                     {"component", kBudgetDimNames[viol.component]},
                     {"composed", viol.composed},
                     {"limit", viol.limit}});
    }
    return {{"ok", r.ok},
            {"violations", v},
            {"nodes_visited", r.nodes_visited},
            {"edges_visited", r.edges_visited}};
}

}  // namespace rgao
