#pragma once

// Shared test scaffolding: a subprocess runner for CLI tests, an independent
// RRF reference implementation, and random delegation-forest generators used
// by the conservation property tests.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "rgao/budget.hpp"
#include "rgao/common.hpp"
#include "rgao/retrieval.hpp"

namespace testsupport {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs a shell command, capturing stdout/stderr separately and the exit code.
inline CliResult run_command(const std::string& command) {
    CliResult r;
    std::string err_file = std::string("/tmp/rgao-cli-err-") + std::to_string(::getpid()) + "-" +
                           std::to_string(rand());
    std::string full = command + " 2>" + err_file;
    FILE* pipe = ::popen(full.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t n = 0;
    while ((n = ::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream ef(err_file);
    std::stringstream ss;
    ss << ef.rdbuf();
    r.err = ss.str();
    std::remove(err_file.c_str());
    return r;
}

// Independent reciprocal-rank-fusion reference: the score of a document is
// the sum over lists of w / (k + rank); ties resolve by ascending id.
inline std::vector<std::pair<std::string, double>> brute_rrf(
    const std::vector<rgao::RankedList>& lists, double k = 60.0) {
    std::map<std::string, double> score;
    for (const auto& list : lists) {
        for (std::size_t i = 0; i < list.items.size(); ++i) {
            score[list.items[i].first] += list.weight / (k + static_cast<double>(i + 1));
        }
    }
    std::vector<std::pair<std::string, double>> out(score.begin(), score.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

inline rgao::BudgetVector random_budget(rgao::Rng& rng, std::uint64_t cap) {
    rgao::BudgetVector b;
    for (auto& x : b.v) x = rng.below(cap + 1);
    return b;
}

// Builds a random forest that satisfies conservation by construction: every
// node's budget covers its declared direct cost plus its children's budgets,
// with nonnegative random slack.
inline rgao::DelegationForest random_valid_forest(rgao::Rng& rng, std::size_t max_nodes = 24) {
    rgao::DelegationForest forest;
    std::size_t total = 2 + rng.below(max_nodes - 1);
    std::size_t made = 0;
    std::uint64_t next_id = 0;

    // Recursive lambda building a subtree bottom-up; returns its index.
    std::function<std::size_t(std::size_t)> build = [&](std::size_t depth) -> std::size_t {
        rgao::DelegationNode node;
        node.id = "n" + std::to_string(next_id++);
        ++made;
        std::size_t kids = 0;
        if (depth < 3 && made < total) kids = rng.below(3);
        rgao::BudgetVector child_sum = rgao::BudgetVector::zero();
        for (std::size_t i = 0; i < kids && made < total; ++i) {
            std::size_t at = build(depth + 1);
            node.children.push_back(forest[at].id);
            child_sum = rgao::oplus(child_sum, forest[at].budget);
        }
        node.direct_cost = random_budget(rng, 5);
        node.budget = rgao::oplus(rgao::oplus(child_sum, node.direct_cost), random_budget(rng, 7));
        forest.push_back(node);
        return forest.size() - 1;
    };

    std::size_t roots = 1 + rng.below(2);
    for (std::size_t r = 0; r < roots && made < total; ++r) build(0);
    return forest;
}

// Breaks conservation at one random non-leaf (or any node via direct cost):
// bumps a child budget or the direct cost beyond the parent's capacity.
// Returns the id of the node whose invariant now fails.
inline std::string violate_forest(rgao::Rng& rng, rgao::DelegationForest& forest) {
    std::size_t at = rng.below(forest.size());
    std::size_t comp = rng.below(rgao::kBudgetDims);
    auto& node = forest[at];
    // Raising direct_cost above budget guarantees composed > limit at `node`.
    node.direct_cost.v[comp] = node.budget.v[comp] + 1 + rng.below(4);
    return node.id;
}

}  // namespace testsupport
