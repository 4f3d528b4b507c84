#pragma once

// Evaluation harnesses: routing accuracy against the keyword baseline with
// paired significance testing, a five-pipeline execution suite with injected
// transient faults, signal-ablation sweeps for the retrieval scorer, and
// microbenchmarks with fixed latency ceilings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgao/code_index.hpp"
#include "rgao/retrieval.hpp"
#include "rgao/router.hpp"
#include "rgao/stats.hpp"
#include "rgao/swarm.hpp"
#include "rgao/synth.hpp"

namespace rgao {

// --- routing evaluation -----------------------------------------------------

struct InstanceOutcome {
    std::string id;
    Topology oracle = Topology::FastPath;
    Topology predicted = Topology::FastPath;
    Topology baseline = Topology::FastPath;
    bool adversarial = false;
    std::string split;
    double ambiguity = 0.0;
    double aggregate = 0.0;
};

struct MethodEval {
    std::uint64_t right = 0;
    std::uint64_t n = 0;
    WilsonInterval ci;
    // confusion[oracle][predicted] = count
    std::map<std::string, std::map<std::string, std::uint64_t>> confusion;

    double accuracy() const { return n ? static_cast<double>(right) / static_cast<double>(n) : 0.0; }
};

struct RoutingEvalReport {
    std::uint64_t seed = 0;
    std::uint64_t total = 0;
    std::uint64_t eval_rows = 0;
    std::uint64_t tune_rows = 0;
    MethodEval treatment;   // threshold router over extracted complexity
    MethodEval baseline;    // keyword table
    McNemarResult paired;   // b: baseline-only right, c: treatment-only right
    double accuracy_gap = 0.0;  // treatment - baseline, in points
    std::vector<InstanceOutcome> rows;  // every instance, both splits
};

// Runs both routers over every dataset row (building each repository from
// its seed), scoring only the eval split. The tune split exists so threshold
// adjustments never touch the rows being scored.
inline RoutingEvalReport eval_routing(const RoutingDataset& ds, std::size_t k = 10,
                                      const RouterConfig& cfg = {},
                                      const RegexRuleTable& rules = default_regex_rules()) {
    RoutingEvalReport rep;
    rep.seed = ds.seed;
    rep.total = ds.instances.size();

    for (const auto& inst : ds.instances) {
        TempDir tmp("rgao-eval");
        materialize_instance_repo(inst, tmp.path());
        CodeIndexTree tree = build_index(tmp.path().string());
        summarize(tree, SummaryMode::Semantic);

        RetrievalResult rr = retrieve(tree, inst.task, "", k);
        ComplexityVector c = extract_complexity(tree, rr);
        std::vector<std::string> paths;
        for (const auto& item : rr.items) {
            const auto& p = tree.node(item.id).path;
            if (!p.empty()) paths.push_back(p);
        }
        RoutingDecision d = route(c, rr.ambiguity, cfg, paths);
        Topology base = regex_route(inst.task, rules);

        InstanceOutcome row;
        row.id = inst.id;
        row.oracle = inst.oracle;
        row.predicted = d.topology;
        row.baseline = base;
        row.adversarial = inst.adversarial;
        row.split = inst.split;
        row.ambiguity = rr.ambiguity;
        row.aggregate = d.aggregate;
        rep.rows.push_back(row);

        if (inst.split == "tune") {
            ++rep.tune_rows;
            continue;
        }
        ++rep.eval_rows;
        const bool t_right = d.topology == inst.oracle;
        const bool b_right = base == inst.oracle;
        rep.treatment.n++;
        rep.baseline.n++;
        rep.treatment.right += t_right;
        rep.baseline.right += b_right;
        rep.treatment.confusion[to_string(inst.oracle)][to_string(d.topology)]++;
        rep.baseline.confusion[to_string(inst.oracle)][to_string(base)]++;
        if (b_right && !t_right) ++rep.paired.b;
        if (t_right && !b_right) ++rep.paired.c;
    }

    rep.treatment.ci = wilson_ci(rep.treatment.right, rep.treatment.n);
    rep.baseline.ci = wilson_ci(rep.baseline.right, rep.baseline.n);
    rep.paired = mcnemar(rep.paired.b, rep.paired.c);
    rep.accuracy_gap = rep.treatment.accuracy() - rep.baseline.accuracy();
    return rep;
}

inline json to_json(const MethodEval& m) {
    return {{"right", m.right},
            {"n", m.n},
            {"accuracy", m.accuracy()},
            {"ci", to_json(m.ci)},
            {"confusion", m.confusion}};
}

inline json to_json(const RoutingEvalReport& r, bool include_rows = false) {
    json j = {{"seed", r.seed},
              {"total", r.total},
              {"eval_rows", r.eval_rows},
              {"tune_rows", r.tune_rows},
              {"treatment", to_json(r.treatment)},
              {"baseline", to_json(r.baseline)},
              {"mcnemar", to_json(r.paired)},
              {"accuracy_gap", r.accuracy_gap}};
    if (include_rows) {
        json rows = json::array();
        for (const auto& row : r.rows) {
            rows.push_back({{"id", row.id},
                            {"oracle", to_string(row.oracle)},
                            {"predicted", to_string(row.predicted)},
                            {"baseline", to_string(row.baseline)},
                            {"adversarial", row.adversarial},
                            {"split", row.split},
                            {"ambiguity", row.ambiguity},
                            {"aggregate", row.aggregate}});
        }
        j["rows"] = rows;
    }
    return j;
}

// --- pipeline suite -----------------------------------------------------------

struct PipelineCaseResult {
    std::string name;
    std::string text;
    std::vector<std::string> detected;       // agent kinds, in order
    SwarmStatus status = SwarmStatus::Failed;
    std::uint64_t total_tokens = 0;
    std::vector<std::string> interventions;  // "task=kind" entries
    std::vector<std::string> failures;       // empty when the case held
    std::uint64_t trail_events = 0;

    bool ok() const { return failures.empty(); }
};

namespace detail {

// Gives the default script explicit per-step token costs and an optional
// injected transient fault on the middle step (attempt 1 only).
inline AgentScript plan_script(AgentKind kind, std::uint64_t first, std::uint64_t mid,
                               std::uint64_t rest, int fault = 0 /*0 none, 1 timeout, 2 error*/) {
    AgentScript s = default_script(kind, first + mid + rest);
    s.steps.at(0).cost = BudgetVector::of(0, 0, first, 1, 0, 0);
    s.steps.at(1).cost = BudgetVector::of(0, 0, mid, 1, 0, 0);
    s.steps.at(2).cost = BudgetVector::of(0, 0, rest, 0, 0, 0);
    if (fault == 1) {
        s.steps.at(1).fail_timeout = true;
        s.steps.at(1).fail_on_attempt = 1;
    } else if (fault == 2) {
        s.steps.at(1).fail_error = true;
        s.steps.at(1).fail_category = "transient";
        s.steps.at(1).fail_on_attempt = 1;
    }
    return s;
}

}  // namespace detail

// Five canonical pipelines. Two of them carry an injected transient fault on
// the coder stage, which must surface as exactly one retry-same intervention
// and still complete. Token plans keep each run near the 6000-token mark.
inline std::vector<PipelineCaseResult> run_pipeline_suite() {
    struct Case {
        std::string name;
        std::string text;
        std::vector<AgentKind> expected;
        std::vector<AgentScript> scripts;
        std::string faulted_task;  // task expected to retry once
        std::uint64_t expected_tokens;
    };
    using detail::plan_script;
    std::vector<Case> cases;
    cases.push_back({"research_code",
                     "research the config loader then implement the parser hook",
                     {AgentKind::Researcher, AgentKind::Coder},
                     {plan_script(AgentKind::Researcher, 870, 870, 1160),
                      plan_script(AgentKind::Coder, 900, 900, 1200)},
                     "",
                     5900});
    cases.push_back({"plan_code_test",
                     "plan the cache rework, implement it, and test the result",
                     {AgentKind::Planner, AgentKind::Coder, AgentKind::Tester},
                     {plan_script(AgentKind::Planner, 420, 420, 560),
                      plan_script(AgentKind::Coder, 800, 500, 500, /*fault=*/1),
                      plan_script(AgentKind::Tester, 540, 540, 720)},
                     "t2-coder",
                     5800});
    cases.push_back({"code_test_review",
                     "implement the request validator, test it, then review the changes",
                     {AgentKind::Coder, AgentKind::Tester, AgentKind::Reviewer},
                     {plan_script(AgentKind::Coder, 600, 600, 800),
                      plan_script(AgentKind::Tester, 570, 570, 760),
                      plan_script(AgentKind::Reviewer, 600, 600, 800)},
                     "",
                     5900});
    cases.push_back({"diagnose_code",
                     "diagnose the startup crash and fix it",
                     {AgentKind::Diagnostician, AgentKind::Coder},
                     {plan_script(AgentKind::Diagnostician, 840, 840, 1120),
                      plan_script(AgentKind::Coder, 600, 1000, 1000, /*fault=*/2)},
                     "t2-coder",
                     6000});
    cases.push_back({"code_test",
                     "implement the retry helper and verify it",
                     {AgentKind::Coder, AgentKind::Tester},
                     {plan_script(AgentKind::Coder, 900, 900, 1200),
                      plan_script(AgentKind::Tester, 870, 870, 1160)},
                     "",
                     5900});

    std::vector<PipelineCaseResult> results;
    for (auto& cs : cases) {
        PipelineCaseResult r;
        r.name = cs.name;
        r.text = cs.text;

        auto kinds = detect_pipeline(cs.text);
        for (AgentKind k : kinds) r.detected.push_back(to_string(k));
        if (kinds != cs.expected) {
            r.failures.push_back("detected pipeline differs from the expected chain");
        }

        auto tasks = make_pipeline_tasks(cs.text);
        if (tasks.size() == cs.scripts.size()) {
            for (std::size_t i = 0; i < tasks.size(); ++i) tasks[i].script = cs.scripts[i];
        } else {
            r.failures.push_back("stage count differs from the plan");
        }

        BudgetVector swarm_budget = BudgetVector::zero();
        for (const auto& t : tasks) swarm_budget = oplus(swarm_budget, t.contract.budget);

        SwarmRunReport run = run_swarm(tasks, swarm_budget);
        r.status = run.status;
        r.trail_events = run.trail.size();
        if (run.status != SwarmStatus::Completed) {
            r.failures.push_back(std::string("swarm ended ") + to_string(run.status));
        }
        for (const auto& t : tasks) {
            const TaskOutcome& out = run.outcomes.at(t.id);
            if (out.final_state != TaskFinal::Success) {
                r.failures.push_back("task " + t.id + " ended " +
                                     std::string(to_string(out.final_state)));
            }
            r.total_tokens += out.usage.tokens();
            for (const auto& iv : out.interventions) {
                r.interventions.push_back(t.id + "=" + iv);
            }
        }
        std::vector<std::string> retries;
        for (const auto& iv : r.interventions) {
            if (iv.find("=retry_same") != std::string::npos) retries.push_back(iv);
        }
        if (cs.faulted_task.empty()) {
            if (!retries.empty()) r.failures.push_back("unexpected retry intervention");
        } else if (retries.size() != 1 ||
                   retries.front() != cs.faulted_task + "=retry_same") {
            r.failures.push_back("expected exactly one retry_same on " + cs.faulted_task);
        }
        if (!leq(run.swarm_usage, swarm_budget)) {
            r.failures.push_back("swarm usage exceeds the composed budget");
        }
        // Token spend should stay within 20% of the nominal 6000 target.
        if (r.total_tokens < 4800 || r.total_tokens > 7200) {
            r.failures.push_back("token spend " + std::to_string(r.total_tokens) +
                                 " leaves the 6000 +/- 20% band");
        }
        if (r.total_tokens != cs.expected_tokens) {
            r.failures.push_back("token spend " + std::to_string(r.total_tokens) +
                                 " differs from the planned " + std::to_string(cs.expected_tokens));
        }
        results.push_back(std::move(r));
    }
    return results;
}

inline json to_json(const PipelineCaseResult& r) {
    return {{"name", r.name},
            {"text", r.text},
            {"detected", r.detected},
            {"status", to_string(r.status)},
            {"total_tokens", r.total_tokens},
            {"interventions", r.interventions},
            {"failures", r.failures},
            {"trail_events", r.trail_events},
            {"ok", r.ok()}};
}

// --- ablation sweep --------------------------------------------------------------

struct AblationRow {
    std::string mask_name;
    SignalMask mask;
    double ndcg10 = 0.0;
    double mrr = 0.0;
    double misroute_rate = 0.0;
    std::uint64_t ranked_queries = 0;  // rows with a ground-truth symbol
    std::uint64_t routed_queries = 0;
};

// Re-runs the eval split under the full mask and each leave-one-out mask.
// nDCG@10 / MRR rank the ground-truth symbol among primary results;
// misroute rate compares the downstream routing decision to the oracle.
inline std::vector<AblationRow> run_ablation(const RoutingDataset& ds, std::size_t k = 10,
                                             const RouterConfig& cfg = {}) {
    std::vector<std::pair<std::string, SignalMask>> masks = {{"full", SignalMask::full()}};
    for (std::size_t i = 0; i < kSignalCount; ++i) {
        masks.emplace_back(std::string("no_") + kSignalNames[i], SignalMask::without(i));
    }
    std::vector<AblationRow> rows;
    for (auto& [name, mask] : masks) {
        AblationRow row;
        row.mask_name = name;
        row.mask = mask;
        rows.push_back(row);
    }

    for (const auto& inst : ds.instances) {
        if (inst.split != "eval") continue;
        TempDir tmp("rgao-abl");
        materialize_instance_repo(inst, tmp.path());
        CodeIndexTree tree = build_index(tmp.path().string());
        summarize(tree, SummaryMode::Semantic);

        std::string target_id;
        if (!inst.target_name.empty()) {
            for (const auto& n : tree.nodes()) {
                if (n.kind == NodeKind::Symbol && n.symbol_type != SymbolType::Import &&
                    n.name == inst.target_name) {
                    target_id = n.id;
                    break;
                }
            }
        }

        for (std::size_t m = 0; m < masks.size(); ++m) {
            RetrievalResult rr = retrieve(tree, inst.task, "", k, masks[m].second);
            if (!target_id.empty()) {
                std::size_t rank = 0, at = 0;
                for (const auto& item : rr.items) {
                    if (item.flag != ResultFlag::Primary) continue;
                    ++at;
                    if (item.id == target_id) {
                        rank = at;
                        break;
                    }
                }
                rows[m].ranked_queries++;
                if (rank > 0 && rank <= 10) {
                    rows[m].ndcg10 += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
                    rows[m].mrr += 1.0 / static_cast<double>(rank);
                }
            }
            ComplexityVector c = extract_complexity(tree, rr);
            std::vector<std::string> paths;
            for (const auto& item : rr.items) {
                const auto& p = tree.node(item.id).path;
                if (!p.empty()) paths.push_back(p);
            }
            RoutingDecision d = route(c, rr.ambiguity, cfg, paths);
            rows[m].routed_queries++;
            if (d.topology != inst.oracle) rows[m].misroute_rate += 1.0;
        }
    }

    for (auto& row : rows) {
        if (row.ranked_queries) {
            row.ndcg10 /= static_cast<double>(row.ranked_queries);
            row.mrr /= static_cast<double>(row.ranked_queries);
        }
        if (row.routed_queries) row.misroute_rate /= static_cast<double>(row.routed_queries);
    }
    return rows;
}

inline json to_json(const AblationRow& r) {
    return {{"mask", r.mask_name},
            {"ndcg10", r.ndcg10},
            {"mrr", r.mrr},
            {"misroute_rate", r.misroute_rate},
            {"ranked_queries", r.ranked_queries},
            {"routed_queries", r.routed_queries}};
}

// --- microbenchmarks ---------------------------------------------------------------

struct BenchResult {
    std::string name;
    std::uint64_t rounds = 0;
    std::uint64_t ops_per_round = 0;
    double median_us = 0.0;  // per-op microseconds
    double mad_us = 0.0;     // median absolute deviation of the per-op samples
    double ceiling_us = 0.0; // 0 = informational only
    bool within_ceiling = true;
    std::vector<double> samples_us;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

template <typename F>
inline BenchResult bench_loop(std::string name, std::uint64_t rounds, std::uint64_t ops,
                              double ceiling_us, F&& body) {
    BenchResult r;
    r.name = std::move(name);
    r.rounds = rounds;
    r.ops_per_round = ops;
    r.ceiling_us = ceiling_us;
    for (int warm = 0; warm < 2; ++warm) {
        for (std::uint64_t i = 0; i < ops; ++i) body();
    }
    for (std::uint64_t round = 0; round < rounds; ++round) {
        auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t i = 0; i < ops; ++i) body();
        auto t1 = std::chrono::steady_clock::now();
        double us = std::chrono::duration<double, std::micro>(t1 - t0).count() /
                    static_cast<double>(ops);
        r.samples_us.push_back(us);
    }
    r.median_us = median_of(r.samples_us);
    std::vector<double> dev;
    dev.reserve(r.samples_us.size());
    for (double s : r.samples_us) dev.push_back(std::abs(s - r.median_us));
    r.mad_us = median_of(dev);
    r.within_ceiling = ceiling_us <= 0.0 || r.median_us <= ceiling_us;
    return r;
}

}  // namespace detail

inline const std::vector<std::string>& microbench_targets() {
    static const std::vector<std::string> v = {"index_build", "dag_build", "budget_admit",
                                               "route", "extract"};
    return v;
}

// One target per call; fixtures are built outside the timed region. The
// ceilings are the latency budget each hot path has to stay under.
inline BenchResult run_microbench(const std::string& target, std::uint64_t rounds = 20) {
    if (target == "index_build") {
        TempDir tmp("rgao-bench");
        materialize_bench_corpus(tmp.path());
        const std::string root = tmp.path().string();
        return detail::bench_loop("index_build", rounds, 1, 100000.0, [&] {
            CodeIndexTree tree = build_index(root);
            if (tree.nodes().size() != kBenchNodeCount) {
                throw std::runtime_error("benchmark corpus drifted");
            }
        });
    }
    if (target == "dag_build") {
        std::vector<SwarmTask> chain;
        for (int i = 0; i < 20; ++i) {
            SwarmTask t;
            t.id = "task-" + std::to_string(i);
            t.contract = make_contract(AgentKind::Coder);
            if (i > 0) t.deps = {"task-" + std::to_string(i - 1)};
            chain.push_back(std::move(t));
        }
        return detail::bench_loop("dag_build", rounds, 50, 1000.0,
                                  [&] { (void)build_dag(chain); });
    }
    if (target == "budget_admit") {
        BudgetTracker tracker(BudgetVector::of(1'000'000'000'000ULL, 1'000'000'000'000ULL,
                                               1'000'000'000'000ULL, 1'000'000'000'000ULL,
                                               1'000'000'000'000ULL, 1'000'000'000'000ULL));
        const BudgetVector cost = BudgetVector::of(1, 1, 10, 0, 0, 0);
        return detail::bench_loop("budget_admit", rounds, 10000, 10.0,
                                  [&] { (void)tracker.admit(cost); });
    }
    if (target == "route") {
        ComplexityVector c;
        c.dependency_depth = 3;
        c.file_count = 5;
        c.symbol_count = 24;
        c.tree_height = 4;
        c.cross_ratio = 0.4;
        const std::vector<std::string> paths = {"svc/flow.py", "lib/model.py"};
        return detail::bench_loop("route", rounds, 1000, 5000.0,
                                  [&] { (void)route(c, 0.3, {}, paths); });
    }
    if (target == "extract") {
        static TempDir tmp("rgao-bench-x");
        static bool made = false;
        static CodeIndexTree tree;
        if (!made) {
            materialize_bench_corpus(tmp.path());
            tree = build_index(tmp.path().string());
            made = true;
        }
        std::vector<std::string> ids;
        for (const auto& n : tree.nodes()) {
            if (n.kind == NodeKind::Symbol) {
                ids.push_back(n.id);
                if (ids.size() >= 12) break;
            }
        }
        return detail::bench_loop("extract", rounds, 100, 5000.0,
                                  [&] { (void)extract_complexity(tree, ids); });
    }
    throw std::invalid_argument("unknown benchmark target '" + target + "'");
}

inline std::vector<BenchResult> run_all_microbench(std::uint64_t rounds = 20) {
    std::vector<BenchResult> out;
    for (const auto& t : microbench_targets()) out.push_back(run_microbench(t, rounds));
    return out;
}

inline json to_json(const BenchResult& r) {
    return {{"name", r.name},
            {"rounds", r.rounds},
            {"ops_per_round", r.ops_per_round},
            {"median_us", r.median_us},
            {"mad_us", r.mad_us},
            {"ceiling_us", r.ceiling_us},
            {"within_ceiling", r.within_ceiling},
            {"samples_us", r.samples_us}};
}

}  // namespace rgao
