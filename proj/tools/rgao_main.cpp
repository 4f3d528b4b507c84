// rgao: command-line front end for the retrieval-guided agent orchestration
// library. Subcommands cover index construction and queries, task routing,
// delegation-budget verification, swarm execution, evaluation harnesses and
// microbenchmarks. Exit codes: 0 success, 1 domain failure, 2 usage.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rgao/rgao.hpp"

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

int g_exit = 0;
bool g_json = false;

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

void emit(const rgao::json& j, const std::string& text) {
    if (g_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << text;
    }
}

rgao::json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return rgao::json::parse(in);
}

rgao::SignalMask parse_signals(const std::string& csv) {
    if (csv.empty()) return rgao::SignalMask::full();
    rgao::SignalMask mask;
    mask.enabled.fill(false);
    std::stringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        bool known = false;
        for (std::size_t i = 0; i < rgao::kSignalCount; ++i) {
            if (name == rgao::kSignalNames[i]) {
                mask.enabled[i] = true;
                known = true;
            }
        }
        if (!known) throw CLI::ValidationError("--signals", "unknown signal '" + name + "'");
    }
    if (mask.count() == 0) throw CLI::ValidationError("--signals", "no signals enabled");
    return mask;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrieval-guided agent orchestration toolkit"};
    app.set_version_flag("--version", std::string("rgao ") + kArtifactVersion +
                                          " (index format " +
                                          std::to_string(rgao::kIndexFormatVersion) + ")");
    app.require_subcommand(1);
    app.add_flag("--json", g_json, "machine-readable output")->configurable(false);

    // --- index ---------------------------------------------------------------
    auto* index = app.add_subcommand("index", "build, inspect and query code indexes");
    index->require_subcommand(1);

    std::string ib_dir, ib_out, ib_summaries = "semantic";
    std::uint32_t ib_height = 10;
    auto* ib = index->add_subcommand("build", "index a source tree");
    ib->add_option("dir", ib_dir, "source tree root")->required();
    ib->add_option("-o,--out", ib_out, "output index file")->required();
    ib->add_option("--summaries", ib_summaries, "none | deterministic | semantic")
        ->check(CLI::IsMember({"none", "deterministic", "semantic"}));
    ib->add_option("--max-height", ib_height, "directory depth cap");
    ib->callback([&] {
        rgao::BuildOptions opts;
        opts.max_height = ib_height;
        rgao::CodeIndexTree tree = rgao::build_index(ib_dir, opts);
        if (ib_summaries == "deterministic") {
            rgao::summarize(tree, rgao::SummaryMode::Deterministic);
        } else if (ib_summaries == "semantic") {
            rgao::summarize(tree, rgao::SummaryMode::Semantic);
        }
        rgao::save_index(tree, ib_out);
        const auto& st = tree.stats();
        emit({{"out", ib_out},
              {"nodes", st.total_nodes()},
              {"files", st.files},
              {"symbols", st.symbols},
              {"edges", st.edges},
              {"resolved_edges", st.resolved_edges},
              {"warnings", st.warnings}},
             "indexed " + std::to_string(st.total_nodes()) + " nodes (" +
                 std::to_string(st.files) + " files, " + std::to_string(st.symbols) +
                 " symbols, " + std::to_string(st.edges) + " edges) -> " + ib_out + "\n");
    });

    std::string is_file;
    auto* is = index->add_subcommand("stats", "show index statistics");
    is->add_option("file", is_file, "index file")->required();
    is->callback([&] {
        rgao::CodeIndexTree tree = rgao::load_index(is_file);
        const auto& st = tree.stats();
        rgao::json j = {{"format_version", rgao::kIndexFormatVersion},
                        {"root_dir", tree.root_dir()},
                        {"directories", st.directories},
                        {"files", st.files},
                        {"symbols", st.symbols},
                        {"edges", st.edges},
                        {"resolved_edges", st.resolved_edges},
                        {"max_depth", st.max_depth},
                        {"total_nodes", st.total_nodes()},
                        {"summarized", tree.has_summaries()},
                        {"warnings", st.warnings}};
        std::ostringstream text;
        text << tree.root_dir() << ": " << st.total_nodes() << " nodes, " << st.directories
             << " directories, " << st.files << " files, " << st.symbols << " symbols, "
             << st.edges << " edges (" << st.resolved_edges << " resolved), depth "
             << st.max_depth << (tree.has_summaries() ? ", summarized" : "") << "\n";
        emit(j, text.str());
    });

    std::string iq_file, iq_context, iq_signals;
    std::vector<std::string> iq_query;
    std::size_t iq_k = 10;
    auto* iq = index->add_subcommand("query", "retrieve nodes for a query");
    iq->add_option("file", iq_file, "index file")->required();
    iq->add_option("query", iq_query, "query text")->required()->expected(-1);
    iq->add_option("-k", iq_k, "result count");
    iq->add_option("--context", iq_context, "context file path for proximity scoring");
    iq->add_option("--signals", iq_signals, "comma list of enabled scorer signals");
    iq->callback([&] {
        rgao::CodeIndexTree tree = rgao::load_index(iq_file);
        auto result = rgao::retrieve(tree, join_words(iq_query), iq_context, iq_k,
                                     parse_signals(iq_signals));
        std::ostringstream text;
        text << "query type " << rgao::to_string(result.query_type) << " (confidence "
             << result.confidence << "), ambiguity " << result.ambiguity << "\n";
        for (const auto& item : result.items) {
            text << "  [" << rgao::to_string(item.flag) << "] " << item.id << "  score "
                 << item.score << "\n";
        }
        emit(rgao::to_json(result), text.str());
    });

    // --- route ----------------------------------------------------------------
    std::string rt_file, rt_config;
    std::vector<std::string> rt_task;
    auto* rt = app.add_subcommand("route", "pick an execution topology for a task");
    rt->add_option("file", rt_file, "index file")->required();
    rt->add_option("task", rt_task, "task description")->required()->expected(-1);
    rt->add_option("--config", rt_config, "router thresholds JSON")->envname("RGAO_CONFIG");
    rt->callback([&] {
        rgao::CodeIndexTree tree = rgao::load_index(rt_file);
        rgao::RouterConfig cfg;
        if (!rt_config.empty()) cfg = rgao::router_config_from_json(read_json_file(rt_config));
        const std::string task = join_words(rt_task);
        auto rr = rgao::retrieve(tree, task, "", 10);
        auto c = rgao::extract_complexity(tree, rr);
        std::vector<std::string> paths;
        for (const auto& item : rr.items) {
            const auto& p = tree.node(item.id).path;
            if (!p.empty()) paths.push_back(p);
        }
        auto decision = rgao::route(c, rr.ambiguity, cfg, paths);
        auto baseline = rgao::regex_route(task);
        rgao::json j = {{"task", task},
                        {"decision", rgao::to_json(decision)},
                        {"baseline", rgao::to_string(baseline)},
                        {"retrieval", rgao::to_json(rr)}};
        std::ostringstream text;
        text << "topology " << rgao::to_string(decision.topology);
        if (decision.mode != rgao::MultiAgentMode::None) {
            text << " (" << rgao::to_string(decision.mode) << ")";
        }
        text << ", aggregate " << decision.aggregate << ", ambiguity " << decision.ambiguity
             << "\nrules:";
        for (const auto& r : decision.triggered) text << " " << r;
        text << "\nkeyword baseline: " << rgao::to_string(baseline) << "\n";
        emit(j, text.str());
    });

    // --- verify-dag --------------------------------------------------------------
    std::string vd_file;
    auto* vd = app.add_subcommand("verify-dag", "check budget conservation of a delegation forest");
    vd->add_option("file", vd_file, "forest JSON")->required();
    vd->callback([&] {
        auto forest = rgao::forest_from_json(read_json_file(vd_file));
        auto report = rgao::verify_conservation(forest);
        std::ostringstream text;
        if (report.ok) {
            text << "ok: " << report.nodes_visited << " nodes, " << report.edges_visited
                 << " edges, conservation holds\n";
        } else {
            text << report.violations.size() << " violation(s):\n";
            for (const auto& v : report.violations) {
                text << "  node " << v.node << " component " << rgao::kBudgetDimNames[v.component]
                     << ": composed " << v.composed << " > limit " << v.limit << "\n";
            }
            g_exit = 1;
        }
        emit(rgao::to_json(report), text.str());
    });

    // --- swarm ---------------------------------------------------------------------
    auto* swarm = app.add_subcommand("swarm", "run task swarms");
    swarm->require_subcommand(1);
    std::string sr_pipeline, sr_tier = "standard", sr_trace;
    std::vector<std::string> sr_inject;
    std::vector<std::uint64_t> sr_tokens;
    auto* sr = swarm->add_subcommand("run", "execute a pipeline detected from text");
    sr->add_option("--pipeline", sr_pipeline, "task description to segment")->required();
    sr->add_option("--tier", sr_tier, "budget tier")
        ->check(CLI::IsMember({"tight", "standard", "generous"}));
    sr->add_option("--inject", sr_inject, "fault spec kind:stage (kind = timeout | error)");
    sr->add_option("--tokens", sr_tokens, "per-stage token plan");
    sr->add_option("--trace", sr_trace, "write the full run report JSON here");
    sr->callback([&] {
        auto tasks = rgao::make_pipeline_tasks(sr_pipeline, rgao::tier_from_string(sr_tier),
                                               sr_tokens);
        for (const auto& spec : sr_inject) {
            auto colon = spec.find(':');
            if (colon == std::string::npos) {
                throw CLI::ValidationError("--inject", "expected kind:stage");
            }
            const std::string kind = spec.substr(0, colon);
            const std::size_t stage = std::stoul(spec.substr(colon + 1));
            if (stage == 0 || stage > tasks.size()) {
                throw CLI::ValidationError("--inject", "stage out of range");
            }
            auto& script = tasks[stage - 1].script;
            const std::size_t mid = script.steps.size() > 1 ? 1 : 0;
            if (kind == "timeout") {
                script = rgao::inject_timeout(script, mid);
            } else if (kind == "error") {
                script = rgao::inject_error(script, mid, "injected");
            } else {
                throw CLI::ValidationError("--inject", "kind must be timeout or error");
            }
        }
        rgao::BudgetVector swarm_budget = rgao::BudgetVector::zero();
        for (const auto& t : tasks) swarm_budget = rgao::oplus(swarm_budget, t.contract.budget);
        auto report = rgao::run_swarm(tasks, swarm_budget);
        if (!sr_trace.empty()) {
            std::ofstream out(sr_trace, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + sr_trace);
            out << rgao::to_json(report).dump(2) << "\n";
        }
        std::ostringstream text;
        text << "swarm " << rgao::to_string(report.status) << " in " << report.rounds
             << " round(s)\n";
        for (const auto& t : tasks) {
            const auto& o = report.outcomes.at(t.id);
            text << "  " << t.id << ": " << rgao::to_string(o.final_state) << ", "
                 << o.attempts.size() << " attempt(s), tokens " << o.usage.tokens() << "\n";
        }
        text << "usage " << report.swarm_usage.str() << "\n";
        if (report.status != rgao::SwarmStatus::Completed) g_exit = 1;
        emit(rgao::to_json(report), text.str());
    });

    // --- eval ------------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "evaluation harnesses");
    eval->require_subcommand(1);

    std::uint64_t er_n = 250, er_seed = 7;
    std::size_t er_k = 10;
    std::string er_dataset_out;
    bool er_rows = false;
    auto* er = eval->add_subcommand("routing", "routing accuracy versus the keyword baseline");
    er->add_option("--n", er_n, "dataset size");
    er->add_option("--seed", er_seed, "dataset seed")->envname("RGAO_SEED");
    er->add_option("--k", er_k, "retrieval depth");
    er->add_option("--dataset-out", er_dataset_out, "also write the dataset JSONL here");
    er->add_flag("--rows", er_rows, "include per-instance rows in JSON output");
    er->callback([&] {
        auto ds = rgao::generate_routing_dataset(er_seed, er_n);
        if (!er_dataset_out.empty()) {
            rgao::finalize_plans(ds);
            rgao::write_dataset_jsonl(ds, er_dataset_out);
        }
        auto rep = rgao::eval_routing(ds, er_k);
        std::ostringstream text;
        text << "eval rows " << rep.eval_rows << " (of " << rep.total << ")\n"
             << "router accuracy " << rep.treatment.accuracy() << " [" << rep.treatment.ci.lo
             << ", " << rep.treatment.ci.hi << "]\n"
             << "keyword accuracy " << rep.baseline.accuracy() << " [" << rep.baseline.ci.lo
             << ", " << rep.baseline.ci.hi << "]\n"
             << "gap " << rep.accuracy_gap * 100 << " points, mcnemar"
             << (rep.paired.exact ? " (exact)" : "") << " statistic " << rep.paired.statistic
             << ", p " << rep.paired.p_value << "\n";
        emit(rgao::to_json(rep, er_rows), text.str());
    });

    auto* ep = eval->add_subcommand("pipelines", "five-pipeline execution suite");
    ep->callback([&] {
        auto results = rgao::run_pipeline_suite();
        rgao::json j = rgao::json::array();
        std::ostringstream text;
        bool all_ok = true;
        for (const auto& r : results) {
            j.push_back(rgao::to_json(r));
            all_ok &= r.ok();
            text << (r.ok() ? "ok   " : "FAIL ") << r.name << ": " << rgao::to_string(r.status)
                 << ", tokens " << r.total_tokens;
            if (!r.interventions.empty()) {
                text << ", interventions";
                for (const auto& iv : r.interventions) text << " " << iv;
            }
            for (const auto& f : r.failures) text << "\n       " << f;
            text << "\n";
        }
        if (!all_ok) g_exit = 1;
        emit(j, text.str());
    });

    std::uint64_t ea_n = 250, ea_seed = 7;
    auto* ea = eval->add_subcommand("ablation", "leave-one-out scorer signal sweep");
    ea->add_option("--n", ea_n, "dataset size");
    ea->add_option("--seed", ea_seed, "dataset seed")->envname("RGAO_SEED");
    ea->callback([&] {
        auto ds = rgao::generate_routing_dataset(ea_seed, ea_n);
        auto rows = rgao::run_ablation(ds);
        rgao::json j = rgao::json::array();
        std::ostringstream text;
        for (const auto& r : rows) {
            j.push_back(rgao::to_json(r));
            text << r.mask_name << ": ndcg@10 " << r.ndcg10 << ", mrr " << r.mrr
                 << ", misroute " << r.misroute_rate << "\n";
        }
        emit(j, text.str());
    });

    // --- bench --------------------------------------------------------------------------
    std::string bench_target = "all";
    std::uint64_t bench_rounds = 20;
    auto* bench = app.add_subcommand("bench", "microbenchmarks with latency ceilings");
    bench->add_option("target", bench_target, "target name or 'all'");
    bench->add_option("--rounds", bench_rounds, "timed rounds per target");
    bench->callback([&] {
        std::vector<rgao::BenchResult> results;
        if (bench_target == "all") {
            results = rgao::run_all_microbench(bench_rounds);
        } else {
            results.push_back(rgao::run_microbench(bench_target, bench_rounds));
        }
        rgao::json j = rgao::json::array();
        std::ostringstream text;
        bool all_ok = true;
        for (const auto& r : results) {
            j.push_back(rgao::to_json(r));
            all_ok &= r.within_ceiling;
            text << (r.within_ceiling ? "ok   " : "OVER ") << r.name << ": median "
                 << r.median_us << " us (mad " << r.mad_us << ")";
            if (r.ceiling_us > 0) text << ", ceiling " << r.ceiling_us << " us";
            text << "\n";
        }
        if (!all_ok) g_exit = 1;
        emit(j, text.str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return g_exit;
}
