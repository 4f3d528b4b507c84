// Swarm execution: hashed artifacts, the three admission gates, chattiness
// detection, scripted sub-agent runs, interventions, pipeline detection,
// task DAGs, and the multi-round swarm executor.

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <set>

#include "rgao/swarm.hpp"

using namespace rgao;

namespace {

const char* kEmptyObjectDigest =
    "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a";

BudgetVector sum_contract_budgets(const std::vector<SwarmTask>& tasks) {
    BudgetVector total = BudgetVector::zero();
    for (const auto& t : tasks) total = oplus(total, t.contract.budget);
    return total;
}

}  // namespace

TEST_CASE("artifacts are content-addressed over the canonical payload") {
    SwarmArtifact a = make_artifact(ArtifactKind::TaskBrief, "t1-coder", json::object());
    CHECK(a.digest == kEmptyObjectDigest);
    CHECK(a.id == "t1-coder:task_brief:" + std::string(kEmptyObjectDigest).substr(0, 12));
    CHECK(verify_artifact(a));

    SECTION("key order does not change the digest") {
        auto x = make_artifact(ArtifactKind::TestReport, "p",
                               json{{"b", 1}, {"a", 2}});
        auto y = make_artifact(ArtifactKind::TestReport, "p",
                               json{{"a", 2}, {"b", 1}});
        CHECK(x.digest == y.digest);
        CHECK(x.id == y.id);
    }
    SECTION("payload tampering breaks verification") {
        a.payload = json{{"summary", "tampered"}};
        CHECK_FALSE(verify_artifact(a));
    }
    SECTION("each agent kind produces its own artifact kind") {
        CHECK(artifact_kind_for(AgentKind::Coder) == ArtifactKind::TaskBrief);
        CHECK(artifact_kind_for(AgentKind::Researcher) == ArtifactKind::RepoFindings);
        CHECK(artifact_kind_for(AgentKind::Planner) == ArtifactKind::ExecutionPlan);
        CHECK(artifact_kind_for(AgentKind::Tester) == ArtifactKind::TestReport);
        CHECK(artifact_kind_for(AgentKind::Reviewer) == ArtifactKind::ReviewReport);
        CHECK(artifact_kind_for(AgentKind::Diagnostician) == ArtifactKind::DiagnosticReport);
        for (ArtifactKind k : {ArtifactKind::TaskBrief, ArtifactKind::RepoFindings,
                               ArtifactKind::ExecutionPlan, ArtifactKind::TestReport,
                               ArtifactKind::ReviewReport, ArtifactKind::DiagnosticReport}) {
            CHECK(artifact_kind_from_string(to_string(k)) == k);
        }
    }
    SECTION("parents travel with the artifact") {
        auto child = make_artifact(ArtifactKind::TestReport, "t2",
                                   json{{"summary", "ok"}}, {a.id});
        CHECK(child.parents == std::vector<std::string>{a.id});
        json j = to_json(child);
        CHECK(j["parents"][0] == a.id);
        CHECK(j["digest"] == child.digest);
    }
}

TEST_CASE("the three gates check registration, budget, and artifact integrity") {
    SwarmTask task;
    task.id = "t1-coder";
    task.contract = make_contract(AgentKind::Coder);
    auto registry = default_registry();
    BudgetTracker healthy(BudgetVector::of(10, 10, 10, 10, 10, 10));

    SECTION("all clear") {
        auto ok = make_artifact(ArtifactKind::RepoFindings, "t0", json{{"summary", "x"}});
        auto g = three_gates(task, registry, healthy, {&ok});
        CHECK(g.contract_ok);
        CHECK(g.budget_ok);
        CHECK(g.artifacts_ok);
        CHECK(g.pass());
        CHECK(g.notes.empty());
    }
    SECTION("gate 1: unregistered contract") {
        task.contract.name = "stranger";
        auto g = three_gates(task, registry, healthy, {});
        CHECK_FALSE(g.contract_ok);
        CHECK_FALSE(g.pass());
        REQUIRE_FALSE(g.notes.empty());
        CHECK(g.notes[0].find("stranger") != std::string::npos);
    }
    SECTION("gate 2: exhausted swarm tracker") {
        BudgetTracker broke(BudgetVector::of(1, 9, 9, 9, 9, 9));
        CHECK_FALSE(broke.admit(BudgetVector::of(1, 0, 0, 0, 0, 0)));  // latches
        auto g = three_gates(task, registry, broke, {});
        CHECK_FALSE(g.budget_ok);
        CHECK_FALSE(g.pass());
    }
    SECTION("gate 3: digest mismatch") {
        auto bad = make_artifact(ArtifactKind::RepoFindings, "t0", json{{"summary", "x"}});
        bad.payload["summary"] = "flipped";
        auto g = three_gates(task, registry, healthy, {&bad});
        CHECK_FALSE(g.artifacts_ok);
        CHECK(g.notes[0].find("digest") != std::string::npos);
    }
    SECTION("gate 3: empty payloads rejected even with valid digests") {
        auto null_payload = make_artifact(ArtifactKind::RepoFindings, "t0", json(nullptr));
        auto empty_object = make_artifact(ArtifactKind::RepoFindings, "t0", json::object());
        auto empty_string = make_artifact(ArtifactKind::RepoFindings, "t0", json(""));
        for (const auto* a : {&null_payload, &empty_object, &empty_string}) {
            CHECK(verify_artifact(*a));
            auto g = three_gates(task, registry, healthy, {a});
            CHECK_FALSE(g.artifacts_ok);
        }
        auto fine = make_artifact(ArtifactKind::RepoFindings, "t0", json("nonempty"));
        CHECK(three_gates(task, registry, healthy, {&fine}).artifacts_ok);
    }
}

TEST_CASE("the chattiness detector flags repeats within its window") {
    SECTION("the third identical call trips it") {
        ChattinessDetector d;
        d.record_call("grep");
        d.record_call("grep");
        CHECK_FALSE(d.chatty());
        d.record_call("grep");
        CHECK(d.chatty());
        CHECK(d.reason().find("repeated tool call") != std::string::npos);
    }
    SECTION("two repeats separated by other work never trip it") {
        ChattinessDetector d;
        for (const char* name : {"a", "a", "b", "c", "d", "e", "a", "b", "a"}) {
            d.record_call(name);
        }
        CHECK_FALSE(d.chatty());  // the window evicts the early duplicates
    }
    SECTION("alternating the same two actions still counts as repetition") {
        ChattinessDetector d;
        for (const char* name : {"a", "b", "a", "b", "a"}) d.record_call(name);
        CHECK(d.chatty());
    }
    SECTION("cycling three distinct actions stays safe") {
        ChattinessDetector d;
        for (int round = 0; round < 5; ++round) {
            d.record_call("a");
            d.record_call("b");
            d.record_call("c");
        }
        CHECK_FALSE(d.chatty());
    }
    SECTION("outputs are normalized before comparison") {
        ChattinessDetector d;
        d.record_output("  Same Text  ");
        d.record_output("same text");
        d.record_output("SAME TEXT");
        CHECK(d.chatty());
        CHECK(d.reason().find("repeated output") != std::string::npos);
    }
    SECTION("only the first 500 characters of output matter") {
        ChattinessDetector d;
        std::string prefix(500, 'x');
        d.record_output(prefix + "one");
        d.record_output(prefix + "two");
        d.record_output(prefix + "three");
        CHECK(d.chatty());
    }
    SECTION("calls and outputs are tracked in separate streams") {
        ChattinessDetector d;
        d.record_call("same");
        d.record_output("same");
        d.record_call("same");
        d.record_output("same");
        CHECK_FALSE(d.chatty());  // two in each stream, three in neither
    }
}

TEST_CASE("a scripted sub-agent accounts for every unit it spends") {
    Contract coder = make_contract(AgentKind::Coder);
    auto res = run_subagent(coder, default_script(AgentKind::Coder));
    CHECK(res.status == SubAgentStatus::Success);
    CHECK(res.iterations == 3);
    CHECK(res.tool_calls == 2);
    CHECK(res.usage == BudgetVector::of(3, 2, 2400, 2, 0, 0));
    CHECK_FALSE(res.output.empty());
    CHECK(res.artifact_payload.is_object());
    CHECK(res.violations.empty());

    SECTION("every default script satisfies its own contract") {
        for (AgentKind k : kAllAgentKinds) {
            auto r = run_subagent(make_contract(k), default_script(k));
            INFO("kind " << to_string(k));
            CHECK(r.status == SubAgentStatus::Success);
            CHECK(r.usage.tokens() == 2400);
        }
    }
    SECTION("token plans flow through the 30/30/40 split") {
        auto s = default_script(AgentKind::Coder, 1000);
        CHECK(s.steps[0].cost.tokens() == 300);
        CHECK(s.steps[1].cost.tokens() == 300);
        CHECK(s.steps[2].cost.tokens() == 400);
    }
}

TEST_CASE("sub-agent failure modes") {
    SECTION("a denied tool is an error, not a silent skip") {
        Contract researcher = make_contract(AgentKind::Researcher);  // internal ceiling
        AgentScript s;
        s.steps = {tool_step("apply_patch", 100, "should never run"),
                   final_step("findings: none", 100)};
        auto r = run_subagent(researcher, s);
        CHECK(r.status == SubAgentStatus::Error);
        CHECK(r.category == "tool_denied");
        REQUIRE_FALSE(r.violations.empty());
        CHECK(r.violations[0].find("apply_patch") != std::string::npos);
        CHECK(r.tool_calls == 0);
    }
    SECTION("repeating one call trips the chattiness gate") {
        Contract coder = make_contract(AgentKind::Coder);
        AgentScript s;
        for (int i = 0; i < 5; ++i) {
            s.steps.push_back(tool_step("read_file", 10, "output " + std::to_string(i)));
        }
        s.steps.push_back(final_step("done", 10));
        auto r = run_subagent(coder, s);
        CHECK(r.status == SubAgentStatus::Failure);
        CHECK(r.category == "chattiness");
        CHECK(r.chatty);
        CHECK(r.tool_calls == 3);  // detected at the top of the fourth iteration
    }
    SECTION("the iteration budget caps runaway scripts") {
        Contract c = make_contract(AgentKind::Coder);
        c.budget = BudgetVector::of(3, 50, 100000, 120, 2, 1);
        AgentScript s;
        s.steps = {tool_step("read_file", 10, "one"), tool_step("search_code", 10, "two"),
                   tool_step("read_file", 10, "three"), final_step("done", 10)};
        auto r = run_subagent(c, s);
        CHECK(r.status == SubAgentStatus::BudgetExceeded);
        CHECK(r.category == "budget");
        CHECK(r.usage.iterations() == 2);  // the third admission is refused
    }
    SECTION("validation failure surfaces the predicate's violations") {
        Contract coder = make_contract(AgentKind::Coder);
        AgentScript s;
        s.steps = {final_step("cannot finish this", 10)};
        auto r = run_subagent(coder, s);
        CHECK(r.status == SubAgentStatus::Failure);
        CHECK(r.category == "validation");
        CHECK(r.violations.size() == 2);  // "cannot" present, "done" missing
    }
    SECTION("a script that ends without a final answer fails validation") {
        Contract coder = make_contract(AgentKind::Coder);
        AgentScript s;
        s.steps = {tool_step("read_file", 10, "just looking")};
        auto r = run_subagent(coder, s);
        CHECK(r.status == SubAgentStatus::Failure);
        CHECK(r.category == "validation");
    }
    SECTION("a null final payload defaults to a summary wrapper") {
        Contract coder = make_contract(AgentKind::Coder);
        AgentScript s;
        s.steps = {final_step("done quickly", 10)};
        auto r = run_subagent(coder, s);
        REQUIRE(r.status == SubAgentStatus::Success);
        CHECK(r.artifact_payload == json{{"summary", "done quickly"}});
    }
}

TEST_CASE("injected faults fire only on their configured attempt") {
    Contract coder = make_contract(AgentKind::Coder);
    auto script = inject_error(default_script(AgentKind::Coder), 1, "net", 1);

    BudgetTracker tracker(coder.budget);
    auto first = run_subagent(coder, script, tracker, {.attempt = 1});
    CHECK(first.status == SubAgentStatus::Error);
    CHECK(first.category == "net");
    CHECK(first.usage.iterations() == 2);  // one tool step + the failing step's iteration

    auto second = run_subagent(coder, script, tracker, {.attempt = 2});
    CHECK(second.status == SubAgentStatus::Success);
    CHECK(tracker.used().iterations() == first.usage.iterations() + second.usage.iterations());

    SECTION("timeouts behave the same way") {
        auto t = inject_timeout(default_script(AgentKind::Coder), 0, 1);
        CHECK(run_subagent(coder, t, {.attempt = 1}).status == SubAgentStatus::Timeout);
        CHECK(run_subagent(coder, t, {.attempt = 2}).status == SubAgentStatus::Success);
    }
    SECTION("attempt 0 means every attempt") {
        auto always = inject_error(default_script(AgentKind::Coder), 0, "hard", 0);
        for (int attempt = 1; attempt <= 3; ++attempt) {
            CHECK(run_subagent(coder, always, {.attempt = attempt}).status ==
                  SubAgentStatus::Error);
        }
    }
}

TEST_CASE("the default intervention table is exhaustive") {
    using S = SubAgentStatus;
    CHECK(decide_intervention(S::Timeout, true) == Intervention::RetrySame);
    CHECK(decide_intervention(S::Error, true) == Intervention::RetrySame);
    CHECK(decide_intervention(S::Success, true) == Intervention::Skip);
    CHECK(decide_intervention(S::Failure, true) == Intervention::Skip);
    CHECK(decide_intervention(S::BudgetExceeded, true) == Intervention::Skip);
    for (S s : {S::Success, S::Failure, S::Error, S::Timeout, S::BudgetExceeded}) {
        CHECK(decide_intervention(s, false) == Intervention::Skip);
    }
    SECTION("intervention names round-trip to stable strings") {
        CHECK(std::string(to_string(Intervention::Skip)) == "skip");
        CHECK(std::string(to_string(Intervention::RetrySame)) == "retry_same");
        CHECK(std::string(to_string(Intervention::RetryDifferent)) == "retry_different");
        CHECK(std::string(to_string(Intervention::Replan)) == "replan");
        CHECK(std::string(to_string(Intervention::Abort)) == "abort");
    }
}

TEST_CASE("risk classes partition the six kinds") {
    CHECK(kind_can_write(AgentKind::Coder));
    CHECK(kind_can_write(AgentKind::Tester));
    CHECK(kind_can_write(AgentKind::Diagnostician));
    CHECK_FALSE(kind_can_write(AgentKind::Researcher));
    CHECK_FALSE(kind_can_write(AgentKind::Planner));
    CHECK_FALSE(kind_can_write(AgentKind::Reviewer));

    SECTION("replacement cycles stay within the class") {
        CHECK(next_in_risk_class(AgentKind::Coder) == AgentKind::Tester);
        CHECK(next_in_risk_class(AgentKind::Tester) == AgentKind::Diagnostician);
        CHECK(next_in_risk_class(AgentKind::Diagnostician) == AgentKind::Coder);
        CHECK(next_in_risk_class(AgentKind::Researcher) == AgentKind::Planner);
        CHECK(next_in_risk_class(AgentKind::Planner) == AgentKind::Reviewer);
        CHECK(next_in_risk_class(AgentKind::Reviewer) == AgentKind::Researcher);
        for (AgentKind k : kAllAgentKinds) {
            CHECK(next_in_risk_class(k) != k);
            CHECK(kind_can_write(next_in_risk_class(k)) == kind_can_write(k));
        }
    }
}

TEST_CASE("pipeline detection maps verbs to kinds in order") {
    CHECK(detect_pipeline("research the module, then implement and test it") ==
          std::vector<AgentKind>{AgentKind::Researcher, AgentKind::Coder, AgentKind::Tester});
    CHECK(detect_pipeline("fix it") == std::vector<AgentKind>{AgentKind::Coder});
    CHECK(detect_pipeline("hello world") == std::vector<AgentKind>{AgentKind::Coder});
    CHECK(detect_pipeline("") == std::vector<AgentKind>{AgentKind::Coder});
    CHECK(detect_pipeline("diagnose the crash, fix it") ==
          std::vector<AgentKind>{AgentKind::Diagnostician, AgentKind::Coder});
    CHECK(detect_pipeline("plan the work, implement, test, review") ==
          std::vector<AgentKind>{AgentKind::Planner, AgentKind::Coder, AgentKind::Tester,
                                 AgentKind::Reviewer});

    SECTION("consecutive duplicates merge") {
        CHECK(detect_pipeline("test and verify the result") ==
              std::vector<AgentKind>{AgentKind::Tester});
        CHECK(detect_pipeline("write code") == std::vector<AgentKind>{AgentKind::Coder});
    }
    SECTION("keywords are whole words") {
        CHECK(detect_pipeline("retest the contest") == std::vector<AgentKind>{AgentKind::Coder});
    }
}

TEST_CASE("task DAG construction validates structure") {
    auto tasks = make_pipeline_tasks("research then implement then test");
    REQUIRE(tasks.size() == 3);
    CHECK(tasks[0].id == "t1-researcher");
    CHECK(tasks[1].id == "t2-coder");
    CHECK(tasks[2].id == "t3-tester");
    CHECK(tasks[0].deps.empty());
    CHECK(tasks[1].deps == std::vector<std::string>{"t1-researcher"});
    CHECK(tasks[2].deps == std::vector<std::string>{"t2-coder"});

    auto dag = build_dag(tasks);
    CHECK(dag.topo == std::vector<std::size_t>{0, 1, 2});
    CHECK(dag.build_ops == 5);  // 3 nodes + 2 edges

    SECTION("duplicate ids") {
        auto dup = tasks;
        dup[1].id = dup[0].id;
        CHECK_THROWS_AS(build_dag(dup), dag_error);
    }
    SECTION("unknown dependency") {
        auto bad = tasks;
        bad[2].deps = {"t9-ghost"};
        CHECK_THROWS_AS(build_dag(bad), dag_error);
    }
    SECTION("self dependency") {
        auto self = tasks;
        self[1].deps = {self[1].id};
        CHECK_THROWS_AS(build_dag(self), dag_error);
    }
    SECTION("cycles") {
        auto cyc = tasks;
        cyc[0].deps = {cyc[2].id};
        CHECK_THROWS_AS(build_dag(cyc), dag_error);
    }
    SECTION("diamonds topo-sort dependencies first") {
        std::vector<SwarmTask> diamond(4);
        diamond[0].id = "a";
        diamond[1].id = "b";
        diamond[1].deps = {"a"};
        diamond[2].id = "c";
        diamond[2].deps = {"a"};
        diamond[3].id = "d";
        diamond[3].deps = {"b", "c"};
        auto d = build_dag(diamond);
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < d.topo.size(); ++i) pos[d.tasks[d.topo[i]].id] = i;
        CHECK(pos["a"] < pos["b"]);
        CHECK(pos["a"] < pos["c"]);
        CHECK(pos["b"] < pos["d"]);
        CHECK(pos["c"] < pos["d"]);
        CHECK(d.build_ops == 8);  // 4 nodes + 4 edges
    }
    SECTION("a token plan fixes per-stage spend") {
        auto planned = make_pipeline_tasks("research then implement", BudgetTier::Standard,
                                           {1000, 2000});
        std::uint64_t t1 = 0, t2 = 0;
        for (const auto& s : planned[0].script.steps) t1 += s.cost.tokens();
        for (const auto& s : planned[1].script.steps) t2 += s.cost.tokens();
        CHECK(t1 == 1000);
        CHECK(t2 == 2000);
    }
}

TEST_CASE("a linear pipeline runs to completion with chained artifacts") {
    auto tasks = make_pipeline_tasks("research then implement then test");
    BudgetVector swarm_budget = oplus(sum_contract_budgets(tasks),
                                      BudgetVector::of(5, 10, 10000, 60, 2, 4));
    auto rep = run_swarm(tasks, swarm_budget);

    REQUIRE(rep.status == SwarmStatus::Completed);
    CHECK(rep.pre_check.ok);
    for (const auto& [id, out] : rep.outcomes) {
        CHECK(out.final_state == TaskFinal::Success);
        CHECK(out.attempts.size() == 1);
        CHECK_FALSE(out.artifact_id.empty());
    }
    CHECK(rep.artifacts.size() == 3);

    SECTION("artifact parentage follows the dependency chain") {
        const auto& t1 = rep.outcomes.at("t1-researcher");
        const auto& t2 = rep.outcomes.at("t2-coder");
        const auto& t3 = rep.outcomes.at("t3-tester");
        CHECK(rep.artifacts.at(t1.artifact_id).parents.empty());
        CHECK(rep.artifacts.at(t2.artifact_id).parents ==
              std::vector<std::string>{t1.artifact_id});
        CHECK(rep.artifacts.at(t3.artifact_id).parents ==
              std::vector<std::string>{t2.artifact_id});
        for (const auto& [id, art] : rep.artifacts) CHECK(verify_artifact(art));
    }
    SECTION("the swarm tracker stays within its envelope") {
        CHECK(leq(rep.swarm_usage, swarm_budget));
        CHECK(rep.swarm_usage.handoffs() == 2);  // one per chained hand-off
        CHECK(rep.swarm_usage.tokens() == 3 * 2400);
    }
    SECTION("the trail narrates the run in order") {
        std::set<std::string> events;
        for (const auto& e : rep.trail) events.insert(e.event);
        for (const char* expected : {"pre_check_ok", "gate_check", "handoff_admit",
                                     "task_result", "artifact", "terminal"}) {
            INFO("event " << expected);
            CHECK(events.count(expected) > 0);
        }
        for (std::size_t i = 1; i < rep.trail.size(); ++i) {
            CHECK(rep.trail[i].seq > rep.trail[i - 1].seq);
        }
        CHECK(rep.trail.back().event == "terminal");
        CHECK(rep.trail.back().detail == "completed");
    }
}

TEST_CASE("a transient fault earns exactly one same-contract retry") {
    auto tasks = make_pipeline_tasks("research then implement then test");
    tasks[1].script = inject_error(tasks[1].script, 0, "net_blip", 1);
    BudgetVector swarm_budget = oplus(sum_contract_budgets(tasks),
                                      BudgetVector::of(5, 10, 10000, 60, 2, 4));
    auto rep = run_swarm(tasks, swarm_budget);

    REQUIRE(rep.status == SwarmStatus::Completed);
    const auto& coder = rep.outcomes.at("t2-coder");
    CHECK(coder.final_state == TaskFinal::Success);
    REQUIRE(coder.attempts.size() == 2);
    CHECK(coder.attempts[0].result.status == SubAgentStatus::Error);
    CHECK(coder.attempts[0].result.category == "net_blip");
    CHECK(coder.attempts[1].result.status == SubAgentStatus::Success);
    CHECK(coder.interventions == std::vector<std::string>{"retry_same"});
    CHECK(coder.usage.retries() == 1);
    CHECK(rep.swarm_usage.retries() == 1);

    SECTION("the retry does not pay the hand-off charge twice") {
        CHECK(rep.swarm_usage.handoffs() == 2);
    }
}

TEST_CASE("a permanent failure cascades into skips") {
    auto tasks = make_pipeline_tasks("research then implement then test");
    tasks[1].script = inject_error(tasks[1].script, 0, "hard_fault", 0);  // every attempt
    BudgetVector swarm_budget = oplus(sum_contract_budgets(tasks),
                                      BudgetVector::of(5, 10, 10000, 60, 4, 4));
    auto rep = run_swarm(tasks, swarm_budget);

    CHECK(rep.status == SwarmStatus::Failed);
    CHECK(rep.outcomes.at("t1-researcher").final_state == TaskFinal::Success);
    const auto& coder = rep.outcomes.at("t2-coder");
    CHECK(coder.final_state == TaskFinal::Error);
    CHECK(coder.attempts.size() == 2);  // retry consumed, still failing
    CHECK(rep.outcomes.at("t3-tester").final_state == TaskFinal::Skipped);
    CHECK(rep.outcomes.at("t3-tester").attempts.empty());

    bool cascade_logged = false;
    for (const auto& e : rep.trail) {
        cascade_logged |= e.event == "skip_cascade" && e.task == "t3-tester";
    }
    CHECK(cascade_logged);
}

TEST_CASE("cancellation ends the run before new dispatches") {
    auto tasks = make_pipeline_tasks("research then implement");
    BudgetVector swarm_budget = oplus(sum_contract_budgets(tasks),
                                      BudgetVector::of(5, 10, 10000, 60, 2, 4));
    SwarmOptions opts;
    opts.cancelled = [] { return true; };
    auto rep = run_swarm(tasks, swarm_budget, opts);
    CHECK(rep.status == SwarmStatus::Cancelled);
    for (const auto& [id, out] : rep.outcomes) {
        CHECK(out.final_state == TaskFinal::Skipped);
        CHECK(out.attempts.empty());
    }
    CHECK(rep.swarm_usage.is_zero());
}

TEST_CASE("the conservation pre-check refuses oversubscribed swarms") {
    auto tasks = make_pipeline_tasks("research then implement");
    BudgetVector too_small = BudgetVector::of(10, 20, 50000, 60, 2, 1);  // < 2x standard
    auto rep = run_swarm(tasks, too_small);
    CHECK(rep.status == SwarmStatus::Failed);
    CHECK_FALSE(rep.pre_check.ok);
    CHECK_FALSE(rep.pre_check.violations.empty());
    for (const auto& [id, out] : rep.outcomes) {
        CHECK(out.final_state == TaskFinal::Skipped);
        CHECK(out.attempts.empty());
    }
    bool refused_logged = false;
    for (const auto& e : rep.trail) refused_logged |= e.event == "pre_check_refused";
    CHECK(refused_logged);
    CHECK(rep.rounds == 0);
}

TEST_CASE("exhausting the hand-off budget ends the swarm as budget-exceeded") {
    auto tasks = make_pipeline_tasks("research then implement then test", BudgetTier::Tight);
    for (const auto& t : tasks) REQUIRE(t.contract.budget.handoffs() == 0);
    BudgetVector swarm_budget = oplus(sum_contract_budgets(tasks),
                                      BudgetVector::of(5, 10, 10000, 60, 2, 2));
    REQUIRE(swarm_budget.handoffs() == 2);
    SwarmOptions opts;
    opts.registry = default_registry(BudgetTier::Tight);
    auto rep = run_swarm(tasks, swarm_budget, opts);

    // t2's hand-off consumes 1 of 2; t3's second hand-off would reach the
    // limit, so it is refused and the tracker latches.
    CHECK(rep.status == SwarmStatus::BudgetExceeded);
    CHECK(rep.outcomes.at("t1-researcher").final_state == TaskFinal::Success);
    CHECK(rep.outcomes.at("t2-coder").final_state == TaskFinal::Success);
    CHECK(rep.outcomes.at("t3-tester").final_state == TaskFinal::BudgetExceeded);
    bool refused = false;
    for (const auto& e : rep.trail) refused |= e.event == "handoff_refused";
    CHECK(refused);
}

TEST_CASE("read-only tasks share a round; writers run one per round") {
    SECTION("two independent researchers dispatch together") {
        std::vector<SwarmTask> tasks(2);
        tasks[0].id = "r1";
        tasks[0].contract = make_contract(AgentKind::Researcher);
        tasks[0].script = default_script(AgentKind::Researcher);
        tasks[1].id = "r2";
        tasks[1].contract = make_contract(AgentKind::Researcher);
        tasks[1].script = default_script(AgentKind::Researcher);
        BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                    BudgetVector::of(5, 10, 10000, 60, 2, 2));

        std::atomic<int> in_flight{0};
        std::atomic<int> peak{0};
        SwarmOptions opts;
        opts.attempt_probe = [&](const std::string&, bool started) {
            if (started) {
                int now = ++in_flight;
                int prev = peak.load();
                while (now > prev && !peak.compare_exchange_weak(prev, now)) {
                }
            } else {
                --in_flight;
            }
        };
        auto rep = run_swarm(tasks, budget, opts);
        REQUIRE(rep.status == SwarmStatus::Completed);
        CHECK(rep.rounds == 2);  // both dispatched in round one

        SECTION("serial mode still completes") {
            SwarmOptions serial;
            serial.concurrent_reads = false;
            auto rep2 = run_swarm(tasks, budget, serial);
            CHECK(rep2.status == SwarmStatus::Completed);
        }
    }
    SECTION("two independent coders take two rounds") {
        std::vector<SwarmTask> tasks(2);
        tasks[0].id = "c1";
        tasks[0].contract = make_contract(AgentKind::Coder);
        tasks[0].script = default_script(AgentKind::Coder);
        tasks[1].id = "c2";
        tasks[1].contract = make_contract(AgentKind::Coder);
        tasks[1].script = default_script(AgentKind::Coder);
        BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                    BudgetVector::of(5, 10, 10000, 60, 2, 2));
        auto rep = run_swarm(tasks, budget);
        REQUIRE(rep.status == SwarmStatus::Completed);
        CHECK(rep.rounds == 3);  // c1 alone, then c2, then the empty closing round
    }
    SECTION("a mixed round dispatches the reads before any writer") {
        std::vector<SwarmTask> tasks(2);
        tasks[0].id = "w";
        tasks[0].contract = make_contract(AgentKind::Coder);
        tasks[0].script = default_script(AgentKind::Coder);
        tasks[1].id = "r";
        tasks[1].contract = make_contract(AgentKind::Researcher);
        tasks[1].script = default_script(AgentKind::Researcher);
        BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                    BudgetVector::of(5, 10, 10000, 60, 2, 2));
        auto rep = run_swarm(tasks, budget);
        REQUIRE(rep.status == SwarmStatus::Completed);
        std::uint64_t read_done = 0, write_done = 0;
        for (const auto& e : rep.trail) {
            if (e.event != "task_result") continue;
            if (e.task == "r") read_done = e.seq;
            if (e.task == "w") write_done = e.seq;
        }
        CHECK(read_done < write_done);
        CHECK(rep.rounds == 3);
    }
}

TEST_CASE("strategy hooks unlock the remaining interventions") {
    SECTION("retry_different swaps in the next contract of the same class") {
        std::vector<SwarmTask> tasks(1);
        tasks[0].id = "probe";
        tasks[0].contract = make_contract(AgentKind::Researcher);
        tasks[0].script = inject_error(default_script(AgentKind::Researcher), 0, "flaky", 0);
        BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                    BudgetVector::of(5, 10, 10000, 60, 2, 2));
        SwarmOptions opts;
        opts.hook = [](const SwarmTask&, const SubAgentResult& res, bool can_retry)
            -> std::optional<Intervention> {
            if (res.status == SubAgentStatus::Error && can_retry) {
                return Intervention::RetryDifferent;
            }
            return std::nullopt;
        };
        auto rep = run_swarm(tasks, budget, opts);
        REQUIRE(rep.status == SwarmStatus::Completed);
        const auto& out = rep.outcomes.at("probe");
        CHECK(out.final_state == TaskFinal::Success);
        CHECK(out.interventions == std::vector<std::string>{"retry_different"});
        bool swapped = false;
        for (const auto& e : rep.trail) {
            swapped |= e.event == "swap_contract" && e.detail == "planner";
        }
        CHECK(swapped);
        // The replacement ran its own kind's script and artifact.
        CHECK(rep.artifacts.at(out.artifact_id).kind == ArtifactKind::ExecutionPlan);
    }
    SECTION("replan rebuilds the task from fresh text and resets attempts") {
        std::vector<SwarmTask> tasks(1);
        tasks[0].id = "probe";
        tasks[0].contract = make_contract(AgentKind::Coder);
        tasks[0].script = inject_error(default_script(AgentKind::Coder), 0, "wrong_plan", 0);
        BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                    BudgetVector::of(5, 10, 10000, 60, 2, 2));
        SwarmOptions opts;
        opts.replan_text = "test the change instead";
        bool asked = false;
        opts.hook = [&asked](const SwarmTask&, const SubAgentResult&, bool)
            -> std::optional<Intervention> {
            if (asked) return std::nullopt;
            asked = true;
            return Intervention::Replan;
        };
        auto rep = run_swarm(tasks, budget, opts);
        REQUIRE(rep.status == SwarmStatus::Completed);
        const auto& out = rep.outcomes.at("probe");
        CHECK(out.final_state == TaskFinal::Success);
        REQUIRE_FALSE(out.interventions.empty());
        CHECK(out.interventions.front() == "replan");
        CHECK(rep.artifacts.at(out.artifact_id).kind == ArtifactKind::TestReport);
        bool replanned = false;
        for (const auto& e : rep.trail) replanned |= e.event == "replan" && e.detail == "tester";
        CHECK(replanned);
    }
    SECTION("abort cancels the whole run") {
        auto tasks = make_pipeline_tasks("research then implement");
        tasks[0].script = inject_error(tasks[0].script, 0, "fatal", 0);
        BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                    BudgetVector::of(5, 10, 10000, 60, 2, 2));
        SwarmOptions opts;
        opts.hook = [](const SwarmTask&, const SubAgentResult&, bool)
            -> std::optional<Intervention> { return Intervention::Abort; };
        auto rep = run_swarm(tasks, budget, opts);
        CHECK(rep.status == SwarmStatus::Cancelled);
        CHECK(rep.outcomes.at("t1-researcher").final_state == TaskFinal::Error);
        CHECK(rep.outcomes.at("t1-researcher").interventions ==
              std::vector<std::string>{"abort"});
        CHECK(rep.outcomes.at("t2-coder").final_state == TaskFinal::Skipped);
    }
}

TEST_CASE("swarm reports serialize completely") {
    auto tasks = make_pipeline_tasks("research then implement");
    BudgetVector budget = oplus(sum_contract_budgets(tasks),
                                BudgetVector::of(5, 10, 10000, 60, 2, 2));
    auto rep = run_swarm(tasks, budget);
    json j = to_json(rep);
    CHECK(j["status"] == "completed");
    CHECK(j["pre_check"]["ok"] == true);
    CHECK(j["outcomes"].size() == 2);
    CHECK(j["artifacts"].size() == 2);
    CHECK(j["trail"].is_array());
    CHECK(j["swarm_usage"].is_array());
    CHECK(j["rounds"].is_number());
    const json& outcome = j["outcomes"]["t2-coder"];
    CHECK(outcome["final"] == "success");
    CHECK(outcome["attempts"].is_array());
    CHECK(outcome["attempts"][0]["result"]["status"] == "success");
}
