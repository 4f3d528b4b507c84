#pragma once

// Multi-agent execution: scripted simulated agents run under budget
// trackers, a DAG of tasks with dependency edges, three admission gates per
// dispatch, loop (chattiness) detection, an intervention table for failed
// attempts, and artifact hand-off with content digests. Read-only tasks run
// concurrently; anything that can write is strictly serialized.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rgao/budget.hpp"
#include "rgao/code_index.hpp"
#include "rgao/common.hpp"
#include "rgao/contracts.hpp"

namespace rgao {

class dag_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- artifacts ---------------------------------------------------------------

enum class ArtifactKind : std::uint8_t {
    TaskBrief,
    RepoFindings,
    ExecutionPlan,
    TestReport,
    ReviewReport,
    DiagnosticReport,
};

inline const char* to_string(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::TaskBrief: return "task_brief";
        case ArtifactKind::RepoFindings: return "repo_findings";
        case ArtifactKind::ExecutionPlan: return "execution_plan";
        case ArtifactKind::TestReport: return "test_report";
        case ArtifactKind::ReviewReport: return "review_report";
        case ArtifactKind::DiagnosticReport: return "diagnostic_report";
    }
    return "task_brief";
}

inline ArtifactKind artifact_kind_from_string(const std::string& s) {
    if (s == "task_brief") return ArtifactKind::TaskBrief;
    if (s == "repo_findings") return ArtifactKind::RepoFindings;
    if (s == "execution_plan") return ArtifactKind::ExecutionPlan;
    if (s == "test_report") return ArtifactKind::TestReport;
    if (s == "review_report") return ArtifactKind::ReviewReport;
    if (s == "diagnostic_report") return ArtifactKind::DiagnosticReport;
    throw std::invalid_argument("unknown artifact kind '" + s + "'");
}

inline ArtifactKind artifact_kind_for(AgentKind k) {
    switch (k) {
        case AgentKind::Coder: return ArtifactKind::TaskBrief;
        case AgentKind::Researcher: return ArtifactKind::RepoFindings;
        case AgentKind::Planner: return ArtifactKind::ExecutionPlan;
        case AgentKind::Tester: return ArtifactKind::TestReport;
        case AgentKind::Reviewer: return ArtifactKind::ReviewReport;
        case AgentKind::Diagnostician: return ArtifactKind::DiagnosticReport;
    }
    return ArtifactKind::TaskBrief;
}

struct SwarmArtifact {
    std::string id;
    ArtifactKind kind = ArtifactKind::TaskBrief;
    std::string producer;               // task id that emitted it
    std::vector<std::string> parents;   // artifact ids consumed to produce it
    json payload;
    std::string digest;                 // sha256 of the canonical payload
};

// Digest covers the canonical (sorted-key, no-whitespace) payload encoding,
// so any payload mutation after hand-off is detectable.
inline SwarmArtifact make_artifact(ArtifactKind kind, const std::string& producer,
                                   json payload, std::vector<std::string> parents = {}) {
    SwarmArtifact a;
    a.kind = kind;
    a.producer = producer;
    a.parents = std::move(parents);
    a.payload = std::move(payload);
    a.digest = sha256_hex(canonical_json(a.payload));
    a.id = producer + ":" + to_string(kind) + ":" + a.digest.substr(0, 12);
    return a;
}

inline bool verify_artifact(const SwarmArtifact& a) {
    return sha256_hex(canonical_json(a.payload)) == a.digest;
}

inline json to_json(const SwarmArtifact& a) {
    return {{"id", a.id},          {"kind", to_string(a.kind)}, {"producer", a.producer},
            {"parents", a.parents}, {"payload", a.payload},     {"digest", a.digest}};
}

// --- chattiness --------------------------------------------------------------

// Flags an agent that repeats itself: any value occurring `repeat` times
// within the last `window` entries of either stream (tool-call names, or
// normalized output prefixes) latches the detector.
class ChattinessDetector {
public:
    explicit ChattinessDetector(std::size_t window = 6, std::size_t repeat = 3)
        : window_(window), repeat_(repeat) {}

    void record_call(const std::string& name) { note(calls_, name, "repeated tool call"); }

    void record_output(const std::string& text) {
        std::string norm = detail::strip(text);
        if (norm.size() > 500) norm.resize(500);
        for (char& c : norm) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        note(outputs_, std::move(norm), "repeated output");
    }

    bool chatty() const { return chatty_; }
    const std::string& reason() const { return reason_; }

private:
    void note(std::deque<std::string>& buf, std::string value, const char* what) {
        buf.push_back(std::move(value));
        if (buf.size() > window_) buf.pop_front();
        std::size_t n = static_cast<std::size_t>(std::count(buf.begin(), buf.end(), buf.back()));
        if (n >= repeat_ && !chatty_) {
            chatty_ = true;
            reason_ = std::string(what) + " ('" + buf.back().substr(0, 60) + "')";
        }
    }

    std::size_t window_;
    std::size_t repeat_;
    std::deque<std::string> calls_;
    std::deque<std::string> outputs_;
    bool chatty_ = false;
    std::string reason_;
};

// --- scripted agents ----------------------------------------------------------

// A deterministic stand-in for a model-driven agent: a fixed list of steps,
// each with a resource cost and optional injected fault. Faults with
// fail_on_attempt > 0 fire only on that attempt, which is how retryable
// transient failures are staged.
struct AgentStep {
    enum class Kind : std::uint8_t { ToolCall, Final };

    Kind kind = Kind::ToolCall;
    std::string tool;
    std::string output;
    BudgetVector cost;          // spent when the step executes (plus bookkeeping)
    json artifact_payload;      // Final only; null means {"summary": output}
    bool fail_timeout = false;
    bool fail_error = false;
    std::string fail_category = "fault";
    int fail_on_attempt = 0;    // 0 = fires on every attempt
};

struct AgentScript {
    std::vector<AgentStep> steps;
};

inline AgentStep tool_step(std::string tool, std::uint64_t tokens, std::string output,
                           std::uint64_t seconds = 1) {
    AgentStep s;
    s.kind = AgentStep::Kind::ToolCall;
    s.tool = std::move(tool);
    s.output = std::move(output);
    s.cost = BudgetVector::of(0, 0, tokens, seconds, 0, 0);
    return s;
}

inline AgentStep final_step(std::string output, std::uint64_t tokens, json payload = nullptr) {
    AgentStep s;
    s.kind = AgentStep::Kind::Final;
    s.output = std::move(output);
    s.cost = BudgetVector::of(0, 0, tokens, 0, 0, 0);
    s.artifact_payload = std::move(payload);
    return s;
}

// Canonical two-calls-then-answer script for each agent kind; the final
// output satisfies the kind's completion predicate. Tokens split 30/30/40.
inline AgentScript default_script(AgentKind kind, std::uint64_t total_tokens = 2400) {
    std::uint64_t a = total_tokens * 3 / 10;
    std::uint64_t b = total_tokens * 3 / 10;
    std::uint64_t c = total_tokens - a - b;
    AgentScript s;
    switch (kind) {
        case AgentKind::Coder:
            s.steps = {tool_step("read_file", a, "target file contents"),
                       tool_step("apply_patch", b, "patch applied cleanly"),
                       final_step("done: applied the change and kept the diff minimal", c,
                                  json{{"summary", "patch applied"}, {"files", json::array({"target"})}})};
            break;
        case AgentKind::Researcher:
            s.steps = {tool_step("search_code", a, "12 matches across 4 files"),
                       tool_step("read_file", b, "entry point and call sites"),
                       final_step("findings: mapped the call graph with file references", c,
                                  json{{"summary", "call graph mapped"}, {"references", 4}})};
            break;
        case AgentKind::Planner:
            s.steps = {tool_step("read_file", a, "module layout"),
                       tool_step("draft_plan", b, "three-step outline"),
                       final_step("plan: 1) isolate module 2) apply change 3) verify", c,
                                  json{{"summary", "three ordered steps"}, {"steps", 3}})};
            break;
        case AgentKind::Tester:
            s.steps = {tool_step("read_file", a, "test targets"),
                       tool_step("write_file", b, "wrote regression test"),
                       final_step(R"({"status":"passed","tests_run":12,"issues":[]})", c,
                                  json{{"summary", "suite green"}, {"tests_run", 12}})};
            break;
        case AgentKind::Reviewer:
            s.steps = {tool_step("read_file", a, "diff under review"),
                       tool_step("annotate", b, "two notes attached"),
                       final_step(R"({"verdict":"approve","issues":[{"severity":"minor","note":"naming"}]})",
                                  c, json{{"summary", "approved with one minor note"}, {"issues", 1}})};
            break;
        case AgentKind::Diagnostician:
            s.steps = {tool_step("run_tests", a, "1 failing case isolated"),
                       tool_step("read_file", b, "suspect initialization order"),
                       final_step("cause: stale cache entry raced initialization; smallest failing case kept",
                                  c, json{{"summary", "root cause isolated"}, {"failing_cases", 1}})};
            break;
    }
    return s;
}

inline AgentScript inject_timeout(AgentScript s, std::size_t step, int attempt = 1) {
    s.steps.at(step).fail_timeout = true;
    s.steps.at(step).fail_on_attempt = attempt;
    return s;
}

inline AgentScript inject_error(AgentScript s, std::size_t step, std::string category = "fault",
                                int attempt = 1) {
    s.steps.at(step).fail_error = true;
    s.steps.at(step).fail_category = std::move(category);
    s.steps.at(step).fail_on_attempt = attempt;
    return s;
}

// --- sub-agent runner ----------------------------------------------------------

enum class SubAgentStatus : std::uint8_t { Success, Failure, Error, Timeout, BudgetExceeded };

inline const char* to_string(SubAgentStatus s) {
    switch (s) {
        case SubAgentStatus::Success: return "success";
        case SubAgentStatus::Failure: return "failure";
        case SubAgentStatus::Error: return "error";
        case SubAgentStatus::Timeout: return "timeout";
        case SubAgentStatus::BudgetExceeded: return "budget_exceeded";
    }
    return "failure";
}

struct SubAgentResult {
    SubAgentStatus status = SubAgentStatus::Failure;
    std::string output;
    BudgetVector usage;                 // consumption of this attempt only
    std::uint32_t iterations = 0;
    std::uint32_t tool_calls = 0;
    std::vector<std::string> violations;
    std::string category;               // chattiness / timeout / budget / validation / fault label
    bool chatty = false;
    json artifact_payload;              // from the final step, when reached
};

struct SubAgentOptions {
    int attempt = 1;
    std::uint64_t wall_clock_ms = 0;    // 0 = simulated time only
};

// One attempt of the agent loop: every iteration first passes the budget
// gate and the chattiness gate, then executes the next scripted step. The
// final output is judged against the contract's completion predicate. The
// tracker is shared across attempts, so its refusals latch.
inline SubAgentResult run_subagent(const Contract& contract, const AgentScript& script,
                                   BudgetTracker& tracker, const SubAgentOptions& opts = {}) {
    auto filtered = filter_tools(contract.tools, contract.max_risk);
    std::unordered_set<std::string> allowed;
    for (const auto& t : filtered.allowed) allowed.insert(t.name);

    ChattinessDetector detector;
    SubAgentResult r;
    const BudgetVector before = tracker.used();
    std::optional<SubAgentStatus> status;
    std::size_t step_i = 0;
    const auto t0 = std::chrono::steady_clock::now();

    while (true) {
        if (tracker.exceeded()) {
            status = SubAgentStatus::BudgetExceeded;
            r.category = "budget";
            break;
        }
        if (detector.chatty()) {
            status = SubAgentStatus::Failure;
            r.category = "chattiness";
            r.chatty = true;
            r.violations.push_back(detector.reason());
            break;
        }
        if (opts.wall_clock_ms > 0) {
            auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
            if (static_cast<std::uint64_t>(ms) > opts.wall_clock_ms) {
                status = SubAgentStatus::Timeout;
                r.category = "wall_clock";
                break;
            }
        }
        if (!tracker.admit(BudgetVector::of(1, 0, 0, 0, 0, 0))) {
            status = SubAgentStatus::BudgetExceeded;
            r.category = "budget";
            break;
        }
        ++r.iterations;
        if (step_i >= script.steps.size()) break;  // script ended without a final answer

        const AgentStep& step = script.steps[step_i++];
        bool fires = step.fail_on_attempt == 0 || step.fail_on_attempt == opts.attempt;
        if (step.fail_timeout && fires) {
            status = SubAgentStatus::Timeout;
            r.category = "timeout";
            break;
        }
        if (step.fail_error && fires) {
            status = SubAgentStatus::Error;
            r.category = step.fail_category;
            break;
        }
        if (step.kind == AgentStep::Kind::ToolCall) {
            if (!allowed.count(step.tool)) {
                status = SubAgentStatus::Error;
                r.category = "tool_denied";
                r.violations.push_back("tool '" + step.tool + "' not permitted by the contract");
                break;
            }
            if (!tracker.admit(oplus(step.cost, BudgetVector::of(0, 1, 0, 0, 0, 0)))) {
                status = SubAgentStatus::BudgetExceeded;
                r.category = "budget";
                break;
            }
            ++r.tool_calls;
            detector.record_call(step.tool);
            detector.record_output(step.output);
        } else {
            if (!tracker.admit(step.cost)) {
                status = SubAgentStatus::BudgetExceeded;
                r.category = "budget";
                break;
            }
            r.output = step.output;
            r.artifact_payload = step.artifact_payload.is_null()
                                     ? json{{"summary", step.output}}
                                     : step.artifact_payload;
            break;
        }
    }

    if (!status) {
        auto v = validate_output(contract, r.output);
        for (auto& viol : v.violations) r.violations.push_back(std::move(viol));
        status = v.ok ? SubAgentStatus::Success : SubAgentStatus::Failure;
        if (!v.ok) r.category = "validation";
    }
    r.status = *status;

    const BudgetVector after = tracker.used();
    for (std::size_t i = 0; i < kBudgetDims; ++i) r.usage.v[i] = after[i] - before[i];
    return r;
}

inline SubAgentResult run_subagent(const Contract& contract, const AgentScript& script,
                                   const SubAgentOptions& opts = {}) {
    BudgetTracker tracker(contract.budget);
    return run_subagent(contract, script, tracker, opts);
}

// --- interventions --------------------------------------------------------------

enum class Intervention : std::uint8_t { Skip, RetrySame, RetryDifferent, Replan, Abort };

inline const char* to_string(Intervention i) {
    switch (i) {
        case Intervention::Skip: return "skip";
        case Intervention::RetrySame: return "retry_same";
        case Intervention::RetryDifferent: return "retry_different";
        case Intervention::Replan: return "replan";
        case Intervention::Abort: return "abort";
    }
    return "skip";
}

// Default policy: transient outcomes (timeout, error) retry when capacity
// allows; budget exhaustion and validation failure don't earn a retry.
// RetryDifferent, Replan and Abort are only reachable through a custom
// strategy hook.
inline Intervention decide_intervention(SubAgentStatus status, bool can_retry) {
    if (!can_retry) return Intervention::Skip;
    switch (status) {
        case SubAgentStatus::Timeout:
        case SubAgentStatus::Error: return Intervention::RetrySame;
        case SubAgentStatus::Success:
        case SubAgentStatus::Failure:
        case SubAgentStatus::BudgetExceeded: return Intervention::Skip;
    }
    return Intervention::Skip;
}

// Whether the kind's contract ceiling allows writes/executes. Used to group
// scheduling (read-only kinds may run concurrently) and to pick retry
// replacements from the same class.
inline bool kind_can_write(AgentKind k) {
    return k == AgentKind::Coder || k == AgentKind::Tester || k == AgentKind::Diagnostician;
}

inline AgentKind next_in_risk_class(AgentKind k) {
    bool writer = kind_can_write(k);
    std::size_t at = 0;
    for (std::size_t i = 0; i < kAllAgentKinds.size(); ++i) {
        if (kAllAgentKinds[i] == k) at = i;
    }
    for (std::size_t off = 1; off <= kAllAgentKinds.size(); ++off) {
        AgentKind cand = kAllAgentKinds[(at + off) % kAllAgentKinds.size()];
        if (cand != k && kind_can_write(cand) == writer) return cand;
    }
    return k;
}

// --- pipeline detection -----------------------------------------------------------

// Keyword segmentation of a task description into an ordered agent chain.
// Keywords map to kinds in appearance order; consecutive duplicates merge;
// a text with no verbs falls through to a lone coder.
inline std::vector<AgentKind> detect_pipeline(const std::string& text) {
    static const std::vector<std::pair<std::string, AgentKind>> table = {
        {"research", AgentKind::Researcher},  {"investigate", AgentKind::Researcher},
        {"survey", AgentKind::Researcher},    {"explore", AgentKind::Researcher},
        {"plan", AgentKind::Planner},         {"design", AgentKind::Planner},
        {"outline", AgentKind::Planner},      {"implement", AgentKind::Coder},
        {"code", AgentKind::Coder},           {"write", AgentKind::Coder},
        {"fix", AgentKind::Coder},            {"create", AgentKind::Coder},
        {"patch", AgentKind::Coder},          {"test", AgentKind::Tester},
        {"verify", AgentKind::Tester},        {"validate", AgentKind::Tester},
        {"review", AgentKind::Reviewer},      {"audit", AgentKind::Reviewer},
        {"diagnose", AgentKind::Diagnostician}, {"debug", AgentKind::Diagnostician},
        {"reproduce", AgentKind::Diagnostician},
    };
    std::vector<AgentKind> out;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        for (const auto& [kw, kind] : table) {
            if (word == kw) {
                if (out.empty() || out.back() != kind) out.push_back(kind);
                break;
            }
        }
        word.clear();
    };
    for (char ch : text) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else {
            flush();
        }
    }
    flush();
    if (out.empty()) out.push_back(AgentKind::Coder);
    return out;
}

// --- task DAG ----------------------------------------------------------------------

struct SwarmTask {
    std::string id;
    Contract contract;
    AgentScript script;
    std::vector<std::string> deps;  // task ids that must succeed first
};

struct TaskDag {
    std::vector<SwarmTask> tasks;                       // original order
    std::unordered_map<std::string, std::size_t> index; // id -> position
    std::vector<std::size_t> topo;                      // topological order
    std::vector<std::vector<std::size_t>> dependents;   // forward edges
    std::uint64_t build_ops = 0;                        // nodes + edges processed
};

// Kahn construction; processes each node and edge once (build_ops records
// the count). Duplicate ids, unknown or self dependencies, and cycles throw.
inline TaskDag build_dag(std::vector<SwarmTask> tasks) {
    TaskDag d;
    d.tasks = std::move(tasks);
    const std::size_t n = d.tasks.size();
    d.dependents.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!d.index.emplace(d.tasks[i].id, i).second) {
            throw dag_error("duplicate task id '" + d.tasks[i].id + "'");
        }
        ++d.build_ops;
    }
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& dep : d.tasks[i].deps) {
            auto it = d.index.find(dep);
            if (it == d.index.end()) {
                throw dag_error("task '" + d.tasks[i].id + "' depends on unknown task '" + dep + "'");
            }
            if (it->second == i) {
                throw dag_error("task '" + d.tasks[i].id + "' depends on itself");
            }
            d.dependents[it->second].push_back(i);
            ++indegree[i];
            ++d.build_ops;
        }
    }
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
        if (indegree[i] == 0) ready.push_back(i);
    }
    while (!ready.empty()) {
        std::size_t u = ready.front();
        ready.pop_front();
        d.topo.push_back(u);
        for (std::size_t v : d.dependents[u]) {
            if (--indegree[v] == 0) ready.push_back(v);
        }
    }
    if (d.topo.size() != n) throw dag_error("task dependencies form a cycle");
    return d;
}

// Builds a linear task chain from a task description: one task per detected
// pipeline stage, each depending on the previous one. token_plan, when
// given, fixes the per-stage token spend.
inline std::vector<SwarmTask> make_pipeline_tasks(const std::string& text,
                                                  BudgetTier tier = BudgetTier::Standard,
                                                  const std::vector<std::uint64_t>& token_plan = {}) {
    auto kinds = detect_pipeline(text);
    std::vector<SwarmTask> tasks;
    tasks.reserve(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        SwarmTask t;
        t.id = "t" + std::to_string(i + 1) + "-" + to_string(kinds[i]);
        t.contract = make_contract(kinds[i], tier);
        t.script = default_script(kinds[i], i < token_plan.size() ? token_plan[i] : 2400);
        if (i > 0) t.deps = {tasks[i - 1].id};
        tasks.push_back(std::move(t));
    }
    return tasks;
}

// --- gates --------------------------------------------------------------------------

struct GateReport {
    bool contract_ok = false;   // gate 1: contract is registered
    bool budget_ok = false;     // gate 2: swarm tracker still admits work
    bool artifacts_ok = false;  // gate 3: incoming artifacts verify
    std::vector<std::string> notes;

    bool pass() const { return contract_ok && budget_ok && artifacts_ok; }
};

// The three admission checks every dispatch must pass. Gate 3 recomputes
// each incoming artifact's digest and rejects empty payloads.
inline GateReport three_gates(const SwarmTask& task,
                              const std::map<std::string, Contract>& registry,
                              const BudgetTracker& swarm_tracker,
                              const std::vector<const SwarmArtifact*>& incoming) {
    GateReport g;
    g.contract_ok = registry.count(task.contract.name) > 0;
    if (!g.contract_ok) {
        g.notes.push_back("contract '" + task.contract.name + "' is not registered");
    }
    g.budget_ok = !swarm_tracker.exceeded();
    if (!g.budget_ok) g.notes.push_back("swarm budget is exhausted");
    g.artifacts_ok = true;
    for (const auto* a : incoming) {
        if (!verify_artifact(*a)) {
            g.artifacts_ok = false;
            g.notes.push_back("artifact '" + a->id + "' failed digest verification");
        } else if (a->payload.is_null() || (a->payload.is_object() && a->payload.empty()) ||
                   (a->payload.is_string() && a->payload.get<std::string>().empty())) {
            g.artifacts_ok = false;
            g.notes.push_back("artifact '" + a->id + "' carries an empty payload");
        }
    }
    return g;
}

// --- swarm run -----------------------------------------------------------------------

enum class SwarmStatus : std::uint8_t { Completed, Cancelled, BudgetExceeded, Failed };

inline const char* to_string(SwarmStatus s) {
    switch (s) {
        case SwarmStatus::Completed: return "completed";
        case SwarmStatus::Cancelled: return "cancelled";
        case SwarmStatus::BudgetExceeded: return "budget_exceeded";
        case SwarmStatus::Failed: return "failed";
    }
    return "failed";
}

enum class TaskFinal : std::uint8_t {
    Pending,
    Success,
    Failure,
    Error,
    Timeout,
    BudgetExceeded,
    Skipped,
};

inline const char* to_string(TaskFinal t) {
    switch (t) {
        case TaskFinal::Pending: return "pending";
        case TaskFinal::Success: return "success";
        case TaskFinal::Failure: return "failure";
        case TaskFinal::Error: return "error";
        case TaskFinal::Timeout: return "timeout";
        case TaskFinal::BudgetExceeded: return "budget_exceeded";
        case TaskFinal::Skipped: return "skipped";
    }
    return "pending";
}

inline TaskFinal final_from(SubAgentStatus s) {
    switch (s) {
        case SubAgentStatus::Success: return TaskFinal::Success;
        case SubAgentStatus::Failure: return TaskFinal::Failure;
        case SubAgentStatus::Error: return TaskFinal::Error;
        case SubAgentStatus::Timeout: return TaskFinal::Timeout;
        case SubAgentStatus::BudgetExceeded: return TaskFinal::BudgetExceeded;
    }
    return TaskFinal::Failure;
}

struct AttemptRecord {
    int attempt = 1;
    SubAgentResult result;
    std::uint64_t started_ns = 0;   // steady clock, for overlap analysis
    std::uint64_t finished_ns = 0;
};

struct TaskOutcome {
    std::string task_id;
    TaskFinal final_state = TaskFinal::Pending;
    std::vector<AttemptRecord> attempts;
    std::vector<std::string> interventions;
    std::string artifact_id;
    BudgetVector usage;  // summed over attempts
};

struct TrailEvent {
    std::uint64_t seq = 0;
    std::uint64_t ts_ns = 0;
    std::string task;
    std::string event;
    std::string detail;
};

struct SwarmRunReport {
    SwarmStatus status = SwarmStatus::Failed;
    VerificationReport pre_check;
    std::map<std::string, TaskOutcome> outcomes;
    std::map<std::string, SwarmArtifact> artifacts;
    std::vector<TrailEvent> trail;
    BudgetVector swarm_usage;
    std::uint64_t rounds = 0;
};

using InterventionHook = std::function<std::optional<Intervention>(
    const SwarmTask&, const SubAgentResult&, bool can_retry)>;

inline std::map<std::string, Contract> default_registry(BudgetTier tier = BudgetTier::Standard) {
    std::map<std::string, Contract> m;
    for (AgentKind k : kAllAgentKinds) {
        Contract c = make_contract(k, tier);
        m[c.name] = std::move(c);
    }
    return m;
}

struct SwarmOptions {
    std::map<std::string, Contract> registry = default_registry();
    int max_attempts = 2;
    InterventionHook hook;                 // may return RetryDifferent / Replan
    std::function<bool()> cancelled;       // polled at round boundaries
    bool concurrent_reads = true;
    std::uint64_t wall_clock_ms = 0;       // per attempt; 0 disables wall-clock timeouts
    std::string replan_text;               // pipeline text used when a hook asks to replan
    std::function<void(const std::string&, bool)> attempt_probe;  // (task, started)
};

namespace detail {

inline std::uint64_t steady_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

}  // namespace detail

// Executes a task DAG under a swarm-level budget. Per round: cascade-skip
// tasks with failed dependencies, gate and dispatch every runnable read-only
// task concurrently, then at most one write-capable task. Artifact hand-offs
// charge the swarm tracker's handoff component on first dispatch only;
// retries charge the retry component of both the task tracker and the swarm
// tracker.
inline SwarmRunReport run_swarm(std::vector<SwarmTask> tasks, const BudgetVector& swarm_budget,
                                const SwarmOptions& opts = {}) {
    SwarmRunReport rep;
    TaskDag dag = build_dag(std::move(tasks));

    std::mutex mu;  // guards rep.trail across concurrent attempts
    std::uint64_t seq = 0;
    auto trail = [&](const std::string& task, const std::string& event, const std::string& detail) {
        std::lock_guard<std::mutex> lk(mu);
        rep.trail.push_back({seq++, detail::steady_ns(), task, event, detail});
    };

    // Budget conservation pre-check over the implied delegation forest.
    {
        DelegationForest forest;
        DelegationNode root;
        root.id = "swarm-root";
        root.budget = swarm_budget;
        for (const auto& t : dag.tasks) root.children.push_back(t.id);
        forest.push_back(root);
        for (const auto& t : dag.tasks) {
            DelegationNode n;
            n.id = t.id;
            n.budget = t.contract.budget;
            forest.push_back(n);
        }
        rep.pre_check = verify_conservation(forest);
        for (const auto& t : dag.tasks) {
            rep.outcomes[t.id].task_id = t.id;
        }
        if (!rep.pre_check.ok) {
            trail("", "pre_check_refused",
                  std::to_string(rep.pre_check.violations.size()) + " budget violation(s)");
            rep.status = SwarmStatus::Failed;
            for (auto& [id, o] : rep.outcomes) o.final_state = TaskFinal::Skipped;
            return rep;
        }
        trail("", "pre_check_ok", "conservation verified");
    }

    BudgetTracker swarm_tracker(swarm_budget);
    struct TaskState {
        std::unique_ptr<BudgetTracker> tracker;
        int attempts = 0;
        bool terminal() const { return final != TaskFinal::Pending; }
        TaskFinal final = TaskFinal::Pending;
    };
    std::unordered_map<std::string, TaskState> state;
    for (const auto& t : dag.tasks) {
        state[t.id].tracker = std::make_unique<BudgetTracker>(t.contract.budget);
    }
    std::map<std::string, std::string> artifact_of_task;  // producer task -> artifact id

    auto set_final = [&](const std::string& id, TaskFinal f) {
        state[id].final = f;
        rep.outcomes[id].final_state = f;
    };

    const BudgetVector retry_cost = BudgetVector::of(0, 0, 0, 0, 1, 0);
    std::optional<SwarmStatus> status;
    bool aborted = false;

    while (!status) {
        if (aborted) {
            status = SwarmStatus::Cancelled;
            break;
        }
        ++rep.rounds;
        if (opts.cancelled && opts.cancelled()) {
            trail("", "cancelled", "cancellation requested");
            status = SwarmStatus::Cancelled;
            break;
        }
        if (swarm_tracker.exceeded()) {
            trail("", "swarm_budget_exhausted", swarm_tracker.used().str());
            status = SwarmStatus::BudgetExceeded;
            break;
        }

        // Cascade: a task whose dependency ended in anything but success is
        // skipped, transitively.
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& t : dag.tasks) {
                if (state[t.id].terminal()) continue;
                for (const auto& dep : t.deps) {
                    TaskFinal df = state[dep].final;
                    if (df != TaskFinal::Pending && df != TaskFinal::Success) {
                        set_final(t.id, TaskFinal::Skipped);
                        rep.outcomes[t.id].interventions.push_back("skip");
                        trail(t.id, "skip_cascade", "dependency '" + dep + "' ended " +
                                                        std::string(to_string(df)));
                        changed = true;
                        break;
                    }
                }
            }
        }

        // Runnable = pending with all dependencies succeeded, in topo order.
        std::vector<std::size_t> runnable;
        bool any_pending = false;
        for (std::size_t i : dag.topo) {
            const SwarmTask& t = dag.tasks[i];
            if (state[t.id].terminal()) continue;
            any_pending = true;
            bool ready = true;
            for (const auto& dep : t.deps) ready &= state[dep].final == TaskFinal::Success;
            if (ready) runnable.push_back(i);
        }
        if (runnable.empty()) {
            if (!any_pending) {
                bool all_ok = true;
                for (const auto& t : dag.tasks) all_ok &= state[t.id].final == TaskFinal::Success;
                status = all_ok ? SwarmStatus::Completed : SwarmStatus::Failed;
            } else {
                // Pending tasks but nothing runnable: dependencies can no
                // longer resolve (shouldn't happen after cascade).
                status = SwarmStatus::Failed;
            }
            break;
        }

        std::vector<std::size_t> reads, writes;
        for (std::size_t i : runnable) {
            (kind_can_write(dag.tasks[i].contract.kind) ? writes : reads).push_back(i);
        }
        std::vector<std::size_t> dispatch = reads;
        if (!writes.empty() && reads.empty()) dispatch.push_back(writes.front());

        // Gates + hand-off admission run serially, in topological order.
        std::vector<std::size_t> admitted;
        for (std::size_t i : dispatch) {
            const SwarmTask& t = dag.tasks[i];
            std::vector<const SwarmArtifact*> incoming;
            std::vector<std::string> incoming_ids;
            for (const auto& dep : t.deps) {
                auto it = artifact_of_task.find(dep);
                if (it != artifact_of_task.end()) {
                    incoming.push_back(&rep.artifacts.at(it->second));
                    incoming_ids.push_back(it->second);
                }
            }
            GateReport g = three_gates(t, opts.registry, swarm_tracker, incoming);
            {
                json detail = {{"contract", g.contract_ok},
                               {"budget", g.budget_ok},
                               {"artifacts", g.artifacts_ok},
                               {"notes", g.notes}};
                trail(t.id, "gate_check", detail.dump());
            }
            if (!g.pass()) {
                if (!g.budget_ok) {
                    // The swarm tracker is exhausted; the round loop ends it.
                    trail(t.id, "gate_refused", "budget");
                    continue;
                }
                set_final(t.id, TaskFinal::Failure);
                rep.outcomes[t.id].interventions.push_back("skip");
                trail(t.id, "gate_refused", g.notes.empty() ? "" : g.notes.front());
                continue;
            }
            // Artifacts transfer once; a retry reuses the already-delivered
            // context, so only the first dispatch pays the handoff charge.
            if (!incoming.empty() && state[t.id].attempts == 0) {
                BudgetVector handoff = BudgetVector::zero();
                handoff.v[5] = incoming.size();
                if (!swarm_tracker.admit(handoff)) {
                    set_final(t.id, TaskFinal::BudgetExceeded);
                    rep.outcomes[t.id].interventions.push_back("skip");
                    trail(t.id, "handoff_refused", std::to_string(incoming.size()) + " artifact(s)");
                    continue;
                }
                trail(t.id, "handoff_admit", std::to_string(incoming.size()) + " artifact(s)");
            }
            admitted.push_back(i);
        }

        // Run admitted attempts: reads in parallel, the lone write inline.
        struct Attempt {
            std::size_t task_idx;
            AttemptRecord record;
        };
        std::vector<Attempt> results;
        auto run_one = [&](std::size_t i) {
            const SwarmTask& t = dag.tasks[i];
            Attempt a;
            a.task_idx = i;
            a.record.attempt = state[t.id].attempts + 1;
            if (opts.attempt_probe) opts.attempt_probe(t.id, true);
            a.record.started_ns = detail::steady_ns();
            SubAgentOptions so;
            so.attempt = a.record.attempt;
            so.wall_clock_ms = opts.wall_clock_ms;
            a.record.result = run_subagent(t.contract, t.script, *state[t.id].tracker, so);
            a.record.finished_ns = detail::steady_ns();
            if (opts.attempt_probe) opts.attempt_probe(t.id, false);
            return a;
        };
        if (opts.concurrent_reads && admitted.size() > 1) {
            std::vector<std::future<Attempt>> futs;
            futs.reserve(admitted.size());
            for (std::size_t i : admitted) {
                futs.push_back(std::async(std::launch::async, run_one, i));
            }
            for (auto& f : futs) results.push_back(f.get());
        } else {
            for (std::size_t i : admitted) results.push_back(run_one(i));
        }

        // Merge the batch in dispatch order under one guard.
        std::lock_guard<std::mutex> lk(mu);
        for (auto& a : results) {
            const SwarmTask& t = dag.tasks[a.task_idx];
            TaskState& ts = state[t.id];
            ts.attempts = a.record.attempt;
            TaskOutcome& out = rep.outcomes[t.id];
            out.attempts.push_back(std::move(a.record));
            const AttemptRecord& rec = out.attempts.back();
            const SubAgentResult& res = rec.result;
            out.usage = oplus(out.usage, res.usage);
            rep.trail.push_back({seq++, rec.finished_ns, t.id, "task_result",
                                 std::string(to_string(res.status)) +
                                     (res.category.empty() ? "" : " (" + res.category + ")")});
            if (!swarm_tracker.admit(res.usage)) {
                rep.trail.push_back({seq++, detail::steady_ns(), t.id, "swarm_admit_refused",
                                     res.usage.str()});
            }

            if (res.status == SubAgentStatus::Success) {
                std::vector<std::string> parents;
                for (const auto& dep : t.deps) {
                    auto it = artifact_of_task.find(dep);
                    if (it != artifact_of_task.end()) parents.push_back(it->second);
                }
                SwarmArtifact art = make_artifact(artifact_kind_for(t.contract.kind), t.id,
                                                  res.artifact_payload, std::move(parents));
                out.artifact_id = art.id;
                artifact_of_task[t.id] = art.id;
                rep.trail.push_back({seq++, detail::steady_ns(), t.id, "artifact", art.id});
                rep.artifacts.emplace(art.id, std::move(art));
                set_final(t.id, TaskFinal::Success);
                continue;
            }

            bool can_retry = ts.attempts < opts.max_attempts &&
                             ts.tracker->would_admit(retry_cost) &&
                             swarm_tracker.would_admit(retry_cost);
            std::optional<Intervention> choice;
            if (opts.hook) choice = opts.hook(t, res, can_retry);
            Intervention act = choice.value_or(decide_intervention(res.status, can_retry));
            out.interventions.push_back(to_string(act));
            rep.trail.push_back({seq++, detail::steady_ns(), t.id, "intervention", to_string(act)});

            auto charge_retry = [&]() {
                if (!ts.tracker->admit(retry_cost) || !swarm_tracker.admit(retry_cost)) {
                    rep.trail.push_back(
                        {seq++, detail::steady_ns(), t.id, "retry_refused", "retry budget"});
                    return false;
                }
                out.usage = oplus(out.usage, retry_cost);
                return true;
            };

            switch (act) {
                case Intervention::RetrySame:
                    if (can_retry && charge_retry()) break;  // stays pending; next round reruns
                    set_final(t.id, final_from(res.status));
                    break;
                case Intervention::RetryDifferent: {
                    if (!(can_retry && charge_retry())) {
                        set_final(t.id, final_from(res.status));
                        break;
                    }
                    AgentKind next = next_in_risk_class(t.contract.kind);
                    Contract fresh = make_contract(next);
                    fresh.budget = t.contract.budget;  // same envelope, tracker persists
                    SwarmTask& mt = dag.tasks[a.task_idx];
                    mt.contract = std::move(fresh);
                    mt.script = default_script(next, 2400);
                    rep.trail.push_back({seq++, detail::steady_ns(), t.id, "swap_contract",
                                         to_string(next)});
                    break;
                }
                case Intervention::Replan: {
                    // Rebuild this task from the replan text: same id, fresh
                    // pipeline-derived kind and script, attempts reset.
                    if (opts.replan_text.empty() || !charge_retry()) {
                        set_final(t.id, final_from(res.status));
                        break;
                    }
                    auto kinds = detect_pipeline(opts.replan_text);
                    AgentKind k = kinds.front();
                    SwarmTask& mt = dag.tasks[a.task_idx];
                    Contract fresh = make_contract(k);
                    fresh.budget = t.contract.budget;
                    mt.contract = std::move(fresh);
                    mt.script = default_script(k, 2400);
                    ts.attempts = 0;
                    rep.trail.push_back({seq++, detail::steady_ns(), t.id, "replan", to_string(k)});
                    break;
                }
                case Intervention::Skip:
                    set_final(t.id, final_from(res.status));
                    break;
                case Intervention::Abort:
                    set_final(t.id, final_from(res.status));
                    aborted = true;
                    break;
            }
        }
    }

    for (const auto& t : dag.tasks) {
        if (!state[t.id].terminal()) {
            set_final(t.id, TaskFinal::Skipped);
            trail(t.id, "skip_shutdown", "swarm ended before dispatch");
        }
    }
    rep.swarm_usage = swarm_tracker.used();
    rep.status = *status;
    trail("", "terminal", to_string(rep.status));
    return rep;
}

// --- serialization ---------------------------------------------------------------

inline json to_json(const SubAgentResult& r) {
    return {{"status", to_string(r.status)},
            {"output", r.output},
            {"usage", to_json(r.usage)},
            {"iterations", r.iterations},
            {"tool_calls", r.tool_calls},
            {"violations", r.violations},
            {"category", r.category},
            {"chatty", r.chatty}};
}

inline json to_json(const TaskOutcome& o) {
    json attempts = json::array();
    for (const auto& a : o.attempts) {
        attempts.push_back({{"attempt", a.attempt},
                            {"result", to_json(a.result)},
                            {"started_ns", a.started_ns},
                            {"finished_ns", a.finished_ns}});
    }
    return {{"task", o.task_id},
            {"final", to_string(o.final_state)},
            {"attempts", attempts},
            {"interventions", o.interventions},
            {"artifact", o.artifact_id},
            {"usage", to_json(o.usage)}};
}

inline json to_json(const SwarmRunReport& r) {
    json outcomes = json::object();
    for (const auto& [id, o] : r.outcomes) outcomes[id] = to_json(o);
    json artifacts = json::object();
    for (const auto& [id, a] : r.artifacts) artifacts[id] = to_json(a);
    json trail = json::array();
    for (const auto& e : r.trail) {
        trail.push_back({{"seq", e.seq},
                         {"ts_ns", e.ts_ns},
                         {"task", e.task},
                         {"event", e.event},
                         {"detail", e.detail}});
    }
    return {{"status", to_string(r.status)},
            {"pre_check", to_json(r.pre_check)},
            {"outcomes", outcomes},
            {"artifacts", artifacts},
            {"trail", trail},
            {"swarm_usage", to_json(r.swarm_usage)},
            {"rounds", r.rounds}};
}

}  // namespace rgao
