#pragma once

// Sub-agent contracts: instructions, completion predicate, tool allowance,
// and model binding, plus the budget tier presets and the risk lattice that
// gates tool access. Everything here is pure data + pure functions so
// contracts can be serialized, diffed, and replayed.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgao/budget.hpp"
#include "rgao/common.hpp"

namespace rgao {

class no_feasible_model_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Four-tier risk lattice, ordered read_only < internal < write < execute.
enum class RiskTier : std::uint8_t { ReadOnly = 0, Internal = 1, Write = 2, Execute = 3 };

inline const char* to_string(RiskTier t) {
    switch (t) {
        case RiskTier::ReadOnly: return "read_only";
        case RiskTier::Internal: return "internal";
        case RiskTier::Write: return "write";
        case RiskTier::Execute: return "execute";
    }
    return "read_only";
}

inline RiskTier risk_from_string(const std::string& s) {
    if (s == "read_only") return RiskTier::ReadOnly;
    if (s == "internal") return RiskTier::Internal;
    if (s == "write") return RiskTier::Write;
    if (s == "execute") return RiskTier::Execute;
    throw std::invalid_argument("unknown risk tier '" + s + "'");
}

inline bool risk_leq(RiskTier a, RiskTier b) {
    return static_cast<std::uint8_t>(a) <= static_cast<std::uint8_t>(b);
}

enum class OutputFormat : std::uint8_t { Text = 0, Json = 1 };

inline const char* to_string(OutputFormat f) {
    return f == OutputFormat::Json ? "json" : "text";
}

// Sentinel for "no issue-count limit".
inline constexpr std::uint64_t kNoIssueLimit = std::numeric_limits<std::uint64_t>::max();

// Completion predicate: keyword screens, ordered validation stages, expected
// output format, and an optional cap on reported issues (JSON outputs only).
struct CompletionPredicate {
    std::vector<std::string> rejection_keywords;   // any present => violation
    std::vector<std::string> acceptance_keywords;  // any missing => violation
    std::vector<std::string> stages = {"rejection_keywords", "acceptance_keywords",
                                       "format", "issue_limit"};
    OutputFormat format = OutputFormat::Text;
    std::uint64_t max_issues = kNoIssueLimit;

    bool operator==(const CompletionPredicate&) const = default;
};

struct SimulatedModel {
    std::string name;
    std::uint64_t context_window = 0;            // tokens
    std::map<std::string, double> strength;      // task kind -> relative score

    bool operator==(const SimulatedModel&) const = default;
};

enum class AgentKind : std::uint8_t { Coder, Researcher, Planner, Tester, Reviewer, Diagnostician };

inline const char* to_string(AgentKind k) {
    switch (k) {
        case AgentKind::Coder: return "coder";
        case AgentKind::Researcher: return "researcher";
        case AgentKind::Planner: return "planner";
        case AgentKind::Tester: return "tester";
        case AgentKind::Reviewer: return "reviewer";
        case AgentKind::Diagnostician: return "diagnostician";
    }
    return "coder";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
    if (s == "coder") return AgentKind::Coder;
    if (s == "researcher") return AgentKind::Researcher;
    if (s == "planner") return AgentKind::Planner;
    if (s == "tester") return AgentKind::Tester;
    if (s == "reviewer") return AgentKind::Reviewer;
    if (s == "diagnostician") return AgentKind::Diagnostician;
    throw std::invalid_argument("unknown agent kind '" + s + "'");
}

inline constexpr std::array<AgentKind, 6> kAllAgentKinds = {
    AgentKind::Coder,  AgentKind::Researcher, AgentKind::Planner,
    AgentKind::Tester, AgentKind::Reviewer,   AgentKind::Diagnostician};

// A contract binds instructions, completion predicate, tool allowance and a
// model choice, with a budget tier and context allowance attached.
struct Contract {
    std::string name;                 // e.g. "coder"
    AgentKind kind = AgentKind::Coder;
    std::string instructions;
    CompletionPredicate completion;
    std::vector<std::string> tools;   // requested tool names (catalog-gated)
    SimulatedModel model;
    BudgetVector budget;
    double context_fraction = 0.5;    // in (0, 1]
    RiskTier max_risk = RiskTier::Internal;

    bool operator==(const Contract&) const = default;
};

enum class BudgetTier : std::uint8_t { Tight, Standard, Generous };

inline const char* to_string(BudgetTier t) {
    switch (t) {
        case BudgetTier::Tight: return "tight";
        case BudgetTier::Standard: return "standard";
        case BudgetTier::Generous: return "generous";
    }
    return "standard";
}

inline BudgetTier tier_from_string(const std::string& s) {
    if (s == "tight") return BudgetTier::Tight;
    if (s == "standard") return BudgetTier::Standard;
    if (s == "generous") return BudgetTier::Generous;
    throw std::invalid_argument("unknown budget tier '" + s + "'");
}

inline BudgetVector preset_budget(BudgetTier tier) {
    switch (tier) {
        case BudgetTier::Tight: return BudgetVector::of(5, 15, 10000, 30, 1, 0);
        case BudgetTier::Standard: return BudgetVector::of(15, 50, 100000, 120, 2, 1);
        case BudgetTier::Generous: return BudgetVector::of(30, 100, 500000, 300, 5, 3);
    }
    return BudgetVector::of(15, 50, 100000, 120, 2, 1);
}

struct ToolSpec {
    std::string name;
    RiskTier risk = RiskTier::ReadOnly;

    bool operator==(const ToolSpec&) const = default;
};

// Catalog of simulated tools; contracts request by name, the filter gates by
// tier. Names are stable identifiers used by agent scripts.
inline const std::vector<ToolSpec>& default_tool_catalog() {
    static const std::vector<ToolSpec> catalog = {
        {"read_file", RiskTier::ReadOnly},   {"search_code", RiskTier::ReadOnly},
        {"list_directory", RiskTier::ReadOnly}, {"fetch_summary", RiskTier::ReadOnly},
        {"take_notes", RiskTier::Internal},  {"draft_plan", RiskTier::Internal},
        {"annotate", RiskTier::Internal},
        {"write_file", RiskTier::Write},     {"apply_patch", RiskTier::Write},
        {"run_tests", RiskTier::Execute},    {"run_command", RiskTier::Execute},
    };
    return catalog;
}

struct ToolFilterResult {
    std::vector<ToolSpec> allowed;     // catalog order preserved per request order
    std::vector<std::string> dropped;  // requested but above the risk ceiling
    std::vector<std::string> warnings; // unknown tool names
};

// Drops requested tools above `max_risk`; unknown names become warnings, not
// errors, so a contract with a stale tool list still runs with what is left.
inline ToolFilterResult filter_tools(const std::vector<std::string>& requested,
                                     RiskTier max_risk,
                                     const std::vector<ToolSpec>& catalog = default_tool_catalog()) {
    ToolFilterResult out;
    for (const auto& name : requested) {
        auto it = std::find_if(catalog.begin(), catalog.end(),
                               [&](const ToolSpec& t) { return t.name == name; });
        if (it == catalog.end()) {
            out.warnings.push_back("unknown tool '" + name + "'");
            continue;
        }
        if (!risk_leq(it->risk, max_risk)) {
            out.dropped.push_back(name);
            continue;
        }
        out.allowed.push_back(*it);
    }
    return out;
}

// Simulated model catalog. Strength scores are relative quality per task
// kind; context windows are hard capacity limits.
inline const std::vector<SimulatedModel>& default_model_catalog() {
    static const std::vector<SimulatedModel> catalog = [] {
        std::vector<SimulatedModel> m;
        auto add = [&m](std::string name, std::uint64_t cw, double coder, double researcher,
                        double planner, double tester, double reviewer, double diagnostician) {
            m.push_back({std::move(name), cw,
                         {{"coder", coder}, {"researcher", researcher}, {"planner", planner},
                          {"tester", tester}, {"reviewer", reviewer}, {"diagnostician", diagnostician}}});
        };
        add("atlas-200k", 200000, 0.92, 0.90, 0.93, 0.88, 0.91, 0.90);
        add("apex-32k", 32000, 0.85, 0.80, 0.78, 0.82, 0.84, 0.86);
        add("scout-8k", 8000, 0.55, 0.70, 0.52, 0.60, 0.58, 0.54);
        return m;
    }();
    return catalog;
}

// Picks the strongest model for the contract's task kind among those whose
// context window fits the token estimate. Deterministic: strength argmax,
// ties broken by lexicographically smaller name.
inline SimulatedModel route_model(const Contract& contract, std::uint64_t estimated_tokens,
                                  const std::vector<SimulatedModel>& models = default_model_catalog()) {
    const std::string kind = to_string(contract.kind);
    const SimulatedModel* best = nullptr;
    double best_strength = -1.0;
    for (const auto& m : models) {
        if (m.context_window < estimated_tokens) continue;
        auto it = m.strength.find(kind);
        double s = it == m.strength.end() ? 0.0 : it->second;
        if (best == nullptr || s > best_strength ||
            (s == best_strength && m.name < best->name)) {
            best = &m;
            best_strength = s;
        }
    }
    if (best == nullptr) {
        throw no_feasible_model_error("no model with a context window >= " +
                                      std::to_string(estimated_tokens) + " tokens for '" +
                                      kind + "'");
    }
    return *best;
}

struct ValidationResult {
    bool ok = true;
    std::vector<std::string> violations;
    std::vector<std::string> warnings;  // e.g. unknown validation stage names
};

// Checks an output against the contract's completion predicate, running the
// declared stages in order and collecting every violation (no short-circuit).
// A predicate with no keywords, text format and no issue cap accepts anything.
inline ValidationResult validate_output(const Contract& contract, const std::string& output) {
    ValidationResult result;
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    };
    const std::string haystack = lower(output);
    const auto& kappa = contract.completion;

    for (const auto& stage : kappa.stages) {
        if (stage == "rejection_keywords") {
            for (const auto& kw : kappa.rejection_keywords) {
                if (!kw.empty() && haystack.find(lower(kw)) != std::string::npos) {
                    result.violations.push_back("rejection keyword '" + kw + "' present");
                }
            }
        } else if (stage == "acceptance_keywords") {
            for (const auto& kw : kappa.acceptance_keywords) {
                if (kw.empty() || haystack.find(lower(kw)) == std::string::npos) {
                    result.violations.push_back("acceptance keyword '" + kw + "' missing");
                }
            }
        } else if (stage == "format") {
            if (kappa.format == OutputFormat::Json) {
                json parsed = json::parse(output, nullptr, /*allow_exceptions=*/false);
                if (parsed.is_discarded()) {
                    result.violations.push_back("output is not valid JSON");
                }
            }
        } else if (stage == "issue_limit") {
            if (kappa.format == OutputFormat::Json && kappa.max_issues != kNoIssueLimit) {
                json parsed = json::parse(output, nullptr, /*allow_exceptions=*/false);
                if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("issues") &&
                    parsed["issues"].is_array() && parsed["issues"].size() > kappa.max_issues) {
                    result.violations.push_back(
                        "issues listed (" + std::to_string(parsed["issues"].size()) +
                        ") exceed the limit of " + std::to_string(kappa.max_issues));
                }
            }
        } else {
            result.warnings.push_back("unknown validation stage '" + stage + "'");
        }
    }
    result.ok = result.violations.empty();
    return result;
}

// Factory for the six standard agent contracts. The diagnostician gets the
// execute ceiling but requests no write-tier tools, so it can read, reason
// and run things without being able to edit the tree.
inline Contract make_contract(AgentKind kind, BudgetTier tier = BudgetTier::Standard) {
    Contract c;
    c.kind = kind;
    c.name = to_string(kind);
    c.budget = preset_budget(tier);
    switch (kind) {
        case AgentKind::Coder:
            c.instructions = "Implement the requested change; keep the diff minimal and report what was edited.";
            c.tools = {"read_file", "search_code", "apply_patch", "write_file", "run_tests"};
            c.max_risk = RiskTier::Execute;
            c.context_fraction = 0.6;
            c.completion.rejection_keywords = {"cannot", "gave up"};
            c.completion.acceptance_keywords = {"done"};
            break;
        case AgentKind::Researcher:
            c.instructions = "Survey the code relevant to the task and summarize findings with file references.";
            c.tools = {"read_file", "search_code", "list_directory", "fetch_summary", "take_notes"};
            c.max_risk = RiskTier::Internal;
            c.context_fraction = 0.4;
            c.completion.acceptance_keywords = {"findings"};
            break;
        case AgentKind::Planner:
            c.instructions = "Break the task into ordered steps with explicit file targets per step.";
            c.tools = {"read_file", "search_code", "draft_plan", "take_notes"};
            c.max_risk = RiskTier::Internal;
            c.context_fraction = 0.4;
            c.completion.acceptance_keywords = {"plan"};
            break;
        case AgentKind::Tester:
            c.instructions = "Exercise the change and report results as JSON with an 'issues' array.";
            c.tools = {"read_file", "search_code", "write_file", "annotate"};
            c.max_risk = RiskTier::Write;
            c.context_fraction = 0.5;
            c.completion.format = OutputFormat::Json;
            break;
        case AgentKind::Reviewer:
            c.instructions = "Review the diff for defects; emit JSON with an 'issues' array, most severe first.";
            c.tools = {"read_file", "search_code", "fetch_summary", "annotate"};
            c.max_risk = RiskTier::Internal;
            c.context_fraction = 0.5;
            c.completion.format = OutputFormat::Json;
            c.completion.max_issues = 3;
            break;
        case AgentKind::Diagnostician:
            c.instructions = "Reproduce the failure, isolate the cause and report the smallest failing case.";
            c.tools = {"read_file", "search_code", "list_directory", "take_notes", "run_tests", "run_command"};
            c.max_risk = RiskTier::Execute;
            c.context_fraction = 0.5;
            c.completion.acceptance_keywords = {"cause"};
            break;
    }
    // Route with the per-iteration working set, not the whole-run token
    // budget: the context window must hold one step's material, while the
    // budget caps total spend across all iterations.
    c.model = route_model(c, c.budget.tokens() / std::max<std::uint64_t>(1, c.budget.iterations()));
    return c;
}

inline json to_json(const SimulatedModel& m) {
    return {{"name", m.name}, {"context_window", m.context_window}, {"strength", m.strength}};
}

inline SimulatedModel model_from_json(const json& j) {
    SimulatedModel m;
    m.name = j.at("name").get<std::string>();
    m.context_window = j.at("context_window").get<std::uint64_t>();
    if (j.contains("strength")) m.strength = j["strength"].get<std::map<std::string, double>>();
    return m;
}

inline json to_json(const Contract& c) {
    return {{"name", c.name},
            {"kind", to_string(c.kind)},
            {"instructions", c.instructions},
            {"completion",
             {{"rejection_keywords", c.completion.rejection_keywords},
              {"acceptance_keywords", c.completion.acceptance_keywords},
              {"stages", c.completion.stages},
              {"format", to_string(c.completion.format)},
              {"max_issues", c.completion.max_issues}}},
            {"tools", c.tools},
            {"model", to_json(c.model)},
            {"budget", to_json(c.budget)},
            {"context_fraction", c.context_fraction},
            {"max_risk", to_string(c.max_risk)}};
}

inline Contract contract_from_json(const json& j) {
    Contract c;
    c.name = j.at("name").get<std::string>();
    c.kind = agent_kind_from_string(j.at("kind").get<std::string>());
    c.instructions = j.at("instructions").get<std::string>();
    const json& k = j.at("completion");
    c.completion.rejection_keywords = k.at("rejection_keywords").get<std::vector<std::string>>();
    c.completion.acceptance_keywords = k.at("acceptance_keywords").get<std::vector<std::string>>();
    c.completion.stages = k.at("stages").get<std::vector<std::string>>();
    c.completion.format = k.at("format").get<std::string>() == "json" ? OutputFormat::Json
                                                                      : OutputFormat::Text;
    c.completion.max_issues = k.at("max_issues").get<std::uint64_t>();
    c.tools = j.at("tools").get<std::vector<std::string>>();
    c.model = model_from_json(j.at("model"));
    c.budget = budget_from_json(j.at("budget"));
    c.context_fraction = j.at("context_fraction").get<double>();
    c.max_risk = risk_from_string(j.at("max_risk").get<std::string>());
    return c;
}

}  // namespace rgao
