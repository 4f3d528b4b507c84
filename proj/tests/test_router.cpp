// Complexity extraction from retrieval results and the threshold router,
// plus the keyword-table baseline it is evaluated against.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rgao/router.hpp"
#include "rgao/synth.hpp"

using namespace rgao;

namespace {

void write_text(const std::filesystem::path& file, const std::string& content) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

std::vector<std::string> all_symbol_ids(const CodeIndexTree& tree) {
    std::vector<std::string> out;
    for (const auto& n : tree.nodes()) {
        if (n.kind == NodeKind::Symbol) out.push_back(n.id);
    }
    return out;
}

ComplexityVector cv(std::uint32_t d, std::uint32_t f, std::uint32_t s, std::uint32_t h,
                    double x) {
    return ComplexityVector{d, f, s, h, x};
}

}  // namespace

TEST_CASE("a three-symbol call chain in one file extracts depth 2") {
    TempDir dir;
    write_text(dir.path() / "chain.py", R"(def low():
    pass

def mid():
    low()

def high():
    mid()
)");
    CodeIndexTree tree = build_index(dir.path().string());
    auto c = extract_complexity(tree, all_symbol_ids(tree));
    CHECK(c.dependency_depth == 2);  // high -> mid -> low, counted in edges
    CHECK(c.file_count == 1);
    CHECK(c.symbol_count == 3);
    CHECK(c.tree_height == 2);  // root / file / symbol
    CHECK(c.cross_ratio == 0.0);
}

TEST_CASE("a cross-directory call makes half the symbols crossing") {
    TempDir dir;
    write_text(dir.path() / "a" / "one.py", R"(def caller():
    helper()
)");
    write_text(dir.path() / "b" / "two.py", R"(def helper():
    pass
)");
    CodeIndexTree tree = build_index(dir.path().string());
    auto c = extract_complexity(tree, all_symbol_ids(tree));
    CHECK(c.symbol_count == 2);
    CHECK(c.file_count == 2);
    CHECK(c.cross_ratio == 0.5);  // only the caller has a cross-directory edge
    CHECK(c.dependency_depth == 1);
    CHECK(c.tree_height == 3);
}

TEST_CASE("extraction edge cases") {
    TempDir dir;
    write_text(dir.path() / "x.py", "def f():\n    pass\n");
    CodeIndexTree tree = build_index(dir.path().string());

    SECTION("empty id set extracts zeros") {
        auto c = extract_complexity(tree, std::vector<std::string>{});
        CHECK(c.dependency_depth == 0);
        CHECK(c.file_count == 0);
        CHECK(c.symbol_count == 0);
        CHECK(c.tree_height == 0);
        CHECK(c.cross_ratio == 0.0);
    }
    SECTION("unknown ids are an error") {
        CHECK_THROWS_AS(extract_complexity(tree, std::vector<std::string>{"ghost"}),
                        std::invalid_argument);
    }
    SECTION("file ids count toward the file span") {
        auto c = extract_complexity(tree, std::vector<std::string>{"x.py"});
        CHECK(c.file_count == 1);
        CHECK(c.symbol_count == 0);
        CHECK(c.tree_height == 1);
    }
    SECTION("a symbol and its own file do not double-count the file") {
        auto ids = all_symbol_ids(tree);
        ids.push_back("x.py");
        auto c = extract_complexity(tree, ids);
        CHECK(c.file_count == 1);
        CHECK(c.symbol_count == 1);
    }
    SECTION("a retrieval result extracts the same vector as its id list") {
        RetrievalResult r;
        for (const auto& id : all_symbol_ids(tree)) {
            RetrievedItem item;
            item.id = id;
            r.items.push_back(item);
        }
        auto from_result = extract_complexity(tree, r);
        auto from_ids = extract_complexity(tree, all_symbol_ids(tree));
        CHECK(from_result.symbol_count == from_ids.symbol_count);
        CHECK(from_result.dependency_depth == from_ids.dependency_depth);
    }
}

TEST_CASE("the router applies its rules in order") {
    SECTION("narrow single-file work fast-paths") {
        // One root-level file, two symbols: aggregate 1/8 + 1/12 + 2/60 + 2/10 ≈ 0.44.
        auto d = route(cv(1, 1, 2, 2, 0.0), 0.1);
        CHECK(d.topology == Topology::FastPath);
        CHECK(d.mode == MultiAgentMode::None);
        CHECK(d.triggered == std::vector<std::string>{"fast_path_narrow"});
        CHECK(d.aggregate < 0.45);
    }
    SECTION("one directory level deeper tips the same shape past the ceiling") {
        auto d = route(cv(1, 1, 2, 3, 0.0), 0.1);
        CHECK(d.aggregate > 0.45);
        CHECK(d.topology == Topology::SubAgent);
        CHECK(d.triggered == std::vector<std::string>{"sub_agent_default"});
    }
    SECTION("wide, coupled work fans out into a swarm") {
        auto d = route(cv(4, 6, 18, 4, 0.8), 0.2);
        CHECK(d.topology == Topology::MultiAgent);
        CHECK(d.mode == MultiAgentMode::Swarm);
        REQUIRE(d.triggered.size() == 3);
        CHECK(d.triggered[0] == "multi_agent_files");
        CHECK(d.triggered[1] == "multi_agent_aggregate");
        CHECK(d.triggered[2] == "mode_swarm_cross");
    }
    SECTION("high ambiguity escalates to research regardless of complexity") {
        for (const auto& c : {cv(0, 0, 0, 0, 0.0), cv(8, 12, 60, 10, 1.0)}) {
            auto d = route(c, 0.9);
            CHECK(d.topology == Topology::DeepResearch);
            CHECK(d.triggered == std::vector<std::string>{"research_ambiguity"});
        }
        CHECK(route(cv(1, 1, 2, 2, 0.0), 0.70).topology == Topology::DeepResearch);
        CHECK(route(cv(1, 1, 2, 2, 0.0), 0.69).topology == Topology::FastPath);
    }
    SECTION("low cross ratio picks the pipeline mode") {
        auto d = route(cv(2, 5, 10, 4, 0.2), 0.1);
        CHECK(d.topology == Topology::MultiAgent);
        CHECK(d.mode == MultiAgentMode::Pipeline);
        CHECK(d.triggered.back() == "mode_pipeline_cross");
        CHECK(route(cv(2, 5, 10, 4, 0.5), 0.1).mode == MultiAgentMode::Swarm);
    }
    SECTION("aggregate alone can force fan-out") {
        auto d = route(cv(8, 2, 50, 9, 0.0), 0.1);  // 1.0 + .17 + .83 + .9 = 2.9
        CHECK(d.topology == Topology::MultiAgent);
        CHECK(d.triggered[0] == "multi_agent_aggregate");
    }
}

TEST_CASE("sub-agent promotions fire on breadth, depth, and risk") {
    SECTION("breadth") {
        // 8 files would normally trip multi_agent_files; use a raised config.
        RouterConfig cfg;
        cfg.multi_agent_files = 100;
        auto d = route(cv(0, 8, 2, 1, 0.0), 0.1, cfg);  // files 8/12 = 0.67 >= 0.60
        CHECK(d.topology == Topology::MultiAgent);
        REQUIRE(d.triggered.size() >= 2);
        CHECK(d.triggered[0] == "sub_agent_default");
        CHECK(d.triggered[1] == "promote_breadth");
    }
    SECTION("depth") {
        auto d = route(cv(4, 1, 5, 2, 0.0), 0.1);  // depth 4/8 = 0.5 >= 0.50
        CHECK(d.topology == Topology::MultiAgent);
        CHECK(d.triggered == std::vector<std::string>{"sub_agent_default", "promote_depth",
                                                      "mode_pipeline_cross"});
        CHECK(route(cv(3, 1, 5, 2, 0.0), 0.1).topology == Topology::SubAgent);
    }
    SECTION("modification risk from sensitive paths") {
        auto safe = route(cv(1, 2, 4, 3, 0.0), 0.1, {}, {"src/widgets/button.py"});
        CHECK(safe.topology == Topology::SubAgent);
        CHECK(safe.risk == 0.0);

        auto risky = route(cv(1, 2, 4, 3, 0.0), 0.1, {}, {"src/auth/session.py"});
        CHECK(risky.risk == 1.0);
        CHECK(risky.topology == Topology::MultiAgent);
        CHECK(risky.triggered == std::vector<std::string>{"sub_agent_default", "promote_risk",
                                                          "mode_pipeline_cross"});

        auto migration = route(cv(1, 2, 4, 3, 0.0), 0.1, {}, {"db/MIGRATIONS/0001.sql"});
        CHECK(migration.risk == 1.0);  // pattern match is case-insensitive
    }
    SECTION("several promotions list every trigger") {
        auto d = route(cv(4, 1, 5, 2, 0.0), 0.1, {}, {"security/keys.py"});
        CHECK(d.triggered == std::vector<std::string>{"sub_agent_default", "promote_depth",
                                                      "promote_risk", "mode_pipeline_cross"});
    }
}

TEST_CASE("routing invariants hold over a generated grid") {
    RouterConfig cfg;
    std::set<Topology> seen_topologies;
    std::set<MultiAgentMode> seen_modes;

    for (std::uint32_t d : {0u, 1u, 4u, 9u}) {
        for (std::uint32_t f : {0u, 1u, 3u, 6u, 14u}) {
            for (std::uint32_t s : {0u, 2u, 20u, 70u}) {
                for (std::uint32_t h : {0u, 2u, 5u, 11u}) {
                    for (double x : {0.0, 0.4, 0.6, 1.0}) {
                        for (double amb : {0.0, 0.3, 0.8}) {
                            auto dec = route(cv(d, f, s, h, x), amb, cfg);
                            seen_topologies.insert(dec.topology);
                            if (dec.topology == Topology::MultiAgent) {
                                seen_modes.insert(dec.mode);
                            } else {
                                REQUIRE(dec.mode == MultiAgentMode::None);
                            }
                            REQUIRE_FALSE(dec.triggered.empty());
                            REQUIRE(dec.aggregate >= 0.0);
                            REQUIRE(dec.aggregate <= 5.0);
                            for (double nv : dec.normalized) {
                                REQUIRE(nv >= 0.0);
                                REQUIRE(nv <= 1.0);
                            }
                            if (dec.topology == Topology::FastPath) {
                                REQUIRE(dec.raw.file_count == 1);
                                REQUIRE(dec.raw.cross_ratio == 0.0);
                                REQUIRE(dec.aggregate < cfg.fast_path_ceiling);
                            }
                            // Purity: the same inputs reproduce the decision.
                            auto again = route(cv(d, f, s, h, x), amb, cfg);
                            REQUIRE(again.topology == dec.topology);
                            REQUIRE(again.triggered == dec.triggered);
                            // Ambiguity monotonicity: once research, raising
                            // ambiguity never routes away from research.
                            if (dec.topology == Topology::DeepResearch && amb < 1.0) {
                                auto higher = route(cv(d, f, s, h, x), 1.0, cfg);
                                REQUIRE(higher.topology == Topology::DeepResearch);
                            }
                        }
                    }
                }
            }
        }
    }
    CHECK(seen_topologies.size() == 4);
    CHECK(seen_modes.size() == 2);
}

TEST_CASE("the keyword baseline latches onto surface features") {
    CHECK(regex_route("fix the typo in README") == Topology::SubAgent);
    CHECK(regex_route("investigate flaky test causes") == Topology::DeepResearch);
    CHECK(regex_route("") == Topology::FastPath);

    SECTION("multi-step cues upgrade change verbs") {
        CHECK(regex_route("implement the parser then test it") == Topology::MultiAgent);
        CHECK(regex_route("fix the bug and test the fix") == Topology::MultiAgent);
        CHECK(regex_route("refactor the module pipeline") == Topology::MultiAgent);
        CHECK(regex_route("implement the parser") == Topology::SubAgent);
    }
    SECTION("keywords match on word boundaries only") {
        CHECK(regex_route("prefix the name table") == Topology::FastPath);
        CHECK(regex_route("retest everything") == Topology::FastPath);
        CHECK(regex_route("FIX THE BUILD") == Topology::SubAgent);
    }
    SECTION("rules are evaluated in order, first hit wins") {
        CHECK(regex_route("investigate and fix the crash") == Topology::DeepResearch);
    }
    SECTION("the table itself is data") {
        RegexRuleTable t;
        t.rules = {{"only", {"deploy"}, {}, Topology::MultiAgent}};
        t.fallback = Topology::DeepResearch;
        CHECK(regex_route("deploy it", t) == Topology::MultiAgent);
        CHECK(regex_route("anything else", t) == Topology::DeepResearch);
    }
}

TEST_CASE("router config and rule tables round-trip through JSON") {
    RouterConfig cfg;
    cfg.ambiguity_floor = 0.8;
    cfg.sensitive_patterns = {"payments"};
    RouterConfig back = router_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(back.ambiguity_floor == 0.8);
    CHECK(back.sensitive_patterns == std::vector<std::string>{"payments"});

    SECTION("missing keys keep defaults") {
        RouterConfig partial = router_config_from_json(json{{"fast_path_ceiling", 0.5}});
        CHECK(partial.fast_path_ceiling == 0.5);
        CHECK(partial.multi_agent_floor == 1.05);
        CHECK(partial.sensitive_patterns ==
              std::vector<std::string>{"auth", "security", "migrations"});
    }
    SECTION("default rule table survives the round trip") {
        auto t = default_regex_rules();
        auto back_t = regex_rules_from_json(to_json(t));
        CHECK(to_json(back_t) == to_json(t));
        CHECK(back_t.rules.size() == 3);
        CHECK(back_t.fallback == Topology::FastPath);
    }
    SECTION("other rule-table versions are rejected") {
        json j = to_json(default_regex_rules());
        j["version"] = kRegexRulesVersion + 1;
        CHECK_THROWS_AS(regex_rules_from_json(j), std::invalid_argument);
    }
}

TEST_CASE("routing decisions serialize with the full audit record") {
    auto d = route(cv(4, 6, 18, 4, 0.8), 0.2, {}, {"auth/token.py"});
    json j = to_json(d);
    CHECK(j["topology"] == "multi_agent");
    CHECK(j["mode"] == "swarm");
    CHECK(j["complexity"]["file_count"] == 6);
    CHECK(j["triggered"].is_array());
    CHECK(j["normalized"].size() == 5);
    CHECK(j.contains("aggregate"));
    CHECK(j.contains("risk"));
}
