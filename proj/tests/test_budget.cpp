// Budget vectors, the composition algebra, runtime trackers, and the static
// conservation verifier over delegation forests.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <limits>
#include <thread>

#include "rgao/budget.hpp"
#include "support/helpers.hpp"

using namespace rgao;

namespace {

const BudgetVector kTight = BudgetVector::of(5, 15, 10000, 30, 1, 0);
const BudgetVector kStandard = BudgetVector::of(15, 50, 100000, 120, 2, 1);
const BudgetVector kThird = BudgetVector::of(10, 35, 50000, 60, 2, 1);
const BudgetVector kRoot = BudgetVector::of(30, 100, 500000, 300, 5, 3);

DelegationForest delegation_tree_fixture() {
    DelegationForest f;
    f.push_back({"root", kRoot, BudgetVector::zero(), {"researcher", "coder", "tester"}});
    f.push_back({"researcher", kTight, BudgetVector::zero(), {}});
    f.push_back({"coder", kStandard, BudgetVector::zero(), {}});
    f.push_back({"tester", kThird, BudgetVector::zero(), {}});
    return f;
}

}  // namespace

TEST_CASE("component order is fixed and accessors match it") {
    BudgetVector b = BudgetVector::of(1, 2, 3, 4, 5, 6);
    CHECK(b.iterations() == 1);
    CHECK(b.tool_calls() == 2);
    CHECK(b.tokens() == 3);
    CHECK(b.seconds() == 4);
    CHECK(b.retries() == 5);
    CHECK(b.handoffs() == 6);
    CHECK(b.str() == "(1,2,3,4,5,6)");
    CHECK(std::string(kBudgetDimNames[0]) == "iterations");
    CHECK(std::string(kBudgetDimNames[2]) == "tokens");
    CHECK(std::string(kBudgetDimNames[5]) == "handoffs");
}

TEST_CASE("oplus sums component-wise") {
    CHECK(oplus(oplus(kTight, kStandard), kThird) ==
          BudgetVector::of(30, 100, 160000, 210, 5, 2));
    BudgetVector x = BudgetVector::of(9, 8, 7, 6, 5, 4);
    CHECK(oplus(BudgetVector::zero(), x) == x);
    CHECK(oplus(BudgetVector::of(1, 2, 3, 4, 5, 6), BudgetVector::of(6, 5, 4, 3, 2, 1)) ==
          BudgetVector::of(7, 7, 7, 7, 7, 7));
}

TEST_CASE("oplus is commutative, associative, and monotone under leq") {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        BudgetVector a = testsupport::random_budget(rng, 1'000'000);
        BudgetVector b = testsupport::random_budget(rng, 1'000'000);
        BudgetVector c = testsupport::random_budget(rng, 1'000'000);
        REQUIRE(oplus(a, b) == oplus(b, a));
        REQUIRE(oplus(oplus(a, b), c) == oplus(a, oplus(b, c)));
        REQUIRE(oplus(a, BudgetVector::zero()) == a);
        if (leq(a, b)) {
            REQUIRE(leq(oplus(a, c), oplus(b, c)));
            REQUIRE(leq(oplus(c, a), oplus(c, b)));
        }
    }
}

TEST_CASE("oplus overflow throws instead of wrapping") {
    BudgetVector top = BudgetVector::zero();
    top.v[2] = std::numeric_limits<std::uint64_t>::max();
    BudgetVector one = BudgetVector::of(0, 0, 1, 0, 0, 0);
    CHECK_THROWS_AS(oplus(top, one), budget_overflow_error);
    CHECK_THROWS_WITH(oplus(top, one), Catch::Matchers::ContainsSubstring("tokens"));
}

TEST_CASE("leq is the component-wise partial order") {
    CHECK(leq(BudgetVector::of(30, 100, 160000, 210, 5, 2), kRoot));
    CHECK_FALSE(leq(BudgetVector::of(1, 0, 0, 0, 0, 0), BudgetVector::of(0, 9, 9, 9, 9, 9)));

    Rng rng(13);
    for (int t = 0; t < 300; ++t) {
        BudgetVector a = testsupport::random_budget(rng, 40);
        BudgetVector b = testsupport::random_budget(rng, 40);
        BudgetVector c = testsupport::random_budget(rng, 40);
        REQUIRE(leq(a, a));
        if (leq(a, b) && leq(b, a)) REQUIRE(a == b);
        if (leq(a, b) && leq(b, c)) REQUIRE(leq(a, c));
    }
}

TEST_CASE("sequential composition is the same sum as parallel composition") {
    CHECK(otimes_sequential(BudgetVector::of(1, 1, 1, 1, 1, 1),
                            BudgetVector::of(2, 2, 2, 2, 2, 2)) ==
          BudgetVector::of(3, 3, 3, 3, 3, 3));
    BudgetVector x = BudgetVector::of(4, 0, 9, 1, 0, 2);
    CHECK(otimes_sequential(BudgetVector::zero(), x) == x);
    CHECK(otimes_sequential(otimes_sequential(kTight, kStandard), kThird) ==
          oplus(oplus(kTight, kStandard), kThird));
}

TEST_CASE("tracker refuses a cost that would reach any limit component") {
    BudgetTracker t(BudgetVector::of(2, 9, 9, 9, 9, 9));
    const BudgetVector unit_iter = BudgetVector::of(1, 0, 0, 0, 0, 0);
    CHECK(t.admit(unit_iter));  // used (1,0,0,0,0,0)
    CHECK_FALSE(t.admit(unit_iter));  // 1 + 1 reaches the limit of 2
    CHECK(t.used() == BudgetVector::of(1, 0, 0, 0, 0, 0));
    CHECK(t.exceeded());
}

TEST_CASE("tight tier admits four unit iterations before the refusal latches") {
    BudgetTracker t(BudgetVector::of(5, 15, 10000, 30, 1, 0));
    const BudgetVector unit_iter = BudgetVector::of(1, 0, 0, 0, 0, 0);
    for (int i = 0; i < 4; ++i) REQUIRE(t.admit(unit_iter));
    CHECK_FALSE(t.exceeded());
    CHECK_FALSE(t.admit(unit_iter));  // 4 + 1 reaches 5
    CHECK(t.exceeded());
    CHECK(t.used().iterations() == 4);

    SECTION("refusal never mutates usage and the flag stays latched") {
        CHECK_FALSE(t.admit(unit_iter));
        CHECK(t.used().iterations() == 4);
        CHECK(t.exceeded());
    }
    SECTION("an all-zero cost is always admitted without touching usage") {
        BudgetVector before = t.used();
        CHECK(t.admit(BudgetVector::zero()));
        CHECK(t.used() == before);
    }
    SECTION("components with remaining headroom still admit") {
        CHECK(t.admit(BudgetVector::of(0, 0, 100, 0, 0, 0)));
        CHECK(t.used().tokens() == 100);
        CHECK(t.exceeded());  // the earlier refusal is permanent
    }
}

TEST_CASE("would_admit probes without consuming or latching") {
    BudgetTracker t(BudgetVector::of(3, 9, 9, 9, 9, 9));
    CHECK(t.would_admit(BudgetVector::of(2, 0, 0, 0, 0, 0)));
    CHECK_FALSE(t.would_admit(BudgetVector::of(3, 0, 0, 0, 0, 0)));
    CHECK(t.used() == BudgetVector::zero());
    CHECK_FALSE(t.exceeded());
    CHECK(t.admit(BudgetVector::of(2, 0, 0, 0, 0, 0)));
    CHECK_FALSE(t.would_admit(BudgetVector::of(1, 0, 0, 0, 0, 0)));
    CHECK_FALSE(t.exceeded());
}

TEST_CASE("tracker never lets usage reach a positive limit under random costs") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        BudgetVector limit = testsupport::random_budget(rng, 50);
        BudgetTracker t(limit);
        for (int step = 0; step < 60; ++step) {
            (void)t.admit(testsupport::random_budget(rng, 6));
        }
        BudgetVector used = t.used();
        for (std::size_t i = 0; i < kBudgetDims; ++i) {
            REQUIRE(used.v[i] <= limit.v[i]);
            if (limit.v[i] > 0) REQUIRE(used.v[i] < limit.v[i]);
        }
    }
}

TEST_CASE("concurrent admits never over-commit the tracker") {
    BudgetTracker t(BudgetVector::of(1u << 30, 1u << 30, 4000, 1u << 30, 1u << 30, 1u << 30));
    std::atomic<std::uint64_t> admitted{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 8; ++w) {
        workers.emplace_back([&] {
            for (int i = 0; i < 1000; ++i) {
                if (t.admit(BudgetVector::of(0, 0, 1, 0, 0, 0))) ++admitted;
            }
        });
    }
    for (auto& w : workers) w.join();
    CHECK(t.used().tokens() == admitted.load());
    CHECK(t.used().tokens() < 4000);
}

TEST_CASE("delegation tree from the standard tiers verifies cleanly") {
    auto report = verify_conservation(delegation_tree_fixture());
    CHECK(report.ok);
    CHECK(report.violations.empty());
    CHECK(report.nodes_visited == 4);
    CHECK(report.edges_visited == 3);
}

TEST_CASE("raising one child token budget to 500000 breaks the token component") {
    auto forest = delegation_tree_fixture();
    forest[2].budget.v[2] = 500000;  // coder child
    auto report = verify_conservation(forest);
    REQUIRE_FALSE(report.ok);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].node == "root");
    CHECK(report.violations[0].component == 2);
    CHECK(report.violations[0].composed == 560000);
    CHECK(report.violations[0].limit == 500000);
}

TEST_CASE("singleton node with zero direct cost verifies") {
    DelegationForest f = {{"only", kTight, BudgetVector::zero(), {}}};
    CHECK(verify_conservation(f).ok);
}

TEST_CASE("direct cost counts against the node's own budget") {
    DelegationForest f = {{"only", BudgetVector::of(1, 1, 1, 1, 1, 1),
                           BudgetVector::of(0, 0, 2, 0, 0, 0), {}}};
    auto report = verify_conservation(f);
    REQUIRE_FALSE(report.ok);
    CHECK(report.violations[0].component == 2);
    CHECK(report.violations[0].composed == 2);
    CHECK(report.violations[0].limit == 1);
}

TEST_CASE("structural defects throw rather than report") {
    SECTION("duplicate id") {
        DelegationForest f = {{"a", kTight, {}, {}}, {"a", kTight, {}, {}}};
        CHECK_THROWS_AS(verify_conservation(f), forest_error);
    }
    SECTION("dangling child") {
        DelegationForest f = {{"a", kTight, {}, {"ghost"}}};
        CHECK_THROWS_AS(verify_conservation(f), forest_error);
    }
    SECTION("two parents") {
        DelegationForest f = {{"a", kRoot, {}, {"c"}}, {"b", kRoot, {}, {"c"}},
                              {"c", kTight, {}, {}}};
        CHECK_THROWS_AS(verify_conservation(f), forest_error);
    }
    SECTION("self child") {
        DelegationForest f = {{"a", kRoot, {}, {"a"}}};
        CHECK_THROWS_AS(verify_conservation(f), forest_error);
    }
    SECTION("cycle") {
        DelegationForest f = {{"a", kRoot, {}, {"b"}}, {"b", kRoot, {}, {"a"}}};
        CHECK_THROWS_AS(verify_conservation(f), forest_error);
    }
}

TEST_CASE("random conservative forests verify; injected violations are caught") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        auto forest = testsupport::random_valid_forest(rng);
        auto report = verify_conservation(forest);
        REQUIRE(report.ok);
        REQUIRE(report.nodes_visited == forest.size());

        std::string broken = testsupport::violate_forest(rng, forest);
        auto after = verify_conservation(forest);
        REQUIRE_FALSE(after.ok);
        bool found = false;
        for (const auto& v : after.violations) found |= v.node == broken;
        REQUIRE(found);
    }
}

TEST_CASE("compose_parallel joins verified forests under an exact-sum root") {
    SECTION("two singletons") {
        VerifiedForest a = verify({{"a", BudgetVector::of(1, 2, 3, 4, 5, 6), {}, {}}});
        VerifiedForest b = verify({{"b", BudgetVector::of(6, 5, 4, 3, 2, 1), {}, {}}});
        VerifiedForest joined = compose_parallel(a, b);
        REQUIRE(joined.report.ok);
        REQUIRE(joined.forest.size() == 3);
        const DelegationNode& root = joined.forest.back();
        CHECK(root.id == "parallel-root");
        CHECK(root.budget == BudgetVector::of(7, 7, 7, 7, 7, 7));
        CHECK(root.children == std::vector<std::string>{"a", "b"});
        CHECK(verify_conservation(joined.forest).ok);
    }
    SECTION("two delegation trees double the root budget") {
        VerifiedForest a = verify(delegation_tree_fixture());
        auto second = delegation_tree_fixture();
        for (auto& n : second) {
            n.id += "-2";
            for (auto& c : n.children) c += "-2";
        }
        VerifiedForest b = verify(second);
        VerifiedForest joined = compose_parallel(a, b);
        REQUIRE(joined.report.ok);
        CHECK(joined.forest.back().budget == BudgetVector::of(60, 200, 1000000, 600, 10, 6));
        CHECK(verify_conservation(joined.forest).ok);
    }
    SECTION("unverified input is a precondition error") {
        VerifiedForest ok = verify({{"a", kTight, {}, {}}});
        VerifiedForest bad;
        bad.forest = {{"b", BudgetVector::of(1, 1, 1, 1, 1, 1),
                       BudgetVector::of(2, 0, 0, 0, 0, 0), {}}};
        bad.report = verify_conservation(bad.forest);
        REQUIRE_FALSE(bad.report.ok);
        CHECK_THROWS_AS(compose_parallel(ok, bad), std::invalid_argument);
    }
    SECTION("id collisions across the two sides throw") {
        VerifiedForest a = verify({{"a", kTight, {}, {}}});
        VerifiedForest b = verify({{"a", kTight, {}, {}}});
        CHECK_THROWS_AS(compose_parallel(a, b), forest_error);

        VerifiedForest c = verify({{"parallel-root", kTight, {}, {}}});
        CHECK_THROWS_AS(compose_parallel(a, c), forest_error);
        VerifiedForest d = verify({{"b", kTight, {}, {}}});
        CHECK_NOTHROW(compose_parallel(a, d, "custom-root"));
    }
}

TEST_CASE("budget vectors and forests round-trip through JSON") {
    BudgetVector b = BudgetVector::of(5, 15, 10000, 30, 1, 0);
    CHECK(budget_from_json(to_json(b)) == b);
    CHECK(to_json(b).dump() == "[5,15,10000,30,1,0]");

    auto forest = delegation_tree_fixture();
    DelegationForest back = forest_from_json(to_json(forest));
    REQUIRE(back.size() == forest.size());
    for (std::size_t i = 0; i < forest.size(); ++i) {
        CHECK(back[i].id == forest[i].id);
        CHECK(back[i].budget == forest[i].budget);
        CHECK(back[i].direct_cost == forest[i].direct_cost);
        CHECK(back[i].children == forest[i].children);
    }

    SECTION("malformed documents throw forest_error") {
        CHECK_THROWS_AS(budget_from_json(json::array({1, 2, 3})), forest_error);
        CHECK_THROWS_AS(budget_from_json(json::array({1, 2, 3, 4, 5, -6})), forest_error);
        CHECK_THROWS_AS(forest_from_json(json{{"not", "array"}}), forest_error);
        CHECK_THROWS_AS(forest_from_json(json::array({json{{"budget", json::array()}}})),
                        forest_error);
    }
}

TEST_CASE("verification report serializes violations with component names") {
    auto forest = delegation_tree_fixture();
    forest[2].budget.v[2] = 500000;
    json j = to_json(verify_conservation(forest));
    CHECK(j["ok"] == false);
    CHECK(j["violations"][0]["component"] == "tokens");
    CHECK(j["violations"][0]["composed"] == 560000);
    CHECK(j["nodes_visited"] == 4);
}
