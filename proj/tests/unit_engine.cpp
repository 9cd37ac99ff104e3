#include <doctest.h>

#include "splitcp/engine.hpp"
#include "splitcp/oracle.hpp"
#include "testutil.hpp"

using namespace splitcp;

TEST_CASE("propagation of the first queens assignment") {
    Model m = testutil::queens_model(4);
    std::vector<Domain> doms(4, Domain::range(1, 4));
    doms[0] = Domain::of_values({2});
    auto res = propagate(m, doms);
    REQUIRE(res.consistent);
    // alldiff removes 2; the diagonal instances remove 1 and 3
    CHECK(res.domains[1] == Domain::of_values({4}));
    // the cascade pins the whole board to the first solution
    CHECK(res.domains[2] == Domain::of_values({1}));
    CHECK(res.domains[3] == Domain::of_values({3}));
}

TEST_CASE("propagation with no constraints changes nothing") {
    Model m;
    m.vars.push_back({"x", 2, Domain::range(1, 3)});
    std::vector<Domain> doms{Domain::range(1, 3), Domain::of_values({1, 3})};
    auto res = propagate(m, doms);
    REQUIRE(res.consistent);
    CHECK(res.domains == doms);
}

TEST_CASE("forced contradiction wipes out") {
    Model m = parse_model(
        "language Dominion 0.1\n"
        "dim x[2]: int\n"
        "find x[..]: int {1..1}\n"
        "such that\n"
        "c not(ci eq(x[0], x[1]))\n");
    std::vector<Domain> doms{Domain::range(1, 1), Domain::range(1, 1)};
    auto res = propagate(m, doms);
    CHECK(!res.consistent);
    REQUIRE(res.wiped.has_value());
}

TEST_CASE("first solution of 4-queens") {
    Model m = testutil::queens_model(4);
    Outcome out = solve(m, {});
    auto* s = std::get_if<SolutionFound>(&out);
    REQUIRE(s != nullptr);
    CHECK(s->assignment.values == std::vector<std::int64_t>{2, 4, 1, 3});
    CHECK(eval_model(m, s->assignment));
}

TEST_CASE("all solutions of 4-queens in lexicographic order") {
    Model m = testutil::queens_model(4);
    SolveOptions opts;
    opts.mode = SearchMode::All;
    Outcome out = solve(m, opts);
    auto* e = std::get_if<Exhausted>(&out);
    REQUIRE(e != nullptr);
    REQUIRE(e->solutions.size() == 2);
    CHECK(e->solutions[0].values == std::vector<std::int64_t>{2, 4, 1, 3});
    CHECK(e->solutions[1].values == std::vector<std::int64_t>{3, 1, 4, 2});
    for (const auto& a : e->solutions) CHECK(eval_model(m, a));
}

TEST_CASE("zero budget stops before the first decision") {
    Model m = testutil::queens_model(4);
    SolveOptions opts;
    opts.budget = Budget::nodes(0);
    Outcome out = solve(m, opts);
    auto* b = std::get_if<BudgetExhausted>(&out);
    REQUIRE(b != nullptr);
    CHECK(b->path.levels.empty());
    CHECK(b->frontier == VarRef{"queens", 0});
    CHECK(b->frontier_root_domain == Domain::range(1, 4));
    CHECK(b->stats.nodes == 0);
}

TEST_CASE("stop right after the queens[0]=2 decision") {
    // closing the queens[0]=1 subtree costs three decisions; the fourth is
    // the assignment queens[0]=2, taken but not propagated
    Model m = testutil::queens_model(4);
    SolveOptions opts;
    opts.budget = Budget::nodes(4);
    Outcome out = solve(m, opts);
    auto* b = std::get_if<BudgetExhausted>(&out);
    REQUIRE(b != nullptr);
    REQUIRE(b->path.levels.size() == 1);
    CHECK(b->path.levels[0].var == VarRef{"queens", 0});
    CHECK(b->path.levels[0].assigned == 2);
    CHECK(b->path.levels[0].closed == std::vector<std::int64_t>{1});
    CHECK(b->frontier == VarRef{"queens", 1});
    CHECK(b->frontier_root_domain == Domain::range(1, 4));
    CHECK(b->stats.nodes == 4);
}

TEST_CASE("unsatisfiable via contradicting nogoods") {
    Model m = parse_model(
        "language Dominion 0.1\n"
        "dim x[1]: int\n"
        "find x[..]: int {1..2}\n"
        "such that\n"
        "r0 not(r0i eq(x[0], 1))\n"
        "r1 not(r1i eq(x[0], 2))\n");
    SolveOptions opts;
    opts.mode = SearchMode::All;
    Outcome out = solve(m, opts);
    auto* e = std::get_if<Exhausted>(&out);
    REQUIRE(e != nullptr);
    CHECK(e->solutions.empty());
}

TEST_CASE("streaming callbacks fire in discovery order") {
    Model m = testutil::queens_model(4);
    SolveOptions opts;
    opts.mode = SearchMode::All;
    std::vector<Assignment> seen;
    Outcome out = solve_streaming(m, opts, [&](const Assignment& a) {
        seen.push_back(a);
        return true;
    });
    REQUIRE(std::holds_alternative<Exhausted>(out));
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].values == std::vector<std::int64_t>{2, 4, 1, 3});
    CHECK(seen[1].values == std::vector<std::int64_t>{3, 1, 4, 2});

    // First mode: exactly one callback, then the search stops
    seen.clear();
    opts.mode = SearchMode::First;
    out = solve_streaming(m, opts, [&](const Assignment& a) {
        seen.push_back(a);
        return true;
    });
    CHECK(std::holds_alternative<SolutionFound>(out));
    CHECK(seen.size() == 1);

    // budget trip before any solution: zero callbacks
    seen.clear();
    opts.budget = Budget::nodes(2);
    out = solve_streaming(m, opts, [&](const Assignment& a) {
        seen.push_back(a);
        return true;
    });
    CHECK(std::holds_alternative<BudgetExhausted>(out));
    CHECK(seen.empty());

    // a refusing callback aborts with a distinct outcome
    opts.budget = Budget::unbounded();
    opts.mode = SearchMode::All;
    out = solve_streaming(m, opts, [&](const Assignment&) { return false; });
    CHECK(std::holds_alternative<Aborted>(out));
}

TEST_CASE("engine agrees with the oracle on the corpus") {
    for (const auto& m : testutil::corpus(25)) {
        SolveOptions opts;
        opts.mode = SearchMode::All;
        Outcome out = solve(m, opts);
        auto* e = std::get_if<Exhausted>(&out);
        REQUIRE(e != nullptr);
        auto oracle = enumerate_all(m);
        CHECK(testutil::as_set(e->solutions) == testutil::as_set(oracle));
        // identical discovery order under static ordering and ascending values
        CHECK(e->solutions.size() == oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i)
            CHECK(e->solutions[i] == oracle[i]);
        for (const auto& a : e->solutions) CHECK(eval_model(m, a));
    }
}

TEST_CASE("two-way and n-way branching find the same solutions in the same order") {
    for (const auto& m : testutil::corpus(15, 555)) {
        SolveOptions a, b;
        a.mode = b.mode = SearchMode::All;
        a.branching = BranchingScheme::NWay;
        b.branching = BranchingScheme::TwoWay;
        auto ra = std::get<Exhausted>(solve(m, a));
        auto rb = std::get<Exhausted>(solve(m, b));
        CHECK(ra.solutions == rb.solutions);
    }
}

TEST_CASE("disabling propagation changes node counts, never solutions") {
    for (const auto& m : testutil::corpus(8, 777)) {
        SolveOptions with, without;
        with.mode = without.mode = SearchMode::All;
        without.use_propagation = false;
        auto rw = std::get<Exhausted>(solve(m, with));
        auto ro = std::get<Exhausted>(solve(m, without));
        CHECK(rw.solutions == ro.solutions);
    }
    // and the node counts do differ where propagation prunes
    Model q = testutil::queens_model(5);
    SolveOptions with, without;
    with.mode = without.mode = SearchMode::All;
    without.use_propagation = false;
    CHECK(std::get<Exhausted>(solve(q, with)).stats.nodes <
          std::get<Exhausted>(solve(q, without)).stats.nodes);
}

TEST_CASE("negated and conjunction forms agree with the oracle") {
    const char* texts[] = {
        // negated bound: x[0] > 2
        "language Dominion 0.1\n"
        "dim x[2]: int\n"
        "find x[..]: int {1..4}\n"
        "such that\n"
        "a not(a1 leq(x[0], 2))\n"
        "b leq(x[1], add(x[0], -1))\n",
        // negated alldiff: at least one repeated value
        "language Dominion 0.1\n"
        "dim x[3]: int\n"
        "find x[..]: int {1..3}\n"
        "such that\n"
        "a not(a1 alldiff(x[..]))\n"
        "b not(b1 eq(x[0], 3))\n",
        // negated conjunction and double negation
        "language Dominion 0.1\n"
        "dim x[3]: int\n"
        "find x[..]: int {1..3}\n"
        "such that\n"
        "a not(a1 and(a2 eq(x[0], 1), a3 eq(x[1], 1)))\n"
        "b not(b1 not(b2 leq(x[2], 2)))\n"
        "c and(c1 leq(1, x[0]), c2 leq(x[1], 3))\n",
        // constant comparisons
        "language Dominion 0.1\n"
        "dim x[1]: int\n"
        "find x[..]: int {1..3}\n"
        "such that\n"
        "a leq(1, 2)\n"
        "b not(b1 eq(4, 5))\n",
    };
    for (const char* text : texts) {
        Model m = parse_model(text);
        for (auto branching : {BranchingScheme::NWay, BranchingScheme::TwoWay}) {
            SolveOptions opts;
            opts.mode = SearchMode::All;
            opts.branching = branching;
            auto got = std::get<Exhausted>(solve(m, opts)).solutions;
            auto want = enumerate_all(m);
            CHECK(got == want);
        }
    }
}

TEST_CASE("constant contradiction refutes at the root") {
    Model m = parse_model(
        "language Dominion 0.1\n"
        "dim x[1]: int\n"
        "find x[..]: int {1..3}\n"
        "such that\n"
        "a leq(3, 2)\n");
    SolveOptions opts;
    opts.mode = SearchMode::All;
    auto out = solve(m, opts);
    auto* e = std::get_if<Exhausted>(&out);
    REQUIRE(e != nullptr);
    CHECK(e->solutions.empty());
    CHECK(e->stats.nodes == 0);
}

TEST_CASE("wall-clock budget stops") {
    Model m = testutil::queens_model(8);
    SolveOptions opts;
    opts.mode = SearchMode::All;
    opts.budget = Budget::millis(0);
    Outcome out = solve(m, opts);
    CHECK(std::holds_alternative<BudgetExhausted>(out));
}

TEST_CASE("two-way stop after excludes leaves them on the path") {
    // x in {1..4} with no constraints: 2-way explores x=1 (solution in All
    // mode), then x!=1, x=2, ... stop after the first exclude
    Model m = parse_model(
        "language Dominion 0.1\n"
        "dim x[1]: int\n"
        "find x[..]: int {1..4}\n"
        "such that\n");
    SolveOptions opts;
    opts.mode = SearchMode::All;
    opts.branching = BranchingScheme::TwoWay;
    opts.budget = Budget::nodes(2);  // assign x=1, then exclude x!=1
    Outcome out = solve(m, opts);
    auto* b = std::get_if<BudgetExhausted>(&out);
    REQUIRE(b != nullptr);
    REQUIRE(b->path.levels.size() == 1);
    CHECK(!b->path.levels[0].assigned.has_value());
    CHECK(b->path.levels[0].closed == std::vector<std::int64_t>{1});
    CHECK(b->frontier == VarRef{"x", 0});
    auto decisions = b->path.decisions();
    REQUIRE(decisions.size() == 1);
    CHECK(decisions[0].kind == DecisionKind::Exclude);
}
