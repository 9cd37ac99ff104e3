#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "splitcp/model.hpp"

namespace splitcp {

enum class BranchingScheme { TwoWay, NWay };
enum class SearchMode { First, All };

/// Search budget. Node count is the deterministic bound used by tests
/// and by the coordinator; wall time is supported alongside it. Both
/// unset means unbounded.
struct Budget {
    std::optional<std::uint64_t> max_nodes;
    std::optional<std::uint64_t> max_millis;

    static Budget unbounded() { return {}; }
    static Budget nodes(std::uint64_t n) { return {n, std::nullopt}; }
    static Budget millis(std::uint64_t t) { return {std::nullopt, t}; }
    bool unlimited() const { return !max_nodes && !max_millis; }
};

struct Stats {
    std::uint64_t nodes = 0;         // branching decisions (Assign and Exclude)
    std::uint64_t propagations = 0;  // propagator executions
    std::uint64_t wall_millis = 0;
    std::uint64_t solutions_emitted = 0;
};

enum class DecisionKind { Assign, Exclude };

struct Decision {
    VarRef var;
    std::int64_t value;
    DecisionKind kind;
    int level;
};

/// One level of the current search path: the variable branched there, the
/// currently active positive decision (if any), and the values whose
/// subtrees are fully explored and refuted given the positive prefix
/// above this level.
struct PathLevel {
    VarRef var;
    std::optional<std::int64_t> assigned;
    std::vector<std::int64_t> closed;  // ascending
};

struct SearchPath {
    std::vector<PathLevel> levels;
    BranchingScheme branching = BranchingScheme::NWay;

    /// Decisions on the current path in chronological order. Under 2-way
    /// branching closed values reappear as Exclude decisions; under n-way
    /// branching only the active Assigns remain on the path.
    std::vector<Decision> decisions() const;
};

struct SolutionFound {
    Assignment assignment;
    Stats stats;
};

struct Exhausted {
    std::vector<Assignment> solutions;  // every solution in All mode
    Stats stats;
};

struct BudgetExhausted {
    SearchPath path;
    VarRef frontier;             // first variable with no Assign on the path
    Domain frontier_root_domain; // its declared domain
    Stats stats;
};

struct Aborted {
    Stats stats;
};

using Outcome = std::variant<SolutionFound, Exhausted, BudgetExhausted, Aborted>;

/// Return false to abort the search.
using SolutionCallback = std::function<bool(const Assignment&)>;

/// Instrumentation hook: fires whenever a value's subtree is fully
/// explored, with the positive prefix active at that moment.
using CloseCallback = std::function<void(
    const std::vector<std::pair<VarRef, std::int64_t>>& prefix, const VarRef& var,
    std::int64_t value)>;

struct SolveOptions {
    Budget budget = Budget::unbounded();
    SearchMode mode = SearchMode::First;
    BranchingScheme branching = BranchingScheme::NWay;
    /// When false, search runs as pure backtracking with full constraint
    /// checks at complete assignments only.
    bool use_propagation = true;
    CloseCallback on_close;
};

/// Depth-first search with propagation after every decision. Static
/// variable order (declaration order) and ascending value order. Budget
/// stops happen only at branching decisions and leave a complete
/// description of the frontier.
Outcome solve(const Model& m, const SolveOptions& opts = {});

/// As solve, with solutions emitted through the callback as found. The
/// callback runs exactly once per distinct solution in discovery order;
/// returning false aborts the search.
Outcome solve_streaming(const Model& m, const SolveOptions& opts,
                        const SolutionCallback& on_solution);

const Stats& outcome_stats(const Outcome& o);

/// One propagation fixpoint over explicit domains, no search. Arc
/// consistency on the binary forms; alldiff as its pairwise decomposition.
struct PropagationResult {
    bool consistent = false;
    std::vector<Domain> domains;         // pruned; valid when consistent
    std::optional<VarRef> wiped;         // first variable whose domain emptied
};

PropagationResult propagate(const Model& m, const std::vector<Domain>& domains);

}  // namespace splitcp
