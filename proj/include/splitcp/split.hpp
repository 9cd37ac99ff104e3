#pragma once

#include <variant>
#include <vector>

#include "splitcp/engine.hpp"
#include "splitcp/model.hpp"

namespace splitcp {

/// A restart nogood: "not all of these assignments hold simultaneously".
/// Literal order follows path order; variables are distinct.
struct Nogood {
    std::vector<std::pair<VarRef, std::int64_t>> literals;
    bool unit() const { return literals.size() == 1; }
};

/// The result of splitting a stopped search: the resumed base (original
/// model plus nogoods), n part models that each add the partition
/// constraints for one piece of the frontier variable's domain, and the
/// partition itself.
struct SplitSet {
    Model resumed_base;
    std::vector<Model> parts;
    VarRef frontier;
    std::vector<Domain> partition;
};

/// No variable offers two or more partitionable values; the resumed base
/// stands alone as a single unit of work.
struct SplitUnavailable {
    Model resumed_base;
};

using SplitOutcome = std::variant<SplitSet, SplitUnavailable>;

/// One nogood per closed value per level: the positive prefix above the
/// level plus the closed value at it. Positive decisions themselves emit
/// nothing. The conjunction of the emitted nogoods excludes exactly the
/// explored region. Throws ModelError on a malformed path.
std::vector<Nogood> extract_restart_nogoods(const SearchPath& path,
                                            BranchingScheme branching);

/// Build the resumed base and the split parts for a budget-stopped run of
/// m. The partitioned set is the frontier variable's declared domain minus
/// the values excluded by unit nogoods; when it has fewer than two values
/// and n >= 2, the frontier advances to the next variable with at least
/// two partitionable values.
SplitOutcome split_model(const Model& m, const BudgetExhausted& stop, int n);

}  // namespace splitcp
