#pragma once

#include <cstdint>
#include <vector>

#include "splitcp/model.hpp"

namespace splitcp {

struct OracleOptions {
    /// Refuse models whose full assignment space exceeds this.
    std::uint64_t max_product = 10'000'000;
};

/// Brute-force ground truth: iterate the full Cartesian product of the
/// declared domains in lexicographic order (declaration order, ascending
/// values) and keep the assignments that satisfy every constraint under
/// eval_constraint. Shares no code with the engine's propagation or
/// search. Throws ModelError when the product exceeds the cap.
std::vector<Assignment> enumerate_all(const Model& m,
                                      const OracleOptions& opts = {});

}  // namespace splitcp
