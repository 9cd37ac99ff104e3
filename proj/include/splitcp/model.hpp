#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace splitcp {

/// Structural errors: unresolvable references, duplicate labels, invalid
/// or inexpressible models.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finite set of integers in canonical form: sorted, pairwise disjoint,
/// non-adjacent inclusive intervals.
class Domain {
public:
    struct Interval {
        std::int64_t lo;
        std::int64_t hi;
        friend bool operator==(const Interval&, const Interval&) = default;
    };

    Domain() = default;

    /// The contiguous range {lo..hi}; empty when lo > hi.
    static Domain range(std::int64_t lo, std::int64_t hi);

    /// Arbitrary values; duplicates collapse, adjacency merges.
    static Domain of_values(std::vector<std::int64_t> values);

    bool empty() const { return intervals_.empty(); }
    std::int64_t size() const;
    bool contains(std::int64_t v) const;
    std::int64_t min() const;
    std::int64_t max() const;
    /// True when the domain is a single interval (or empty).
    bool contiguous() const { return intervals_.size() <= 1; }
    std::vector<std::int64_t> values() const;
    const std::vector<Interval>& intervals() const { return intervals_; }
    /// This domain minus the given values.
    Domain without(const std::vector<std::int64_t>& removed) const;
    std::string to_string() const;

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    std::vector<Interval> intervals_;
};

/// One element of a declared variable array.
struct VarRef {
    std::string array;
    std::int64_t index = 0;

    std::string to_string() const;
    friend bool operator==(const VarRef&, const VarRef&) = default;
    friend auto operator<=>(const VarRef&, const VarRef&) = default;
};

/// Linear expression: an optional variable element plus a constant offset.
/// Covers every grammar form: integer literals, bare elements, and
/// add(element, k); add over a literal folds into the offset.
struct Expr {
    std::optional<VarRef> var;
    std::int64_t offset = 0;

    static Expr literal(std::int64_t v) { return {std::nullopt, v}; }
    static Expr element(VarRef r, std::int64_t off = 0) {
        return {std::move(r), off};
    }
    friend bool operator==(const Expr&, const Expr&) = default;
};

struct Constraint;
using ConstraintPtr = std::shared_ptr<const Constraint>;

struct AllDiff { std::vector<VarRef> vars; };
struct Eq      { Expr lhs; Expr rhs; };
struct Leq     { Expr lhs; Expr rhs; };
struct Not     { ConstraintPtr inner; };
struct And     { std::vector<ConstraintPtr> parts; };  // >= 2 parts

/// A labeled constraint. Labels are unique across a model, including
/// the labels nested inside not(...) and and(...).
struct Constraint {
    std::string label;
    std::variant<AllDiff, Eq, Leq, Not, And> body;
};

bool operator==(const Constraint& a, const Constraint& b);
inline bool operator!=(const Constraint& a, const Constraint& b) { return !(a == b); }

ConstraintPtr make_constraint(Constraint c);

/// Append every label occurring in c (outer first, then nested) to out.
void collect_labels(const Constraint& c, std::vector<std::string>& out);

struct VarArray {
    std::string name;
    std::int64_t length = 0;
    Domain domain;
    friend bool operator==(const VarArray&, const VarArray&) = default;
};

/// A constraint model: letting bindings, variable arrays with declared
/// domains, and an ordered list of ground constraints. Immutable value
/// semantics; operations return new models.
struct Model {
    std::map<std::string, std::int64_t> params;
    std::vector<VarArray> vars;
    std::vector<Constraint> constraints;

    /// Total number of declared variables across all arrays.
    std::int64_t var_count() const;

    /// Flat position of a reference in declaration order, or nullopt when
    /// the array is unknown or the index is out of bounds.
    std::optional<std::int64_t> flat_index(const VarRef& r) const;

    /// Inverse of flat_index.
    VarRef var_at(std::int64_t flat) const;

    const VarArray* find_array(const std::string& name) const;
    const Domain& domain_of(const VarRef& r) const;

    std::vector<std::string> all_labels() const;

    /// Throws ModelError on any invariant violation: duplicate array
    /// names or labels, empty declared domains, unresolvable references.
    void validate() const;

    friend bool operator==(const Model& a, const Model& b);
};

/// A total assignment: one value per declared variable, in declaration
/// order (arrays in order, elements by ascending index).
struct Assignment {
    std::vector<std::int64_t> values;

    friend bool operator==(const Assignment&, const Assignment&) = default;
    friend auto operator<=>(const Assignment&, const Assignment&) = default;
};

std::int64_t value_of(const Model& m, const Assignment& a, const VarRef& r);

/// Split d into min(n, |d|) parts, each a contiguous run of d's values in
/// ascending order; the first |d| mod k parts take the ceiling size.
std::vector<Domain> domain_partition(const Domain& d, int n);

/// Reference semantics for a single constraint under a total assignment.
bool eval_constraint(const Model& m, const Constraint& c, const Assignment& a);

/// All constraints of m under a.
bool eval_model(const Model& m, const Assignment& a);

/// New model with cs appended; m is unchanged. Throws ModelError when a
/// label in cs (including nested labels) is already used.
Model add_constraints(const Model& m, const std::vector<Constraint>& cs);

}  // namespace splitcp
