#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "splitcp/model.hpp"

namespace splitcp {

/// Syntax or binding error with source position (1-based).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int col);
    int line() const { return line_; }
    int col() const { return col_; }

private:
    int line_;
    int col_;
};

/// Integer expression over letting and generator names: literals, names,
/// unary minus, the binary operators + - *, and parentheses.
class IntExpr {
public:
    using Env = std::map<std::string, std::int64_t>;

    IntExpr() : IntExpr(literal(0)) {}
    static IntExpr literal(std::int64_t v);
    static IntExpr name(std::string n);
    static IntExpr negate(IntExpr e);
    static IntExpr binary(char op, IntExpr lhs, IntExpr rhs);

    /// Throws ModelError on an unbound name.
    std::int64_t eval(const Env& env) const;

private:
    struct Node;
    explicit IntExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

/// Constraint template: the body of a comprehension (or of a ground item,
/// which is a template with no free names). Indices and offsets are
/// unevaluated integer expressions.
struct TemplateConstraint;
using TemplateConstraintPtr = std::shared_ptr<const TemplateConstraint>;

struct TemplateRef {
    std::string array;
    IntExpr index;
};

struct TemplateExpr {
    std::optional<TemplateRef> var;
    IntExpr offset;
};

struct TAllDiff { std::string array; };
struct TEq      { TemplateExpr lhs; TemplateExpr rhs; };
struct TLeq     { TemplateExpr lhs; TemplateExpr rhs; };
struct TNot     { TemplateConstraintPtr inner; };
struct TAnd     { std::vector<TemplateConstraintPtr> parts; };

struct TemplateConstraint {
    std::string label;
    std::variant<TAllDiff, TEq, TLeq, TNot, TAnd> body;
};

/// A comprehension: a template plus inclusive generator ranges expanded in
/// lexicographic order. Later generators may reference earlier names.
struct Generator {
    std::string name;
    IntExpr lo;
    IntExpr hi;
};

struct Comprehension {
    TemplateConstraint templ;
    std::vector<Generator> generators;  // empty for a ground item
};

/// Expand a comprehension against a context model (letting bindings and
/// declared arrays). Every label in each instance is suffixed with the
/// generator values, e.g. diagonals1_0_1. Throws ModelError on unbound
/// names or out-of-range references.
std::vector<Constraint> expand_comprehension(const Comprehension& c,
                                             const Model& context);

/// Parse a model text: letting substitution applied, comprehensions fully
/// expanded into ground constraints. Throws ParseError.
Model parse_model(const std::string& text);

/// Deterministic ground-form emission; parse_model(serialize_model(m))
/// is structurally equal to m.
std::string serialize_model(const Model& m);

/// One constraint item as it appears on a model line (no newline).
std::string serialize_constraint(const Constraint& c);

/// A model together with its source text and provenance.
struct SourceModel {
    std::string text;
    Model model;
    std::string origin;  // file path or "generated"
};

SourceModel load_model_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path, const Model& m);

}  // namespace splitcp
