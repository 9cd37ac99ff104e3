#include "splitcp/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace splitcp {

Domain Domain::range(std::int64_t lo, std::int64_t hi) {
    Domain d;
    if (lo <= hi) d.intervals_.push_back({lo, hi});
    return d;
}

Domain Domain::of_values(std::vector<std::int64_t> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    Domain d;
    for (std::int64_t v : values) {
        if (!d.intervals_.empty() && d.intervals_.back().hi + 1 == v)
            d.intervals_.back().hi = v;
        else
            d.intervals_.push_back({v, v});
    }
    return d;
}

std::int64_t Domain::size() const {
    std::int64_t n = 0;
    for (const auto& iv : intervals_) n += iv.hi - iv.lo + 1;
    return n;
}

bool Domain::contains(std::int64_t v) const {
    for (const auto& iv : intervals_) {
        if (v < iv.lo) return false;
        if (v <= iv.hi) return true;
    }
    return false;
}

std::int64_t Domain::min() const {
    if (empty()) throw ModelError("min() on empty domain");
    return intervals_.front().lo;
}

std::int64_t Domain::max() const {
    if (empty()) throw ModelError("max() on empty domain");
    return intervals_.back().hi;
}

std::vector<std::int64_t> Domain::values() const {
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (const auto& iv : intervals_)
        for (std::int64_t v = iv.lo; v <= iv.hi; ++v) out.push_back(v);
    return out;
}

Domain Domain::without(const std::vector<std::int64_t>& removed) const {
    std::set<std::int64_t> gone(removed.begin(), removed.end());
    std::vector<std::int64_t> kept;
    for (std::int64_t v : values())
        if (!gone.count(v)) kept.push_back(v);
    return of_values(std::move(kept));
}

std::string Domain::to_string() const {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& iv : intervals_) {
        if (!first) os << ", ";
        first = false;
        if (iv.lo == iv.hi)
            os << iv.lo;
        else
            os << iv.lo << ".." << iv.hi;
    }
    os << '}';
    return os.str();
}

std::string VarRef::to_string() const {
    return array + "[" + std::to_string(index) + "]";
}

namespace {

bool body_equal(const Constraint& a, const Constraint& b);

bool ptr_equal(const ConstraintPtr& a, const ConstraintPtr& b) {
    if (!a || !b) return !a && !b;
    return *a == *b;
}

bool body_equal(const Constraint& a, const Constraint& b) {
    if (a.body.index() != b.body.index()) return false;
    return std::visit(
        [&](const auto& lhs) {
            using T = std::decay_t<decltype(lhs)>;
            const auto& rhs = std::get<T>(b.body);
            if constexpr (std::is_same_v<T, AllDiff>) {
                return lhs.vars == rhs.vars;
            } else if constexpr (std::is_same_v<T, Eq>) {
                return lhs.lhs == rhs.lhs && lhs.rhs == rhs.rhs;
            } else if constexpr (std::is_same_v<T, Leq>) {
                return lhs.lhs == rhs.lhs && lhs.rhs == rhs.rhs;
            } else if constexpr (std::is_same_v<T, Not>) {
                return ptr_equal(lhs.inner, rhs.inner);
            } else {
                if (lhs.parts.size() != rhs.parts.size()) return false;
                for (std::size_t i = 0; i < lhs.parts.size(); ++i)
                    if (!ptr_equal(lhs.parts[i], rhs.parts[i])) return false;
                return true;
            }
        },
        a.body);
}

}  // namespace

bool operator==(const Constraint& a, const Constraint& b) {
    return a.label == b.label && body_equal(a, b);
}

ConstraintPtr make_constraint(Constraint c) {
    return std::make_shared<const Constraint>(std::move(c));
}

void collect_labels(const Constraint& c, std::vector<std::string>& out) {
    out.push_back(c.label);
    if (const auto* n = std::get_if<Not>(&c.body)) {
        if (n->inner) collect_labels(*n->inner, out);
    } else if (const auto* a = std::get_if<And>(&c.body)) {
        for (const auto& p : a->parts)
            if (p) collect_labels(*p, out);
    }
}

std::int64_t Model::var_count() const {
    std::int64_t n = 0;
    for (const auto& arr : vars) n += arr.length;
    return n;
}

std::optional<std::int64_t> Model::flat_index(const VarRef& r) const {
    std::int64_t base = 0;
    for (const auto& arr : vars) {
        if (arr.name == r.array) {
            if (r.index < 0 || r.index >= arr.length) return std::nullopt;
            return base + r.index;
        }
        base += arr.length;
    }
    return std::nullopt;
}

VarRef Model::var_at(std::int64_t flat) const {
    std::int64_t base = 0;
    for (const auto& arr : vars) {
        if (flat < base + arr.length) return {arr.name, flat - base};
        base += arr.length;
    }
    throw ModelError("var_at: flat index out of range");
}

const VarArray* Model::find_array(const std::string& name) const {
    for (const auto& arr : vars)
        if (arr.name == name) return &arr;
    return nullptr;
}

const Domain& Model::domain_of(const VarRef& r) const {
    const VarArray* arr = find_array(r.array);
    if (arr == nullptr || r.index < 0 || r.index >= arr->length)
        throw ModelError("unresolvable reference " + r.to_string());
    return arr->domain;
}

std::vector<std::string> Model::all_labels() const {
    std::vector<std::string> out;
    for (const auto& c : constraints) collect_labels(c, out);
    return out;
}

namespace {

void validate_refs(const Model& m, const Constraint& c) {
    auto check_ref = [&](const VarRef& r) {
        if (!m.flat_index(r))
            throw ModelError("unresolvable reference " + r.to_string() +
                             " in constraint '" + c.label + "'");
    };
    auto check_expr = [&](const Expr& e) {
        if (e.var) check_ref(*e.var);
    };
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, AllDiff>) {
                for (const auto& v : body.vars) check_ref(v);
            } else if constexpr (std::is_same_v<T, Eq> || std::is_same_v<T, Leq>) {
                check_expr(body.lhs);
                check_expr(body.rhs);
            } else if constexpr (std::is_same_v<T, Not>) {
                if (!body.inner) throw ModelError("not() without inner constraint");
                validate_refs(m, *body.inner);
            } else {
                if (body.parts.size() < 2)
                    throw ModelError("and() needs at least 2 parts in '" + c.label + "'");
                for (const auto& p : body.parts) {
                    if (!p) throw ModelError("and() with null part");
                    validate_refs(m, *p);
                }
            }
        },
        c.body);
}

}  // namespace

void Model::validate() const {
    std::set<std::string> names;
    for (const auto& arr : vars) {
        if (!names.insert(arr.name).second)
            throw ModelError("duplicate array name '" + arr.name + "'");
        if (arr.length < 0)
            throw ModelError("negative length for array '" + arr.name + "'");
        if (arr.domain.empty())
            throw ModelError("empty domain for array '" + arr.name + "'");
    }
    std::set<std::string> labels;
    for (const auto& c : constraints) {
        std::vector<std::string> ls;
        collect_labels(c, ls);
        for (const auto& l : ls)
            if (!labels.insert(l).second)
                throw ModelError("duplicate label '" + l + "'");
        validate_refs(*this, c);
    }
}

bool operator==(const Model& a, const Model& b) {
    if (a.params != b.params || a.vars != b.vars) return false;
    if (a.constraints.size() != b.constraints.size()) return false;
    for (std::size_t i = 0; i < a.constraints.size(); ++i)
        if (a.constraints[i] != b.constraints[i]) return false;
    return true;
}

std::int64_t value_of(const Model& m, const Assignment& a, const VarRef& r) {
    auto idx = m.flat_index(r);
    if (!idx) throw ModelError("unresolvable reference " + r.to_string());
    return a.values.at(static_cast<std::size_t>(*idx));
}

std::vector<Domain> domain_partition(const Domain& d, int n) {
    if (d.empty()) throw ModelError("domain_partition: empty domain");
    if (n < 1) throw ModelError("domain_partition: n must be positive");
    const auto vals = d.values();
    const std::int64_t total = static_cast<std::int64_t>(vals.size());
    const std::int64_t k = std::min<std::int64_t>(n, total);
    const std::int64_t base = total / k;
    const std::int64_t extra = total % k;  // first `extra` parts get one more

    std::vector<Domain> parts;
    parts.reserve(static_cast<std::size_t>(k));
    std::size_t pos = 0;
    for (std::int64_t i = 0; i < k; ++i) {
        const std::int64_t len = base + (i < extra ? 1 : 0);
        std::vector<std::int64_t> run(vals.begin() + pos, vals.begin() + pos + len);
        pos += static_cast<std::size_t>(len);
        parts.push_back(Domain::of_values(std::move(run)));
    }
    return parts;
}

namespace {

std::int64_t eval_expr(const Model& m, const Expr& e, const Assignment& a) {
    if (e.var) return value_of(m, a, *e.var) + e.offset;
    return e.offset;
}

}  // namespace

bool eval_constraint(const Model& m, const Constraint& c, const Assignment& a) {
    return std::visit(
        [&](const auto& body) -> bool {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, AllDiff>) {
                for (std::size_t i = 0; i < body.vars.size(); ++i)
                    for (std::size_t j = i + 1; j < body.vars.size(); ++j)
                        if (value_of(m, a, body.vars[i]) == value_of(m, a, body.vars[j]))
                            return false;
                return true;
            } else if constexpr (std::is_same_v<T, Eq>) {
                return eval_expr(m, body.lhs, a) == eval_expr(m, body.rhs, a);
            } else if constexpr (std::is_same_v<T, Leq>) {
                return eval_expr(m, body.lhs, a) <= eval_expr(m, body.rhs, a);
            } else if constexpr (std::is_same_v<T, Not>) {
                if (!body.inner) throw ModelError("not() without inner constraint");
                return !eval_constraint(m, *body.inner, a);
            } else {
                for (const auto& p : body.parts)
                    if (!eval_constraint(m, *p, a)) return false;
                return true;
            }
        },
        c.body);
}

bool eval_model(const Model& m, const Assignment& a) {
    for (const auto& c : m.constraints)
        if (!eval_constraint(m, c, a)) return false;
    return true;
}

Model add_constraints(const Model& m, const std::vector<Constraint>& cs) {
    std::set<std::string> used;
    for (const auto& l : m.all_labels()) used.insert(l);
    Model out = m;
    for (const auto& c : cs) {
        std::vector<std::string> ls;
        collect_labels(c, ls);
        for (const auto& l : ls)
            if (!used.insert(l).second)
                throw ModelError("duplicate label '" + l + "'");
        out.constraints.push_back(c);
    }
    return out;
}

}  // namespace splitcp
