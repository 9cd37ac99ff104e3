#include "splitcp/split.hpp"

#include <algorithm>
#include <set>

namespace splitcp {

std::vector<Nogood> extract_restart_nogoods(const SearchPath& path,
                                            BranchingScheme branching) {
    (void)branching;  // the rule is the same under both schemes
    std::vector<Nogood> out;
    std::vector<std::pair<VarRef, std::int64_t>> prefix;
    for (std::size_t i = 0; i < path.levels.size(); ++i) {
        const PathLevel& level = path.levels[i];
        for (std::int64_t c : level.closed) {
            if (level.assigned && *level.assigned == c)
                throw ModelError("malformed path: closed value " +
                                 std::to_string(c) + " equals the assignment at " +
                                 level.var.to_string());
            Nogood g;
            g.literals = prefix;
            g.literals.emplace_back(level.var, c);
            out.push_back(std::move(g));
        }
        if (level.assigned) {
            prefix.emplace_back(level.var, *level.assigned);
        } else if (i + 1 < path.levels.size()) {
            throw ModelError("malformed path: unassigned level above the frontier");
        }
    }
    return out;
}

namespace {

/// Smallest suffix k such that base (and base + "_i", for derived inner
/// labels) is unused; k == 0 means the bare base.
std::string fresh_label(const std::set<std::string>& used, const std::string& base) {
    auto free_with_derivatives = [&](const std::string& l) {
        if (used.count(l)) return false;
        for (const char* d : {"_i", "_i_1", "_i_2"})
            if (used.count(l + d)) return false;
        return true;
    };
    if (free_with_derivatives(base)) return base;
    for (int k = 2;; ++k) {
        std::string cand = base + "_" + std::to_string(k);
        if (free_with_derivatives(cand)) return cand;
    }
}

Constraint nogood_constraint(const Nogood& g, const std::string& label) {
    auto eq_of = [](const std::string& l, const std::pair<VarRef, std::int64_t>& lit) {
        return Constraint{l, Eq{Expr::element(lit.first), Expr::literal(lit.second)}};
    };
    const std::string inner_label = label + "_i";
    Constraint inner;
    if (g.literals.size() == 1) {
        inner = eq_of(inner_label, g.literals.front());
    } else {
        And conj;
        for (std::size_t i = 0; i < g.literals.size(); ++i)
            conj.parts.push_back(make_constraint(
                eq_of(inner_label + "_" + std::to_string(i + 1), g.literals[i])));
        inner = Constraint{inner_label, std::move(conj)};
    }
    return Constraint{label, Not{make_constraint(std::move(inner))}};
}

/// Constraints confining `var` to exactly `part`, in the worked-example
/// shape: leq bounds (omitted at the declared edges) plus not(eq)
/// exclusions for declared values strictly inside the part's bounds.
std::vector<Constraint> part_constraints(const VarRef& var, const Domain& part,
                                         const Domain& declared,
                                         const std::string& base_label,
                                         const std::set<std::string>& used) {
    struct Piece {
        enum { BoundLo, BoundHi, Exclude } kind;
        std::int64_t value;
    };
    std::vector<Piece> pieces;
    const std::int64_t lo = part.min();
    const std::int64_t hi = part.max();
    if (lo != declared.min()) pieces.push_back({Piece::BoundLo, lo});
    if (hi != declared.max()) pieces.push_back({Piece::BoundHi, hi});
    for (std::int64_t v : declared.values())
        if (v > lo && v < hi && !part.contains(v))
            pieces.push_back({Piece::Exclude, v});

    std::set<std::string> taken = used;
    std::vector<Constraint> out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        std::string label = pieces.size() == 1
                                ? base_label
                                : base_label + "_" + std::to_string(i + 1);
        label = fresh_label(taken, label);
        const Piece& p = pieces[i];
        Constraint c;
        switch (p.kind) {
            case Piece::BoundLo:
                c = Constraint{label, Leq{Expr::literal(p.value), Expr::element(var)}};
                break;
            case Piece::BoundHi:
                c = Constraint{label, Leq{Expr::element(var), Expr::literal(p.value)}};
                break;
            case Piece::Exclude: {
                Constraint inner{label + "_i",
                                 Eq{Expr::element(var), Expr::literal(p.value)}};
                c = Constraint{label, Not{make_constraint(std::move(inner))}};
                break;
            }
        }
        std::vector<std::string> ls;
        collect_labels(c, ls);
        taken.insert(ls.begin(), ls.end());
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

SplitOutcome split_model(const Model& m, const BudgetExhausted& stop, int n) {
    if (n < 1) throw ModelError("split_model: n must be positive");
    const std::vector<Nogood> nogoods =
        extract_restart_nogoods(stop.path, stop.path.branching);

    std::set<std::string> used;
    for (const auto& l : m.all_labels()) used.insert(l);

    // resume_<k> numbering continues past any labels a previous split left
    int next_k = 0;
    for (const auto& l : used) {
        if (l.rfind("resume_", 0) != 0) continue;
        const std::string tail = l.substr(7);
        if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
            continue;
        next_k = std::max(next_k, std::stoi(tail) + 1);
    }

    std::vector<Constraint> resumes;
    for (const auto& g : nogoods) {
        std::string label;
        while (true) {
            label = "resume_" + std::to_string(next_k++);
            Constraint c = nogood_constraint(g, label);
            std::vector<std::string> ls;
            collect_labels(c, ls);
            if (std::none_of(ls.begin(), ls.end(),
                             [&](const std::string& l) { return used.count(l); })) {
                used.insert(ls.begin(), ls.end());
                resumes.push_back(std::move(c));
                break;
            }
        }
    }
    Model base = add_constraints(m, resumes);

    if (n == 1) return SplitSet{base, {base}, stop.frontier, {}};

    // values of a variable ruled out by unit nogoods
    auto unit_excluded = [&](const VarRef& var) {
        std::vector<std::int64_t> out;
        for (const auto& g : nogoods)
            if (g.unit() && g.literals.front().first == var)
                out.push_back(g.literals.front().second);
        return out;
    };

    auto frontier_flat = m.flat_index(stop.frontier);
    if (!frontier_flat)
        throw ModelError("split_model: frontier " + stop.frontier.to_string() +
                         " does not resolve in the model");

    VarRef frontier = stop.frontier;
    Domain partitioned;
    bool ok = false;
    for (std::int64_t f = *frontier_flat; f < m.var_count(); ++f) {
        VarRef cand = m.var_at(f);
        Domain d = m.domain_of(cand).without(unit_excluded(cand));
        if (d.size() >= 2) {
            frontier = std::move(cand);
            partitioned = std::move(d);
            ok = true;
            break;
        }
    }
    if (!ok) return SplitUnavailable{std::move(base)};

    const Domain& declared = m.domain_of(frontier);
    std::vector<Domain> partition = domain_partition(partitioned, n);

    std::vector<Model> parts;
    parts.reserve(partition.size());
    for (std::size_t k = 0; k < partition.size(); ++k) {
        std::string base_label = k == 0                      ? "split_lo"
                                 : k + 1 == partition.size() ? "split_hi"
                                                             : "split_" + std::to_string(k + 1);
        parts.push_back(add_constraints(
            base, part_constraints(frontier, partition[k], declared, base_label, used)));
    }
    return SplitSet{std::move(base), std::move(parts), std::move(frontier),
                    std::move(partition)};
}

}  // namespace splitcp
