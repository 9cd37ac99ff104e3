#include "splitcp/engine.hpp"

#include <algorithm>
#include <chrono>

namespace splitcp {

std::vector<Decision> SearchPath::decisions() const {
    std::vector<Decision> out;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const PathLevel& l = levels[i];
        if (branching == BranchingScheme::TwoWay)
            for (std::int64_t c : l.closed)
                out.push_back({l.var, c, DecisionKind::Exclude, static_cast<int>(i)});
        if (l.assigned)
            out.push_back({l.var, *l.assigned, DecisionKind::Assign, static_cast<int>(i)});
    }
    return out;
}

const Stats& outcome_stats(const Outcome& o) {
    return std::visit([](const auto& v) -> const Stats& { return v.stats; }, o);
}

namespace {

// ---------------------------------------------------------------------------
// Compiled propagators. Every constraint normalizes to binary or unary
// relations between flat variables; forms with no useful decomposition
// fall back to a checking propagator that fires once its variables are
// all singleton.

struct Prop {
    enum Kind {
        EqVV,   // x == y + c
        LeqVV,  // x <= y + c
        NeVV,   // x != y + c
        EqVC,   // x == c
        LeqVC,  // x <= c
        GeqVC,  // x >= c
        NeVC,   // x != c
        FalseK, // constant contradiction
        CheckK  // evaluate src when all vars are singleton
    } kind;
    int x = -1;
    int y = -1;
    std::int64_t c = 0;
    const Constraint* src = nullptr;
    std::vector<int> vars;  // CheckK
};

struct NormSide {
    int var;  // flat index, or -1 for a constant
    std::int64_t off;
};

class PropEngine {
public:
    PropEngine(const Model& m, const std::vector<Domain>& initial) : model_(m) {
        const std::size_t n = static_cast<std::size_t>(m.var_count());
        if (initial.size() != n)
            throw ModelError("propagate: domain count does not match the model");
        doms_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            doms_[i].vals = initial[i].values();
            if (doms_[i].vals.empty())
                throw ModelError("propagate: empty domain for " +
                                 m.var_at(static_cast<std::int64_t>(i)).to_string());
            doms_[i].present.assign(doms_[i].vals.size(), 1);
            doms_[i].live = static_cast<std::int64_t>(doms_[i].vals.size());
        }
        watchers_.resize(n);
        for (const auto& c : m.constraints) compile(c);
        queued_.assign(props_.size(), 0);
    }

    std::int64_t live(int var) const { return doms_[var].live; }

    bool has(int var, std::int64_t v) const {
        const auto& d = doms_[var];
        auto it = std::lower_bound(d.vals.begin(), d.vals.end(), v);
        if (it == d.vals.end() || *it != v) return false;
        return d.present[static_cast<std::size_t>(it - d.vals.begin())] != 0;
    }

    std::int64_t min_of(int var) const {
        const auto& d = doms_[var];
        for (std::size_t i = 0; i < d.vals.size(); ++i)
            if (d.present[i]) return d.vals[i];
        throw ModelError("min_of on empty domain");
    }

    std::int64_t max_of(int var) const {
        const auto& d = doms_[var];
        for (std::size_t i = d.vals.size(); i-- > 0;)
            if (d.present[i]) return d.vals[i];
        throw ModelError("max_of on empty domain");
    }

    std::vector<std::int64_t> values_of(int var) const {
        const auto& d = doms_[var];
        std::vector<std::int64_t> out;
        out.reserve(static_cast<std::size_t>(d.live));
        for (std::size_t i = 0; i < d.vals.size(); ++i)
            if (d.present[i]) out.push_back(d.vals[i]);
        return out;
    }

    Domain domain_of(int var) const { return Domain::of_values(values_of(var)); }

    /// Remove v if present; returns false when the domain empties.
    bool remove_value(int var, std::int64_t v) {
        auto& d = doms_[var];
        auto it = std::lower_bound(d.vals.begin(), d.vals.end(), v);
        if (it == d.vals.end() || *it != v) return true;
        const std::size_t idx = static_cast<std::size_t>(it - d.vals.begin());
        if (!d.present[idx]) return true;
        d.present[idx] = 0;
        --d.live;
        trail_.push_back({var, static_cast<std::int32_t>(idx)});
        enqueue_watchers(var);
        return d.live > 0;
    }

    /// Remove everything except v. v must be present.
    void assign_value(int var, std::int64_t v) {
        auto& d = doms_[var];
        for (std::size_t i = 0; i < d.vals.size(); ++i) {
            if (!d.present[i] || d.vals[i] == v) continue;
            d.present[i] = 0;
            --d.live;
            trail_.push_back({var, static_cast<std::int32_t>(i)});
        }
        enqueue_watchers(var);
    }

    std::size_t trail_size() const { return trail_.size(); }

    void undo_to(std::size_t mark) {
        while (trail_.size() > mark) {
            auto [var, idx] = trail_.back();
            trail_.pop_back();
            doms_[var].present[static_cast<std::size_t>(idx)] = 1;
            ++doms_[var].live;
        }
    }

    void enqueue_all() {
        for (std::size_t i = 0; i < props_.size(); ++i) push(static_cast<int>(i));
    }

    void enqueue_watchers(int var) {
        for (int p : watchers_[var]) push(p);
    }

    /// Run queued propagators to fixpoint. Returns false on wipeout;
    /// `wiped` is the flat index of the emptied variable, or -1 when a
    /// constant contradiction fired.
    bool run_queue(Stats& stats, int& wiped) {
        while (head_ < queue_.size()) {
            const int pi = queue_[head_++];
            queued_[pi] = 0;
            ++stats.propagations;
            if (!run_prop(props_[pi], wiped)) {
                clear_queue();
                return false;
            }
        }
        clear_queue();
        return true;
    }

private:
    struct VarDom {
        std::vector<std::int64_t> vals;
        std::vector<char> present;
        std::int64_t live = 0;
    };

    void push(int pi) {
        if (queued_[pi]) return;
        queued_[pi] = 1;
        queue_.push_back(pi);
    }

    void clear_queue() {
        for (std::size_t i = head_; i < queue_.size(); ++i) queued_[queue_[i]] = 0;
        queue_.clear();
        head_ = 0;
    }

    int must_resolve(const VarRef& r) const {
        auto idx = model_.flat_index(r);
        if (!idx) throw ModelError("unresolvable reference " + r.to_string());
        return static_cast<int>(*idx);
    }

    NormSide norm(const Expr& e) const {
        if (e.var) return {must_resolve(*e.var), e.offset};
        return {-1, e.offset};
    }

    void add_prop(Prop p) {
        const int pi = static_cast<int>(props_.size());
        if (p.kind == Prop::CheckK) {
            for (int v : p.vars) watchers_[v].push_back(pi);
        } else {
            if (p.x >= 0) watchers_[p.x].push_back(pi);
            if (p.y >= 0 && p.y != p.x) watchers_[p.y].push_back(pi);
        }
        props_.push_back(std::move(p));
    }

    void collect_vars(const Constraint& c, std::vector<int>& out) const {
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, AllDiff>) {
                    for (const auto& v : body.vars) out.push_back(must_resolve(v));
                } else if constexpr (std::is_same_v<T, Eq> || std::is_same_v<T, Leq>) {
                    if (body.lhs.var) out.push_back(must_resolve(*body.lhs.var));
                    if (body.rhs.var) out.push_back(must_resolve(*body.rhs.var));
                } else if constexpr (std::is_same_v<T, Not>) {
                    collect_vars(*body.inner, out);
                } else {
                    for (const auto& p : body.parts) collect_vars(*p, out);
                }
            },
            c.body);
    }

    void compile(const Constraint& c) {
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, AllDiff>) {
                    for (std::size_t i = 0; i < body.vars.size(); ++i)
                        for (std::size_t j = i + 1; j < body.vars.size(); ++j)
                            add_prop({Prop::NeVV, must_resolve(body.vars[i]),
                                      must_resolve(body.vars[j]), 0, nullptr, {}});
                } else if constexpr (std::is_same_v<T, Eq>) {
                    const NormSide a = norm(body.lhs), b = norm(body.rhs);
                    if (a.var >= 0 && b.var >= 0)
                        add_prop({Prop::EqVV, a.var, b.var, b.off - a.off, nullptr, {}});
                    else if (a.var >= 0)
                        add_prop({Prop::EqVC, a.var, -1, b.off - a.off, nullptr, {}});
                    else if (b.var >= 0)
                        add_prop({Prop::EqVC, b.var, -1, a.off - b.off, nullptr, {}});
                    else if (a.off != b.off)
                        add_prop({Prop::FalseK, -1, -1, 0, nullptr, {}});
                } else if constexpr (std::is_same_v<T, Leq>) {
                    const NormSide a = norm(body.lhs), b = norm(body.rhs);
                    if (a.var >= 0 && b.var >= 0)
                        add_prop({Prop::LeqVV, a.var, b.var, b.off - a.off, nullptr, {}});
                    else if (a.var >= 0)
                        add_prop({Prop::LeqVC, a.var, -1, b.off - a.off, nullptr, {}});
                    else if (b.var >= 0)
                        add_prop({Prop::GeqVC, b.var, -1, a.off - b.off, nullptr, {}});
                    else if (a.off > b.off)
                        add_prop({Prop::FalseK, -1, -1, 0, nullptr, {}});
                } else if constexpr (std::is_same_v<T, Not>) {
                    compile_negated(c, *body.inner);
                } else {
                    for (const auto& p : body.parts) compile(*p);
                }
            },
            c.body);
    }

    void compile_negated(const Constraint& wrapper, const Constraint& inner) {
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, Eq>) {
                    const NormSide a = norm(body.lhs), b = norm(body.rhs);
                    if (a.var >= 0 && b.var >= 0)
                        add_prop({Prop::NeVV, a.var, b.var, b.off - a.off, nullptr, {}});
                    else if (a.var >= 0)
                        add_prop({Prop::NeVC, a.var, -1, b.off - a.off, nullptr, {}});
                    else if (b.var >= 0)
                        add_prop({Prop::NeVC, b.var, -1, a.off - b.off, nullptr, {}});
                    else if (a.off == b.off)
                        add_prop({Prop::FalseK, -1, -1, 0, nullptr, {}});
                } else if constexpr (std::is_same_v<T, Leq>) {
                    // not(l <= r) is r + 1 <= l
                    const NormSide a = norm(body.lhs), b = norm(body.rhs);
                    if (a.var >= 0 && b.var >= 0)
                        add_prop({Prop::LeqVV, b.var, a.var, a.off - b.off - 1, nullptr, {}});
                    else if (a.var >= 0)
                        add_prop({Prop::GeqVC, a.var, -1, b.off - a.off + 1, nullptr, {}});
                    else if (b.var >= 0)
                        add_prop({Prop::LeqVC, b.var, -1, a.off - b.off - 1, nullptr, {}});
                    else if (a.off <= b.off)
                        add_prop({Prop::FalseK, -1, -1, 0, nullptr, {}});
                } else if constexpr (std::is_same_v<T, Not>) {
                    compile(*body.inner);
                } else {
                    Prop p{Prop::CheckK, -1, -1, 0, &wrapper, {}};
                    collect_vars(wrapper, p.vars);
                    std::sort(p.vars.begin(), p.vars.end());
                    p.vars.erase(std::unique(p.vars.begin(), p.vars.end()), p.vars.end());
                    add_prop(std::move(p));
                }
            },
            inner.body);
    }

    bool run_prop(const Prop& p, int& wiped) {
        switch (p.kind) {
            case Prop::EqVV: {
                if (!prune_eq(p.x, p.y, p.c, wiped)) return false;
                return prune_eq(p.y, p.x, -p.c, wiped);
            }
            case Prop::LeqVV: {
                const std::int64_t ub = max_of(p.y) + p.c;
                if (!prune_above(p.x, ub, wiped)) return false;
                const std::int64_t lb = min_of(p.x) - p.c;
                return prune_below(p.y, lb, wiped);
            }
            case Prop::NeVV: {
                if (live(p.y) == 1 && !remove_checked(p.x, min_of(p.y) + p.c, wiped))
                    return false;
                if (live(p.x) == 1 && !remove_checked(p.y, min_of(p.x) - p.c, wiped))
                    return false;
                return true;
            }
            case Prop::EqVC: {
                auto& d = doms_[p.x];
                for (std::size_t i = 0; i < d.vals.size(); ++i) {
                    if (!d.present[i] || d.vals[i] == p.c) continue;
                    if (!remove_checked(p.x, d.vals[i], wiped)) return false;
                }
                return true;
            }
            case Prop::LeqVC:
                return prune_above(p.x, p.c, wiped);
            case Prop::GeqVC:
                return prune_below(p.x, p.c, wiped);
            case Prop::NeVC:
                return remove_checked(p.x, p.c, wiped);
            case Prop::FalseK:
                wiped = -1;
                return false;
            case Prop::CheckK: {
                for (int v : p.vars)
                    if (live(v) != 1) return true;
                Assignment a;
                a.values.assign(doms_.size(), 0);
                for (int v : p.vars)
                    a.values[static_cast<std::size_t>(v)] = min_of(v);
                if (eval_constraint(model_, *p.src, a)) return true;
                // refute by emptying the last participating variable
                return remove_checked(p.vars.back(), min_of(p.vars.back()), wiped);
            }
        }
        return true;
    }

    bool remove_checked(int var, std::int64_t v, int& wiped) {
        if (!remove_value(var, v)) {
            wiped = var;
            return false;
        }
        return true;
    }

    // keep only values of x supported in y via x == y + c
    bool prune_eq(int x, int y, std::int64_t c, int& wiped) {
        auto& d = doms_[x];
        for (std::size_t i = 0; i < d.vals.size(); ++i) {
            if (!d.present[i]) continue;
            if (!has(y, d.vals[i] - c))
                if (!remove_checked(x, d.vals[i], wiped)) return false;
        }
        return true;
    }

    bool prune_above(int x, std::int64_t ub, int& wiped) {
        auto& d = doms_[x];
        for (std::size_t i = d.vals.size(); i-- > 0;) {
            if (!d.present[i]) continue;
            if (d.vals[i] <= ub) break;
            if (!remove_checked(x, d.vals[i], wiped)) return false;
        }
        return true;
    }

    bool prune_below(int x, std::int64_t lb, int& wiped) {
        auto& d = doms_[x];
        for (std::size_t i = 0; i < d.vals.size(); ++i) {
            if (!d.present[i]) continue;
            if (d.vals[i] >= lb) break;
            if (!remove_checked(x, d.vals[i], wiped)) return false;
        }
        return true;
    }

    const Model& model_;
    std::vector<VarDom> doms_;
    std::vector<Prop> props_;
    std::vector<std::vector<int>> watchers_;
    std::vector<std::pair<int, std::int32_t>> trail_;
    std::vector<int> queue_;
    std::vector<char> queued_;
    std::size_t head_ = 0;
};

// ---------------------------------------------------------------------------
// Search

class Searcher {
public:
    Searcher(const Model& m, const SolveOptions& opts, const SolutionCallback* cb)
        : model_(m),
          opts_(opts),
          callback_(cb),
          nvars_(m.var_count()),
          declared_(make_declared(m)),
          eng_(m, declared_) {}

    Outcome run() {
        start_ = std::chrono::steady_clock::now();
        if (nvars_ == 0) return run_degenerate();
        if (stop_needed()) return budget_outcome();
        if (opts_.use_propagation) {
            eng_.enqueue_all();
            int wiped = -1;
            if (!eng_.run_queue(stats_, wiped)) return exhausted_outcome();
        }
        push_level();

        enum class Step { TryNext, FailLevel } step = Step::TryNext;
        while (true) {
            if (step == Step::FailLevel) {
                const std::size_t entry = levels_.back().entry_mark;
                levels_.pop_back();
                eng_.undo_to(entry);
                if (levels_.empty()) return exhausted_outcome();
                Level& parent = levels_.back();
                const std::int64_t v = *parent.assigned;
                parent.assigned.reset();
                if (opts_.branching == BranchingScheme::NWay) {
                    close_value(parent, v);
                    step = Step::TryNext;
                } else {
                    eng_.undo_to(parent.assign_mark);
                    switch (exclude(parent, v)) {
                        case ExcludeResult::Stop: return budget_outcome();
                        case ExcludeResult::Wipe: step = Step::FailLevel; break;
                        case ExcludeResult::Ok:   step = Step::TryNext; break;
                    }
                }
                continue;
            }

            Level& level = levels_.back();
            std::optional<std::int64_t> v = next_candidate(level);
            if (!v) {
                step = Step::FailLevel;
                continue;
            }

            if (opts_.branching == BranchingScheme::NWay)
                eng_.undo_to(level.entry_mark);
            level.assign_mark = eng_.trail_size();
            eng_.assign_value(level.var, *v);
            level.assigned = *v;
            ++stats_.nodes;
            const bool completes =
                static_cast<std::int64_t>(levels_.size()) == nvars_;
            if (!completes && stop_needed()) return budget_outcome();

            bool consistent = true;
            if (opts_.use_propagation) {
                int wiped = -1;
                consistent = eng_.run_queue(stats_, wiped);
            }
            if (consistent && completes && !opts_.use_propagation)
                consistent = eval_model(model_, current_assignment());

            if (!consistent) {
                switch (retract(level, *v)) {
                    case ExcludeResult::Stop: return budget_outcome();
                    case ExcludeResult::Wipe: step = Step::FailLevel; break;
                    case ExcludeResult::Ok:   step = Step::TryNext; break;
                }
                continue;
            }

            if (completes) {
                Assignment a = current_assignment();
                ++stats_.solutions_emitted;
                if (callback_ && *callback_ && !(*callback_)(a))
                    return Aborted{finalize()};
                if (opts_.mode == SearchMode::First)
                    return SolutionFound{std::move(a), finalize()};
                collected_.push_back(std::move(a));
                switch (retract(level, *v)) {
                    case ExcludeResult::Stop: return budget_outcome();
                    case ExcludeResult::Wipe: step = Step::FailLevel; break;
                    case ExcludeResult::Ok:   step = Step::TryNext; break;
                }
                continue;
            }

            push_level();
            step = Step::TryNext;
        }
    }

private:
    struct Level {
        int var = 0;
        std::size_t entry_mark = 0;
        std::size_t assign_mark = 0;
        std::vector<std::int64_t> to_try;  // n-way snapshot at entry
        std::size_t next = 0;
        std::vector<std::int64_t> closed;
        std::optional<std::int64_t> assigned;
    };

    enum class ExcludeResult { Ok, Wipe, Stop };

    static std::vector<Domain> make_declared(const Model& m) {
        std::vector<Domain> out;
        for (const auto& arr : m.vars)
            for (std::int64_t i = 0; i < arr.length; ++i) out.push_back(arr.domain);
        return out;
    }

    void push_level() {
        Level l;
        l.var = static_cast<int>(levels_.size());
        l.entry_mark = eng_.trail_size();
        if (opts_.branching == BranchingScheme::NWay) l.to_try = eng_.values_of(l.var);
        levels_.push_back(std::move(l));
    }

    std::optional<std::int64_t> next_candidate(Level& l) {
        if (opts_.branching == BranchingScheme::NWay) {
            if (l.next >= l.to_try.size()) return std::nullopt;
            return l.to_try[l.next++];
        }
        if (eng_.live(l.var) == 0) return std::nullopt;
        return eng_.min_of(l.var);
    }

    /// Handle a refuted (or, in All mode, fully enumerated) assignment.
    ExcludeResult retract(Level& l, std::int64_t v) {
        l.assigned.reset();
        if (opts_.branching == BranchingScheme::NWay) {
            close_value(l, v);
            return ExcludeResult::Ok;
        }
        eng_.undo_to(l.assign_mark);
        return exclude(l, v);
    }

    /// 2-way right branch: the decision var != v.
    ExcludeResult exclude(Level& l, std::int64_t v) {
        close_value(l, v);
        ++stats_.nodes;
        if (stop_needed()) return ExcludeResult::Stop;
        if (!eng_.remove_value(l.var, v)) return ExcludeResult::Wipe;
        if (opts_.use_propagation) {
            int wiped = -1;
            if (!eng_.run_queue(stats_, wiped)) return ExcludeResult::Wipe;
        }
        return ExcludeResult::Ok;
    }

    void close_value(Level& l, std::int64_t v) {
        l.closed.push_back(v);
        if (opts_.on_close) {
            std::vector<std::pair<VarRef, std::int64_t>> prefix;
            for (std::size_t i = 0; i + 1 < levels_.size(); ++i)
                prefix.emplace_back(model_.var_at(levels_[i].var),
                                    *levels_[i].assigned);
            opts_.on_close(prefix, model_.var_at(l.var), v);
        }
    }

    Assignment current_assignment() const {
        Assignment a;
        a.values.reserve(levels_.size());
        for (const auto& l : levels_) a.values.push_back(*l.assigned);
        return a;
    }

    bool stop_needed() const {
        if (opts_.budget.max_nodes && stats_.nodes >= *opts_.budget.max_nodes)
            return true;
        if (opts_.budget.max_millis && elapsed_millis() >= *opts_.budget.max_millis)
            return true;
        return false;
    }

    std::uint64_t elapsed_millis() const {
        return static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start_)
                .count());
    }

    Stats finalize() {
        stats_.wall_millis = elapsed_millis();
        return stats_;
    }

    Outcome run_degenerate() {
        Assignment empty;
        if (!eval_model(model_, empty)) return Exhausted{{}, finalize()};
        ++stats_.solutions_emitted;
        if (callback_ && *callback_ && !(*callback_)(empty))
            return Aborted{finalize()};
        if (opts_.mode == SearchMode::First)
            return SolutionFound{empty, finalize()};
        return Exhausted{{empty}, finalize()};
    }

    Outcome exhausted_outcome() {
        return Exhausted{std::move(collected_), finalize()};
    }

    Outcome budget_outcome() {
        SearchPath path;
        path.branching = opts_.branching;
        for (const auto& l : levels_)
            path.levels.push_back({model_.var_at(l.var), l.assigned, l.closed});
        std::int64_t frontier_flat = static_cast<std::int64_t>(levels_.size());
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (!levels_[i].assigned) {
                frontier_flat = static_cast<std::int64_t>(i);
                break;
            }
        }
        VarRef frontier = model_.var_at(frontier_flat);
        Domain declared = model_.domain_of(frontier);
        return BudgetExhausted{std::move(path), std::move(frontier),
                               std::move(declared), finalize()};
    }

    const Model& model_;
    const SolveOptions& opts_;
    const SolutionCallback* callback_;
    const std::int64_t nvars_;
    std::vector<Domain> declared_;
    PropEngine eng_;
    std::vector<Level> levels_;
    std::vector<Assignment> collected_;
    Stats stats_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

Outcome solve(const Model& m, const SolveOptions& opts) {
    return Searcher(m, opts, nullptr).run();
}

Outcome solve_streaming(const Model& m, const SolveOptions& opts,
                        const SolutionCallback& on_solution) {
    return Searcher(m, opts, &on_solution).run();
}

PropagationResult propagate(const Model& m, const std::vector<Domain>& domains) {
    PropEngine eng(m, domains);
    Stats stats;
    int wiped = -1;
    eng.enqueue_all();
    PropagationResult res;
    if (!eng.run_queue(stats, wiped)) {
        res.consistent = false;
        if (wiped >= 0) res.wiped = m.var_at(wiped);
        return res;
    }
    res.consistent = true;
    const std::int64_t n = m.var_count();
    res.domains.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        res.domains.push_back(eng.domain_of(static_cast<int>(i)));
    return res;
}

}  // namespace splitcp
