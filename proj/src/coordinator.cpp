#include "splitcp/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <thread>

#include "splitcp/dominion.hpp"
#include "splitcp/process.hpp"
#include "splitcp/split.hpp"

namespace splitcp {

using nlohmann::json;

Budget next_budget(int depth, const CoordinatorConfig& cfg) {
    const double raw = static_cast<double>(cfg.initial_budget_nodes) *
                       std::pow(cfg.budget_growth, depth);
    std::uint64_t nodes = raw >= 1e18 ? static_cast<std::uint64_t>(1e18)
                                      : static_cast<std::uint64_t>(std::llround(raw));
    if (cfg.max_budget_nodes) nodes = std::min(nodes, *cfg.max_budget_nodes);
    return Budget::nodes(nodes);
}

// ---------------------------------------------------------------------------
// Worker body

WorkerOutcome run_worker_task(const WorkerTask& t) {
    const SourceModel src = load_model_file(t.item.model_path);
    std::vector<Assignment> sols;
    SolveOptions opts;
    opts.budget = t.item.budget;
    opts.mode = t.mode;
    opts.branching = BranchingScheme::NWay;
    Outcome out = solve_streaming(src.model, opts, [&](const Assignment& a) {
        sols.push_back(a);
        return true;
    });

    WorkerOutcome wo;
    wo.stats = outcome_stats(out);
    wo.solutions = std::move(sols);
    if (std::holds_alternative<SolutionFound>(out)) {
        wo.kind = WorkerOutcome::Kind::Solved;
    } else if (std::holds_alternative<Exhausted>(out)) {
        wo.kind = WorkerOutcome::Kind::ExhaustedSpace;
    } else if (const auto* stop = std::get_if<BudgetExhausted>(&out)) {
        SplitOutcome split = split_model(src.model, *stop, t.split_factor);
        std::vector<Model> part_models;
        if (auto* ss = std::get_if<SplitSet>(&split))
            part_models = std::move(ss->parts);
        else
            part_models = {std::move(std::get<SplitUnavailable>(split).resumed_base)};
        for (std::size_t j = 0; j < part_models.size(); ++j) {
            const std::string id = t.item.id + "-" + std::to_string(j + 1);
            write_model_file(t.items_dir / (id + ".dominion"), part_models[j]);
            wo.part_ids.push_back(id);
        }
        wo.kind = WorkerOutcome::Kind::SplitWritten;
    } else {
        throw ModelError("worker search aborted unexpectedly");
    }
    return wo;
}

// ---------------------------------------------------------------------------
// Config persistence

void save_spool_config(const Spool& spool, const CoordinatorConfig& cfg) {
    json j;
    j["split_factor"] = cfg.split_factor;
    j["worker_count"] = cfg.worker_count;
    j["initial_budget_nodes"] = cfg.initial_budget_nodes;
    j["budget_growth"] = cfg.budget_growth;
    if (cfg.max_budget_nodes) j["max_budget_nodes"] = *cfg.max_budget_nodes;
    j["mode"] = cfg.mode == SearchMode::All ? "all" : "first";
    j["worker_exe"] = cfg.worker_exe.string();
    Spool::write_json_atomic(spool.config_path(), j);
}

std::optional<CoordinatorConfig> load_spool_config(
    const std::filesystem::path& spool_dir) {
    auto j = Spool::read_json(spool_dir / "config.json");
    if (!j) return std::nullopt;
    CoordinatorConfig cfg;
    cfg.spool_dir = spool_dir;
    cfg.split_factor = j->value("split_factor", 2);
    cfg.worker_count = j->value("worker_count", 2);
    cfg.initial_budget_nodes = j->value("initial_budget_nodes", std::uint64_t{1000});
    cfg.budget_growth = j->value("budget_growth", 2.0);
    if (j->contains("max_budget_nodes"))
        cfg.max_budget_nodes = j->at("max_budget_nodes").get<std::uint64_t>();
    cfg.mode = j->value("mode", "first") == "all" ? SearchMode::All : SearchMode::First;
    cfg.worker_exe = j->value("worker_exe", "");
    return cfg;
}

// ---------------------------------------------------------------------------
// Control loop

namespace {

int id_depth(const std::string& id) {
    return static_cast<int>(std::count(id.begin(), id.end(), '-'));
}

class ControlLoop {
public:
    ControlLoop(Spool spool, const CoordinatorConfig& cfg, Model root,
                const WorkerRunner& runner)
        : spool_(std::move(spool)), cfg_(cfg), root_(std::move(root)), runner_(runner) {}

    void seed_root() {
        spool_.write_model("root", root_);
        WorkItem root{"root", spool_.item_path("root"), 0, next_budget(0, cfg_),
                      std::nullopt};
        std::vector<json> ev{enqueue_event(root)};
        spool_.append_events(ev);
        pending_.push_back(std::move(root));
    }

    void preload(std::deque<WorkItem> pending, std::vector<Assignment> log) {
        pending_ = std::move(pending);
        for (auto& a : log) record_solution(std::move(a), nullptr);
    }

    DistResult run() {
        const auto start = std::chrono::steady_clock::now();
        while (true) {
            reap();
            if (cfg_.mode == SearchMode::First && found_) break;
            launch();
            if (pending_.empty() && running_.empty()) break;
            if (!runner_ && !running_.empty())
                std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        for (auto& r : running_) {
            r.proc.kill_hard();
            r.proc.wait();
        }
        running_.clear();
        stats_.wall_millis += static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count());
        return assemble();
    }

    DistResult assemble() {
        DistResult res;
        res.stats = stats_;
        if (cfg_.mode == SearchMode::All) {
            res.sat = !log_.empty();
            res.solutions = log_;
            if (!log_.empty()) res.solution = log_.front();
        } else {
            res.sat = found_.has_value();
            res.solution = found_;
        }
        write_result(res);
        return res;
    }

    void set_found(Assignment a) { found_ = std::move(a); }

private:
    struct Running {
        WorkItem item;
        ChildProcess proc;
    };

    json enqueue_event(const WorkItem& item) {
        json payload;
        payload["model"] = item.model_path.string();
        payload["depth"] = item.depth;
        payload["budget"] = budget_to_json(item.budget);
        if (item.parent_id) payload["parent"] = *item.parent_id;
        return json{{"event", "enqueue"},
                    {"id", item.id},
                    {"ts", unix_millis()},
                    {"payload", payload}};
    }

    void launch() {
        while (static_cast<int>(running_.size()) < cfg_.worker_count &&
               !pending_.empty()) {
            if (cfg_.mode == SearchMode::First && found_) return;
            WorkItem item = std::move(pending_.front());
            pending_.pop_front();
            const std::string worker = "w" + std::to_string(worker_seq_++);
            spool_.append_events({json{{"event", "claim"},
                                       {"id", item.id},
                                       {"worker", worker},
                                       {"ts", unix_millis()}}});
            WorkerTask task{item, cfg_.mode, cfg_.split_factor, spool_.items_dir()};
            if (runner_) {
                WorkerOutcome out;
                try {
                    out = runner_(task);
                } catch (const std::exception&) {
                    out.kind = WorkerOutcome::Kind::Crashed;
                }
                handle(item, out);
                if (cfg_.mode == SearchMode::First && found_) return;
            } else {
                running_.push_back({std::move(item), spawn_worker(task)});
            }
        }
    }

    ChildProcess spawn_worker(const WorkerTask& task) {
        std::vector<std::string> argv{
            cfg_.worker_exe.string(),
            "worker",
            "--model", task.item.model_path.string(),
            "--id", task.item.id,
            "--mode", cfg_.mode == SearchMode::All ? "all" : "first",
            "--split-factor", std::to_string(task.split_factor),
            "--items-dir", task.items_dir.string(),
            "--report", spool_.report_path(task.item.id).string()};
        if (task.item.budget.max_nodes) {
            argv.push_back("--budget-nodes");
            argv.push_back(std::to_string(*task.item.budget.max_nodes));
        }
        SpawnOptions opts;
        opts.stdout_file = spool_.reports_dir() / (task.item.id + ".log");
        opts.stderr_file = spool_.reports_dir() / (task.item.id + ".log");
        return ChildProcess::spawn(argv, opts);
    }

    void reap() {
        for (std::size_t i = 0; i < running_.size();) {
            auto code = running_[i].proc.try_wait();
            if (!code) {
                ++i;
                continue;
            }
            WorkItem item = std::move(running_[i].item);
            running_.erase(running_.begin() + static_cast<std::ptrdiff_t>(i));
            WorkerOutcome out = *code == 0 ? read_report(item)
                                           : WorkerOutcome{};  // crash
            handle(item, out);
        }
    }

    WorkerOutcome read_report(const WorkItem& item) {
        auto j = Spool::read_json(spool_.report_path(item.id));
        if (!j) return {};  // missing report counts as a crash
        WorkerOutcome out;
        const std::string status = j->value("status", "");
        if (status == "solved")
            out.kind = WorkerOutcome::Kind::Solved;
        else if (status == "exhausted")
            out.kind = WorkerOutcome::Kind::ExhaustedSpace;
        else if (status == "split")
            out.kind = WorkerOutcome::Kind::SplitWritten;
        else
            return {};
        for (const auto& s : j->value("solutions", json::array()))
            out.solutions.push_back(assignment_from_json(root_, s));
        for (const auto& p : j->value("parts", json::array()))
            out.part_ids.push_back(p.get<std::string>());
        if (j->contains("stats")) {
            const auto& st = j->at("stats");
            out.stats.nodes = st.value("nodes", std::uint64_t{0});
            out.stats.propagations = st.value("propagations", std::uint64_t{0});
            out.stats.wall_millis = st.value("wall_millis", std::uint64_t{0});
            out.stats.solutions_emitted = st.value("solutions_emitted", std::uint64_t{0});
        }
        return out;
    }

    void handle(const WorkItem& item, const WorkerOutcome& out) {
        std::vector<json> ev;
        switch (out.kind) {
            case WorkerOutcome::Kind::Crashed:
                // the item returns to pending; only in-flight work is lost
                ev.push_back(enqueue_event(item));
                spool_.append_events(ev);
                pending_.push_back(item);
                return;
            case WorkerOutcome::Kind::Solved: {
                ++stats_.items_run;
                add_stats(out.stats);
                if (out.solutions.empty())
                    throw ModelError("worker reported solved without a solution");
                const Assignment& a = out.solutions.front();
                verify(a);
                if (!found_) {
                    found_ = a;
                    ev.push_back(json{{"event", "found"},
                                      {"id", item.id},
                                      {"ts", unix_millis()},
                                      {"payload",
                                       {{"solution", assignment_to_json(root_, a)}}}});
                }
                ev.push_back(done_event(item));
                spool_.append_events(ev);
                return;
            }
            case WorkerOutcome::Kind::ExhaustedSpace: {
                ++stats_.items_run;
                add_stats(out.stats);
                for (const auto& a : out.solutions) record_solution(a, &ev);
                ev.push_back(done_event(item));
                spool_.append_events(ev);
                return;
            }
            case WorkerOutcome::Kind::SplitWritten: {
                ++stats_.items_run;
                ++stats_.splits;
                add_stats(out.stats);
                for (const auto& a : out.solutions) record_solution(a, &ev);
                json parts = json::array();
                for (const auto& id : out.part_ids) parts.push_back(id);
                ev.push_back(json{{"event", "split"},
                                  {"id", item.id},
                                  {"ts", unix_millis()},
                                  {"payload", {{"parts", parts}}}});
                std::vector<WorkItem> children;
                for (const auto& id : out.part_ids) {
                    WorkItem child{id, spool_.item_path(id), item.depth + 1,
                                   next_budget(item.depth + 1, cfg_), item.id};
                    ev.push_back(enqueue_event(child));
                    children.push_back(std::move(child));
                }
                ev.push_back(done_event(item));
                spool_.append_events(ev);
                for (auto& c : children) pending_.push_back(std::move(c));
                return;
            }
        }
    }

    json done_event(const WorkItem& item) {
        return json{{"event", "done"}, {"id", item.id}, {"ts", unix_millis()}};
    }

    void verify(const Assignment& a) const {
        if (!eval_model(root_, a))
            throw ModelError("worker solution fails a constraint of the original model");
    }

    void record_solution(Assignment a, std::vector<json>* ev) {
        verify(a);
        if (!log_seen_.insert(a.values).second) return;
        if (ev)
            ev->push_back(json{{"event", "solution"},
                               {"id", "log"},
                               {"ts", unix_millis()},
                               {"payload",
                                {{"solution", assignment_to_json(root_, a)}}}});
        log_.push_back(std::move(a));
    }

    void add_stats(const Stats& s) {
        stats_.nodes += s.nodes;
        stats_.propagations += s.propagations;
    }

    void write_result(const DistResult& res) const {
        json j;
        j["status"] = res.sat ? "sat" : "unsat";
        j["solution"] =
            res.solution ? assignment_to_json(root_, *res.solution) : json(nullptr);
        if (cfg_.mode == SearchMode::All) {
            json sols = json::array();
            for (const auto& a : res.solutions) sols.push_back(assignment_to_json(root_, a));
            j["solutions"] = std::move(sols);
        }
        j["stats"] = {{"nodes", res.stats.nodes},
                      {"propagations", res.stats.propagations},
                      {"items_run", res.stats.items_run},
                      {"splits", res.stats.splits},
                      {"wall_millis", res.stats.wall_millis}};
        Spool::write_json_atomic(spool_.result_path(), j);
    }

    Spool spool_;
    const CoordinatorConfig& cfg_;
    Model root_;
    const WorkerRunner& runner_;
    std::deque<WorkItem> pending_;
    std::vector<Running> running_;
    std::optional<Assignment> found_;
    std::vector<Assignment> log_;
    std::set<std::vector<std::int64_t>> log_seen_;
    DistStats stats_;
    int worker_seq_ = 0;
};

}  // namespace

DistResult dist_solve(const Model& m, const CoordinatorConfig& cfg,
                      const WorkerRunner& runner) {
    m.validate();
    if (cfg.split_factor < 2) throw ModelError("split_factor must be at least 2");
    if (cfg.worker_count < 1) throw ModelError("worker_count must be at least 1");
    if (cfg.budget_growth < 1.0) throw ModelError("budget_growth must be at least 1");
    Spool spool(cfg.spool_dir, /*create=*/true);
    save_spool_config(spool, cfg);
    ControlLoop loop(std::move(spool), cfg, m, runner);
    loop.seed_root();
    return loop.run();
}

DistResult recover(const CoordinatorConfig& cfg, const WorkerRunner& runner) {
    Spool spool(cfg.spool_dir, /*create=*/false);

    Model root = load_model_file(spool.item_path("root")).model;

    // a completed run answers immediately
    if (auto result = Spool::read_json(spool.result_path())) {
        DistResult res;
        res.sat = result->value("status", "unsat") == "sat";
        if (!result->at("solution").is_null())
            res.solution = assignment_from_json(root, result->at("solution"));
        for (const auto& s : result->value("solutions", json::array()))
            res.solutions.push_back(assignment_from_json(root, s));
        if (res.solution && !eval_model(root, *res.solution))
            throw ModelError("recorded solution fails the original model");
        return res;
    }

    std::map<std::string, std::string> state;
    std::map<std::string, json> payloads;
    std::vector<std::string> order;
    std::optional<json> found_payload;
    std::vector<Assignment> log;
    std::set<std::vector<std::int64_t>> seen;

    for (const auto& e : spool.replay_journal()) {
        const std::string event = e.value("event", "");
        const std::string id = e.value("id", "");
        if (event == "enqueue") {
            if (!state.count(id)) order.push_back(id);
            state[id] = "pending";
            if (e.contains("payload")) payloads[id] = e.at("payload");
        } else if (event == "claim") {
            state[id] = "running";
        } else if (event == "done") {
            state[id] = "done";
        } else if (event == "found") {
            found_payload = e.at("payload").at("solution");
        } else if (event == "solution") {
            Assignment a = assignment_from_json(root, e.at("payload").at("solution"));
            if (seen.insert(a.values).second) log.push_back(std::move(a));
        }
    }

    ControlLoop loop(spool, cfg, root, runner);

    if (found_payload) {
        Assignment a = assignment_from_json(root, *found_payload);
        if (!eval_model(root, a))
            throw ModelError("recorded solution fails the original model");
        loop.set_found(std::move(a));
        loop.preload({}, std::move(log));
        return loop.assemble();
    }

    std::deque<WorkItem> pending;
    std::vector<json> requeue;
    for (const auto& id : order) {
        const std::string& st = state.at(id);
        if (st == "done") continue;
        WorkItem item;
        item.id = id;
        item.model_path = spool.item_path(id);
        auto pit = payloads.find(id);
        if (pit != payloads.end()) {
            item.depth = pit->second.value("depth", id_depth(id));
            item.budget = pit->second.contains("budget")
                              ? budget_from_json(pit->second.at("budget"))
                              : next_budget(item.depth, cfg);
            if (pit->second.contains("parent"))
                item.parent_id = pit->second.at("parent").get<std::string>();
        } else {
            // metadata lost; rebuild the item from its persisted model file
            item.depth = id_depth(id);
            item.budget = next_budget(item.depth, cfg);
        }
        // unreadable model files make coverage impossible; abort loudly
        load_model_file(item.model_path);
        if (st == "running") {
            json payload;
            payload["model"] = item.model_path.string();
            payload["depth"] = item.depth;
            payload["budget"] = budget_to_json(item.budget);
            if (item.parent_id) payload["parent"] = *item.parent_id;
            requeue.push_back(json{{"event", "enqueue"},
                                   {"id", item.id},
                                   {"ts", unix_millis()},
                                   {"payload", payload}});
        }
        pending.push_back(std::move(item));
    }
    if (!requeue.empty()) spool.append_events(requeue);

    loop.preload(std::move(pending), std::move(log));
    return loop.run();
}

}  // namespace splitcp
