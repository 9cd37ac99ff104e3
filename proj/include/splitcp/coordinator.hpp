#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "splitcp/engine.hpp"
#include "splitcp/model.hpp"
#include "splitcp/spool.hpp"

namespace splitcp {

struct CoordinatorConfig {
    int split_factor = 2;       // n >= 2
    int worker_count = 2;       // >= 1
    std::uint64_t initial_budget_nodes = 1000;
    double budget_growth = 2.0;  // g >= 1
    std::optional<std::uint64_t> max_budget_nodes;
    SearchMode mode = SearchMode::First;
    std::filesystem::path spool_dir;
    /// Binary spawned for isolated workers (its `worker` subcommand).
    std::filesystem::path worker_exe;
};

/// Geometric budget schedule: initial * g^depth, capped when a maximum is
/// configured.
Budget next_budget(int depth, const CoordinatorConfig& cfg);

/// What one worker does with a claimed item: solve its model file under
/// the item budget; on a budget stop, write the split models next to it.
struct WorkerTask {
    WorkItem item;
    SearchMode mode = SearchMode::First;
    int split_factor = 2;
    std::filesystem::path items_dir;
};

struct WorkerOutcome {
    enum class Kind { Solved, ExhaustedSpace, SplitWritten, Crashed };
    Kind kind = Kind::Crashed;
    std::vector<Assignment> solutions;  // solved: one; All mode: all found
    std::vector<std::string> part_ids;  // SplitWritten
    Stats stats;
};

/// The worker body, shared by the `worker` subcommand and by in-process
/// test runners. Reads the item's model file; may write part model files.
WorkerOutcome run_worker_task(const WorkerTask& t);

/// Injected worker execution for tests. Items run one at a time when a
/// runner is injected; the default (no runner) spawns isolated worker
/// processes, up to worker_count at once.
using WorkerRunner = std::function<WorkerOutcome(const WorkerTask&)>;

struct DistStats {
    std::uint64_t nodes = 0;
    std::uint64_t propagations = 0;
    int items_run = 0;
    int splits = 0;
    std::uint64_t wall_millis = 0;
};

struct DistResult {
    bool sat = false;
    std::optional<Assignment> solution;
    std::vector<Assignment> solutions;  // All mode: the complete log
    DistStats stats;
};

/// Spool-backed first-solution (or all-solutions) distributed solve:
/// seed the spool with the root item, let workers claim items, split on
/// budget exhaustion, stop on the first solution (First mode) or on a
/// drained spool. Every returned solution is checked against the original
/// model with eval_constraint.
DistResult dist_solve(const Model& m, const CoordinatorConfig& cfg,
                      const WorkerRunner& runner = {});

/// Resume from a previously written spool: pending and running items are
/// re-enqueued; a recorded result short-circuits without running workers.
DistResult recover(const CoordinatorConfig& cfg, const WorkerRunner& runner = {});

void save_spool_config(const Spool& spool, const CoordinatorConfig& cfg);
std::optional<CoordinatorConfig> load_spool_config(
    const std::filesystem::path& spool_dir);

}  // namespace splitcp
