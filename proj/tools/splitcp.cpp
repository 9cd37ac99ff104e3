#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "splitcp/coordinator.hpp"
#include "splitcp/dominion.hpp"
#include "splitcp/engine.hpp"
#include "splitcp/oracle.hpp"
#include "splitcp/split.hpp"
#include "splitcp/spool.hpp"

namespace {

using namespace splitcp;

constexpr int kExitSat = 0;
constexpr int kExitUnsat = 1;
constexpr int kExitBudget = 2;
constexpr int kExitInputError = 3;

std::string format_solution(const Model& m, const Assignment& a) {
    std::string out;
    std::size_t flat = 0;
    for (std::size_t ai = 0; ai < m.vars.size(); ++ai) {
        const auto& arr = m.vars[ai];
        if (ai > 0) out += "; ";
        out += arr.name + " = [";
        for (std::int64_t i = 0; i < arr.length; ++i) {
            if (i > 0) out += ", ";
            out += std::to_string(a.values[flat++]);
        }
        out += "]";
    }
    return out;
}

std::filesystem::path self_exe() {
    std::error_code ec;
    auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (!ec) return p;
    return "splitcp";
}

struct SolveArgs {
    std::string model_file;
    std::uint64_t budget_nodes = 0;
    bool has_budget_nodes = false;
    std::uint64_t budget_millis = 0;
    bool has_budget_millis = false;
    std::string mode = "first";
    std::string branching = "nway";
    std::string emit_splits;
    int split_factor = 2;
};

SolveOptions solve_options(const SolveArgs& args) {
    SolveOptions opts;
    if (args.has_budget_nodes) opts.budget.max_nodes = args.budget_nodes;
    if (args.has_budget_millis) opts.budget.max_millis = args.budget_millis;
    opts.mode = args.mode == "all" ? SearchMode::All : SearchMode::First;
    opts.branching =
        args.branching == "2way" ? BranchingScheme::TwoWay : BranchingScheme::NWay;
    return opts;
}

/// Emit the resumed base and part models; returns the resulting file list
/// and the split outcome for printing.
struct EmittedSplits {
    std::filesystem::path resumed;
    std::vector<std::filesystem::path> parts;
    SplitOutcome outcome;
};

EmittedSplits emit_splits(const Model& m, const BudgetExhausted& stop, int factor,
                          const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    EmittedSplits out{dir / "resume.dominion", {}, split_model(m, stop, factor)};
    if (const auto* ss = std::get_if<SplitSet>(&out.outcome)) {
        write_model_file(out.resumed, ss->resumed_base);
        for (std::size_t i = 0; i < ss->parts.size(); ++i) {
            auto p = dir / ("split_" + std::to_string(i + 1) + ".dominion");
            write_model_file(p, ss->parts[i]);
            out.parts.push_back(std::move(p));
        }
    } else {
        write_model_file(out.resumed,
                         std::get<SplitUnavailable>(out.outcome).resumed_base);
    }
    return out;
}

void print_split_files(const EmittedSplits& files) {
    std::cout << "resumed: " << files.resumed.string() << "\n";
    for (const auto& p : files.parts) std::cout << "split: " << p.string() << "\n";
}

int cmd_solve(const SolveArgs& args, bool print_constraints) {
    const SourceModel src = load_model_file(args.model_file);
    SolveOptions opts = solve_options(args);
    bool any = false;
    Outcome out = solve_streaming(src.model, opts, [&](const Assignment& a) {
        any = true;
        std::cout << format_solution(src.model, a) << "\n";
        return true;
    });

    if (std::holds_alternative<SolutionFound>(out)) {
        std::cout << "sat\n";
        return kExitSat;
    }
    if (std::holds_alternative<Exhausted>(out)) {
        std::cout << (any ? "sat\n" : "unsat\n");
        return any ? kExitSat : kExitUnsat;
    }
    const auto& stop = std::get<BudgetExhausted>(out);
    if (!args.emit_splits.empty()) {
        EmittedSplits files =
            emit_splits(src.model, stop, args.split_factor, args.emit_splits);
        if (print_constraints) {
            const std::size_t base_count = src.model.constraints.size();
            const Model* base = nullptr;
            if (const auto* ss = std::get_if<SplitSet>(&files.outcome))
                base = &ss->resumed_base;
            else
                base = &std::get<SplitUnavailable>(files.outcome).resumed_base;
            for (std::size_t i = base_count; i < base->constraints.size(); ++i)
                std::cout << "nogood: " << serialize_constraint(base->constraints[i])
                          << "\n";
            if (const auto* ss = std::get_if<SplitSet>(&files.outcome)) {
                for (std::size_t k = 0; k < ss->parts.size(); ++k) {
                    const Model& part = ss->parts[k];
                    for (std::size_t i = base->constraints.size();
                         i < part.constraints.size(); ++i)
                        std::cout << "part " << k + 1 << ": "
                                  << serialize_constraint(part.constraints[i]) << "\n";
                }
            }
        }
        print_split_files(files);
    }
    std::cout << "budget-exhausted\n";
    return kExitBudget;
}

int cmd_dist_solve(const std::string& model_file, CoordinatorConfig cfg, bool resume) {
    DistResult res;
    if (resume) {
        res = recover(cfg);
    } else {
        const SourceModel src = load_model_file(model_file);
        res = dist_solve(src.model, cfg);
    }
    const Model root = load_model_file(Spool(cfg.spool_dir, false).item_path("root")).model;
    if (cfg.mode == SearchMode::All)
        for (const auto& a : res.solutions)
            std::cout << format_solution(root, a) << "\n";
    else if (res.solution)
        std::cout << format_solution(root, *res.solution) << "\n";
    std::cout << (res.sat ? "sat\n" : "unsat\n");
    return res.sat ? kExitSat : kExitUnsat;
}

int cmd_oracle(const std::string& model_file) {
    const SourceModel src = load_model_file(model_file);
    const auto sols = enumerate_all(src.model);
    for (const auto& a : sols) std::cout << format_solution(src.model, a) << "\n";
    std::cout << "count: " << sols.size() << "\n";
    return kExitSat;
}

int cmd_worker(const std::string& model_file, const std::string& id,
               std::uint64_t budget_nodes, bool has_budget, const std::string& mode,
               int split_factor, const std::string& items_dir,
               const std::string& report_path) {
    WorkerTask task;
    task.item.id = id;
    task.item.model_path = model_file;
    if (has_budget) task.item.budget = Budget::nodes(budget_nodes);
    task.mode = mode == "all" ? SearchMode::All : SearchMode::First;
    task.split_factor = split_factor;
    task.items_dir = items_dir;

    const SourceModel src = load_model_file(model_file);
    WorkerOutcome out = run_worker_task(task);

    nlohmann::json j;
    j["id"] = id;
    switch (out.kind) {
        case WorkerOutcome::Kind::Solved: j["status"] = "solved"; break;
        case WorkerOutcome::Kind::ExhaustedSpace: j["status"] = "exhausted"; break;
        case WorkerOutcome::Kind::SplitWritten: j["status"] = "split"; break;
        case WorkerOutcome::Kind::Crashed:
            throw ModelError("worker task failed");
    }
    nlohmann::json sols = nlohmann::json::array();
    for (const auto& a : out.solutions) sols.push_back(assignment_to_json(src.model, a));
    j["solutions"] = std::move(sols);
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : out.part_ids) parts.push_back(p);
    j["parts"] = std::move(parts);
    j["stats"] = {{"nodes", out.stats.nodes},
                  {"propagations", out.stats.propagations},
                  {"wall_millis", out.stats.wall_millis},
                  {"solutions_emitted", out.stats.solutions_emitted}};
    Spool::write_json_atomic(report_path, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constraint solving by model splitting"};
    app.require_subcommand(1);

    // solve
    SolveArgs sargs;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a model file");
    solve_cmd->add_option("model", sargs.model_file, "Model file")->required();
    auto* bn = solve_cmd->add_option("--budget-nodes", sargs.budget_nodes,
                                     "Node budget");
    auto* bm = solve_cmd->add_option("--budget-millis", sargs.budget_millis,
                                     "Wall-clock budget in milliseconds");
    solve_cmd->add_option("--mode", sargs.mode, "first|all")
        ->check(CLI::IsMember({"first", "all"}));
    solve_cmd->add_option("--branching", sargs.branching, "2way|nway")
        ->check(CLI::IsMember({"2way", "nway"}));
    solve_cmd->add_option("--emit-splits", sargs.emit_splits,
                          "Write split models here on budget exhaustion");
    solve_cmd->add_option("--split-factor", sargs.split_factor, "Splitting factor")
        ->check(CLI::PositiveNumber);

    // split
    SolveArgs xargs;
    std::uint64_t at_nodes = 0;
    auto* split_cmd =
        app.add_subcommand("split", "Run to a stop point and emit split models");
    split_cmd->add_option("model", xargs.model_file, "Model file")->required();
    split_cmd->add_option("--at-nodes", at_nodes, "Stop after this many nodes")
        ->required();
    split_cmd->add_option("--split-factor", xargs.split_factor, "Splitting factor")
        ->check(CLI::PositiveNumber);
    split_cmd->add_option("--out", xargs.emit_splits, "Output directory")->required();
    split_cmd->add_option("--branching", xargs.branching, "2way|nway")
        ->check(CLI::IsMember({"2way", "nway"}));

    // dist-solve
    std::string dist_model;
    CoordinatorConfig cfg;
    std::string dist_mode = "first";
    std::string spool_dir;
    bool resume = false;
    std::uint64_t max_budget = 0;
    auto* dist_cmd = app.add_subcommand("dist-solve",
                                        "Distributed solve over a worker pool");
    auto* dist_model_opt = dist_cmd->add_option("model", dist_model, "Model file");
    dist_cmd->add_option("--workers", cfg.worker_count, "Worker processes")
        ->check(CLI::PositiveNumber);
    dist_cmd->add_option("--split-factor", cfg.split_factor, "Splitting factor n >= 2")
        ->check(CLI::Range(2, 1000));
    dist_cmd->add_option("--initial-budget-nodes", cfg.initial_budget_nodes,
                         "Root node budget");
    dist_cmd->add_option("--budget-growth", cfg.budget_growth,
                         "Geometric budget growth factor g >= 1");
    auto* maxb = dist_cmd->add_option("--max-budget-nodes", max_budget,
                                      "Cap on per-item node budgets");
    dist_cmd->add_option("--mode", dist_mode, "first|all")
        ->check(CLI::IsMember({"first", "all"}));
    dist_cmd->add_option("--spool", spool_dir, "Spool directory")->required();
    dist_cmd->add_flag("--resume", resume, "Resume from an existing spool");

    // oracle (test tooling)
    std::string oracle_model;
    auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force enumeration");
    oracle_cmd->add_option("model", oracle_model, "Model file")->required();
    oracle_cmd->group("");

    // worker (spawned by dist-solve)
    std::string w_model, w_id, w_mode = "first", w_items, w_report;
    std::uint64_t w_budget = 0;
    int w_factor = 2;
    auto* worker_cmd = app.add_subcommand("worker", "Run one work item");
    worker_cmd->add_option("--model", w_model)->required();
    worker_cmd->add_option("--id", w_id)->required();
    auto* wb = worker_cmd->add_option("--budget-nodes", w_budget);
    worker_cmd->add_option("--mode", w_mode)->check(CLI::IsMember({"first", "all"}));
    worker_cmd->add_option("--split-factor", w_factor);
    worker_cmd->add_option("--items-dir", w_items)->required();
    worker_cmd->add_option("--report", w_report)->required();
    worker_cmd->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInputError;
    }

    try {
        if (solve_cmd->parsed()) {
            sargs.has_budget_nodes = bn->count() > 0;
            sargs.has_budget_millis = bm->count() > 0;
            return cmd_solve(sargs, /*print_constraints=*/false);
        }
        if (split_cmd->parsed()) {
            xargs.has_budget_nodes = true;
            xargs.budget_nodes = at_nodes;
            xargs.mode = "first";
            return cmd_solve(xargs, /*print_constraints=*/true);
        }
        if (dist_cmd->parsed()) {
            cfg.spool_dir = spool_dir;
            cfg.mode = dist_mode == "all" ? SearchMode::All : SearchMode::First;
            if (maxb->count() > 0) cfg.max_budget_nodes = max_budget;
            cfg.worker_exe = self_exe();
            if (resume) {
                // recorded config fills anything not given on the command line
                if (auto saved = load_spool_config(spool_dir)) {
                    CoordinatorConfig merged = *saved;
                    merged.spool_dir = cfg.spool_dir;
                    merged.worker_exe = cfg.worker_exe;
                    for (const auto* opt :
                         {"--workers", "--split-factor", "--initial-budget-nodes",
                          "--budget-growth", "--mode", "--max-budget-nodes"}) {
                        if (dist_cmd->get_option(opt)->count() == 0) continue;
                        if (std::string(opt) == "--workers")
                            merged.worker_count = cfg.worker_count;
                        else if (std::string(opt) == "--split-factor")
                            merged.split_factor = cfg.split_factor;
                        else if (std::string(opt) == "--initial-budget-nodes")
                            merged.initial_budget_nodes = cfg.initial_budget_nodes;
                        else if (std::string(opt) == "--budget-growth")
                            merged.budget_growth = cfg.budget_growth;
                        else if (std::string(opt) == "--mode")
                            merged.mode = cfg.mode;
                        else
                            merged.max_budget_nodes = cfg.max_budget_nodes;
                    }
                    cfg = merged;
                }
            } else if (dist_model_opt->count() == 0) {
                std::cerr << "error: a model file is required unless --resume is given\n";
                return kExitInputError;
            }
            return cmd_dist_solve(dist_model, cfg, resume);
        }
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_model);
        if (worker_cmd->parsed())
            return cmd_worker(w_model, w_id, w_budget, wb->count() > 0, w_mode,
                              w_factor, w_items, w_report);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
