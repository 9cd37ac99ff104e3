#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitcp/engine.hpp"
#include "splitcp/model.hpp"

namespace splitcp {

/// A persisted unit of distribution: one split model plus its position in
/// the split tree and the budget it runs under.
struct WorkItem {
    std::string id;
    std::filesystem::path model_path;
    int depth = 0;
    Budget budget;
    std::optional<std::string> parent_id;
};

/// Directory layout of a solving run: model files under items/, worker
/// result messages under reports/, a write-ahead journal of item state
/// transitions, and result.json on completion. The spool alone
/// reconstructs the run.
class Spool {
public:
    Spool(std::filesystem::path dir, bool create);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path items_dir() const { return dir_ / "items"; }
    std::filesystem::path reports_dir() const { return dir_ / "reports"; }
    std::filesystem::path journal_path() const { return dir_ / "journal.ndjson"; }
    std::filesystem::path result_path() const { return dir_ / "result.json"; }
    std::filesystem::path config_path() const { return dir_ / "config.json"; }

    std::filesystem::path item_path(const std::string& id) const {
        return items_dir() / (id + ".dominion");
    }
    std::filesystem::path report_path(const std::string& id) const {
        return reports_dir() / (id + ".json");
    }

    void write_model(const std::string& id, const Model& m) const;

    /// Append journal events as one flushed, fsynced write.
    void append_events(const std::vector<nlohmann::json>& events);

    /// Replay the journal. A torn final line (crash mid-append) is
    /// dropped; any other unreadable line aborts with a diagnostic.
    std::vector<nlohmann::json> replay_journal() const;

    static void write_json_atomic(const std::filesystem::path& path,
                                  const nlohmann::json& j);
    static std::optional<nlohmann::json> read_json(const std::filesystem::path& path);

private:
    std::filesystem::path dir_;
};

nlohmann::json assignment_to_json(const Model& m, const Assignment& a);
Assignment assignment_from_json(const Model& m, const nlohmann::json& j);

nlohmann::json budget_to_json(const Budget& b);
Budget budget_from_json(const nlohmann::json& j);

std::int64_t unix_millis();

}  // namespace splitcp
