#include "splitcp/spool.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splitcp/dominion.hpp"

namespace splitcp {

using nlohmann::json;

Spool::Spool(std::filesystem::path dir, bool create) : dir_(std::move(dir)) {
    if (create) {
        std::filesystem::create_directories(items_dir());
        std::filesystem::create_directories(reports_dir());
    } else if (!std::filesystem::is_directory(dir_)) {
        throw ModelError("spool directory " + dir_.string() + " does not exist");
    }
}

void Spool::write_model(const std::string& id, const Model& m) const {
    write_model_file(item_path(id), m);
}

void Spool::append_events(const std::vector<json>& events) {
    if (events.empty()) return;
    std::string buf;
    for (const auto& e : events) {
        buf += e.dump();
        buf += '\n';
    }
    int fd = ::open(journal_path().c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd < 0)
        throw ModelError("cannot open journal " + journal_path().string() + ": " +
                         std::strerror(errno));
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
        ssize_t w = ::write(fd, p, left);
        if (w < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw ModelError("journal write failed: " + std::string(std::strerror(errno)));
        }
        p += w;
        left -= static_cast<std::size_t>(w);
    }
    ::fsync(fd);
    ::close(fd);
}

std::vector<json> Spool::replay_journal() const {
    std::vector<json> out;
    std::ifstream in(journal_path());
    if (!in) return out;
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        json j = json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) {
            if (i + 1 == lines.size()) break;  // torn tail from a crash
            throw ModelError("corrupt journal line " + std::to_string(i + 1) +
                             " in " + journal_path().string());
        }
        out.push_back(std::move(j));
    }
    return out;
}

void Spool::write_json_atomic(const std::filesystem::path& path, const json& j) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ModelError("cannot write " + tmp.string());
        out << j.dump(2) << "\n";
        out.flush();
        if (!out) throw ModelError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::optional<json> Spool::read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

json assignment_to_json(const Model& m, const Assignment& a) {
    json out = json::object();
    std::size_t flat = 0;
    for (const auto& arr : m.vars) {
        json vals = json::array();
        for (std::int64_t i = 0; i < arr.length; ++i)
            vals.push_back(a.values.at(flat++));
        out[arr.name] = std::move(vals);
    }
    return out;
}

Assignment assignment_from_json(const Model& m, const json& j) {
    Assignment a;
    for (const auto& arr : m.vars) {
        if (!j.contains(arr.name))
            throw ModelError("solution is missing array '" + arr.name + "'");
        const auto& vals = j.at(arr.name);
        if (static_cast<std::int64_t>(vals.size()) != arr.length)
            throw ModelError("solution length mismatch for '" + arr.name + "'");
        for (const auto& v : vals) a.values.push_back(v.get<std::int64_t>());
    }
    return a;
}

json budget_to_json(const Budget& b) {
    json out = json::object();
    if (b.max_nodes) out["nodes"] = *b.max_nodes;
    if (b.max_millis) out["millis"] = *b.max_millis;
    return out;
}

Budget budget_from_json(const json& j) {
    Budget b;
    if (j.contains("nodes")) b.max_nodes = j.at("nodes").get<std::uint64_t>();
    if (j.contains("millis")) b.max_millis = j.at("millis").get<std::uint64_t>();
    return b;
}

std::int64_t unix_millis() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace splitcp
