#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace splitcp {

struct SpawnOptions {
    std::optional<std::filesystem::path> stdout_file;
    std::optional<std::filesystem::path> stderr_file;
    /// Start the child in its own session (own process group), so the
    /// whole tree can be killed together.
    bool new_session = false;
};

/// A spawned child process. Exit codes follow the shell convention:
/// 0..255 for normal exits, 128 + signal for signalled termination.
class ChildProcess {
public:
    ChildProcess() = default;
    ChildProcess(ChildProcess&& other) noexcept;
    ChildProcess& operator=(ChildProcess&& other) noexcept;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;
    ~ChildProcess();

    static ChildProcess spawn(const std::vector<std::string>& argv,
                              const SpawnOptions& opts = {});

    /// Nonblocking reap; exit code once the child has finished.
    std::optional<int> try_wait();

    /// Blocking reap.
    int wait();

    /// SIGKILL the child (and its group when started in a new session).
    void kill_hard();

    bool running() const { return pid_ > 0 && !exit_code_; }
    int pid() const { return pid_; }

private:
    int pid_ = -1;
    bool own_group_ = false;
    std::optional<int> exit_code_;
};

/// Run to completion with stdout/stderr captured.
struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CommandResult run_command(const std::vector<std::string>& argv);

}  // namespace splitcp
