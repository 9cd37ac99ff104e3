#include "splitcp/process.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splitcp {

namespace {

void redirect(int fd, const std::filesystem::path& file) {
    int out = ::open(file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (out < 0) _exit(126);
    ::dup2(out, fd);
    ::close(out);
}

int decode_status(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return 255;
}

}  // namespace

ChildProcess::ChildProcess(ChildProcess&& other) noexcept
    : pid_(other.pid_), own_group_(other.own_group_), exit_code_(other.exit_code_) {
    other.pid_ = -1;
}

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
    if (this != &other) {
        if (running()) {
            kill_hard();
            wait();
        }
        pid_ = other.pid_;
        own_group_ = other.own_group_;
        exit_code_ = other.exit_code_;
        other.pid_ = -1;
    }
    return *this;
}

ChildProcess::~ChildProcess() {
    if (running()) {
        kill_hard();
        wait();
    }
}

ChildProcess ChildProcess::spawn(const std::vector<std::string>& argv,
                                 const SpawnOptions& opts) {
    if (argv.empty()) throw std::invalid_argument("spawn: empty argv");
    std::vector<char*> cargs;
    cargs.reserve(argv.size() + 1);
    for (const auto& a : argv) cargs.push_back(const_cast<char*>(a.c_str()));
    cargs.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0)
        throw std::runtime_error(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        if (opts.new_session) ::setsid();
        if (opts.stdout_file) redirect(STDOUT_FILENO, *opts.stdout_file);
        if (opts.stderr_file) redirect(STDERR_FILENO, *opts.stderr_file);
        ::execvp(cargs[0], cargs.data());
        _exit(127);
    }
    ChildProcess child;
    child.pid_ = pid;
    child.own_group_ = opts.new_session;
    return child;
}

std::optional<int> ChildProcess::try_wait() {
    if (exit_code_) return exit_code_;
    if (pid_ <= 0) return std::nullopt;
    int status = 0;
    pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) exit_code_ = decode_status(status);
    return exit_code_;
}

int ChildProcess::wait() {
    if (exit_code_) return *exit_code_;
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    exit_code_ = decode_status(status);
    return *exit_code_;
}

void ChildProcess::kill_hard() {
    if (pid_ <= 0 || exit_code_) return;
    if (own_group_)
        ::kill(-pid_, SIGKILL);
    else
        ::kill(pid_, SIGKILL);
}

CommandResult run_command(const std::vector<std::string>& argv) {
    static std::atomic<unsigned> seq{0};
    const auto dir = std::filesystem::temp_directory_path();
    const auto tag =
        std::to_string(::getpid()) + "." + std::to_string(seq.fetch_add(1));
    const auto out_path = dir / ("splitcp-out." + tag);
    const auto err_path = dir / ("splitcp-err." + tag);

    SpawnOptions opts;
    opts.stdout_file = out_path;
    opts.stderr_file = err_path;
    ChildProcess child = ChildProcess::spawn(argv, opts);
    CommandResult res;
    res.exit_code = child.wait();

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    res.out = slurp(out_path);
    res.err = slurp(err_path);
    std::error_code ec;
    std::filesystem::remove(out_path, ec);
    std::filesystem::remove(err_path, ec);
    return res;
}

}  // namespace splitcp
