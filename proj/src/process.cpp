#include "ftn/process.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netinet/in.h>
#include <spawn.h>
#include <stdexcept>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace ftn::proc {

Child& Child::operator=(Child&& o) noexcept {
    if (this != &o) {
        close_fds();
        pid = o.pid;
        ctrl_fd = o.ctrl_fd;
        err_fd = o.err_fd;
        spawned_at = o.spawned_at;
        exited = o.exited;
        wait_status = o.wait_status;
        exited_at = o.exited_at;
        killed_by_us = o.killed_by_us;
        o.pid = -1;
        o.ctrl_fd = -1;
        o.err_fd = -1;
    }
    return *this;
}

Child::~Child() {
    close_fds();
    // Last-resort reaping; the orchestrator reaps explicitly on all paths.
    if (pid > 0 && !exited) {
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &wait_status, 0);
    }
}

bool Child::signaled() const { return WIFSIGNALED(wait_status); }
int Child::exit_code() const { return WIFEXITED(wait_status) ? WEXITSTATUS(wait_status) : -1; }
int Child::term_signal() const { return WIFSIGNALED(wait_status) ? WTERMSIG(wait_status) : 0; }

bool Child::try_reap() {
    if (exited) return true;
    if (pid <= 0) return false;
    int status = 0;
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) {
        exited = true;
        wait_status = status;
        exited_at = Clock::now();
        return true;
    }
    return false;
}

void Child::send_signal(int sig) {
    if (pid > 0 && !exited) {
        killed_by_us = true;
        ::kill(pid, sig);
    }
}

void Child::close_fds() {
    if (ctrl_fd >= 0) ::close(ctrl_fd);
    if (err_fd >= 0) ::close(err_fd);
    ctrl_fd = -1;
    err_fd = -1;
}

namespace {

void set_nonblock(int fd) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

} // namespace

Child spawn(const SpawnSpec& spec) {
    int ctrl_sv[2] = {-1, -1};
    if (spec.want_ctrl &&
        ::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, ctrl_sv) != 0)
        throw std::runtime_error(std::string("socketpair: ") + std::strerror(errno));

    int err_pipe[2];
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        if (ctrl_sv[0] >= 0) ::close(ctrl_sv[0]), ::close(ctrl_sv[1]);
        throw std::runtime_error(std::string("pipe2: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&fa, 1, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_adddup2(&fa, err_pipe[1], 2);
    if (spec.want_ctrl) posix_spawn_file_actions_adddup2(&fa, ctrl_sv[1], 3);

    std::vector<std::string> env_store;
    std::vector<char*> envp;
    for (char** e = environ; *e; ++e) envp.push_back(*e);
    for (const auto& [k, v] : spec.env) {
        env_store.push_back(k + "=" + v);
    }
    if (spec.want_ctrl) env_store.push_back("FTN_CTRL_FD=3");
    for (auto& s : env_store) envp.push_back(s.data());
    envp.push_back(nullptr);

    std::vector<char*> argv;
    argv.push_back(const_cast<char*>(spec.exe.c_str()));
    for (const auto& a : spec.args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    pid_t pid = -1;
    int rc = ::posix_spawn(&pid, spec.exe.c_str(), &fa, nullptr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&fa);
    ::close(err_pipe[1]);
    if (spec.want_ctrl) ::close(ctrl_sv[1]);

    if (rc != 0) {
        ::close(err_pipe[0]);
        if (ctrl_sv[0] >= 0) ::close(ctrl_sv[0]);
        throw std::runtime_error("posix_spawn " + spec.exe + ": " + std::strerror(rc));
    }

    Child c;
    c.pid = pid;
    c.ctrl_fd = ctrl_sv[0];
    c.err_fd = err_pipe[0];
    c.spawned_at = Clock::now();
    if (c.ctrl_fd >= 0) set_nonblock(c.ctrl_fd);
    set_nonblock(c.err_fd);
    return c;
}

uint16_t probe_free_port(Transport t) {
    int fd = ::socket(AF_INET, t == Transport::Tcp ? SOCK_STREAM : SOCK_DGRAM, 0);
    if (fd < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error(std::string("bind: ") + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

PortRegistry& PortRegistry::global() {
    static PortRegistry r;
    return r;
}

uint16_t PortRegistry::lease(Transport t) {
    std::lock_guard<std::mutex> lock(mu_);
    for (int attempt = 0; attempt < 64; ++attempt) {
        uint16_t p = probe_free_port(t);
        if (in_use_.insert(p).second) return p;
    }
    throw std::runtime_error("unable to lease a free port");
}

void PortRegistry::release(uint16_t port) {
    std::lock_guard<std::mutex> lock(mu_);
    in_use_.erase(port);
}

bool PortRegistry::held(uint16_t port) {
    std::lock_guard<std::mutex> lock(mu_);
    return in_use_.count(port) > 0;
}

} // namespace ftn::proc
