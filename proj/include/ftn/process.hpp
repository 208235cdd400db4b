#pragma once

#include <chrono>
#include <csignal>
#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ftn::proc {

using Clock = std::chrono::steady_clock;

enum class Transport { Tcp, Udp };

struct SpawnSpec {
    std::string exe;
    std::vector<std::string> args; // argv[1..]
    std::vector<std::pair<std::string, std::string>> env;
    bool want_ctrl = true; // give the child a control channel on fd 3
};

// A spawned peer process plus the parent-side ends of its channels.
// stdout/stdin are /dev/null; stderr is a pipe drained by the supervisor.
class Child {
public:
    Child() = default;
    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;
    Child(Child&& o) noexcept { *this = std::move(o); }
    Child& operator=(Child&& o) noexcept;
    ~Child();

    pid_t pid = -1;
    int ctrl_fd = -1; // -1 when want_ctrl was false
    int err_fd = -1;
    Clock::time_point spawned_at{};

    bool exited = false;
    int wait_status = 0;
    Clock::time_point exited_at{};
    bool killed_by_us = false;

    bool signaled() const;
    int exit_code() const;   // meaningful when !signaled()
    int term_signal() const; // meaningful when signaled()

    // Nonblocking reap; returns true once the child has been collected.
    bool try_reap();
    void send_signal(int sig);
    void close_fds();
};

// Throws std::runtime_error on spawn failure (campaign-level error).
Child spawn(const SpawnSpec& spec);

// Asks the OS for a currently free loopback port of the given transport.
uint16_t probe_free_port(Transport t);

// Process-wide lease registry so concurrent workers never hold the same
// port simultaneously.
class PortRegistry {
public:
    static PortRegistry& global();
    uint16_t lease(Transport t);
    void release(uint16_t port);
    bool held(uint16_t port);

private:
    std::mutex mu_;
    std::set<uint16_t> in_use_;
};

class PortLease {
public:
    explicit PortLease(Transport t) : port_(PortRegistry::global().lease(t)) {}
    ~PortLease() {
        if (port_) PortRegistry::global().release(port_);
    }
    PortLease(const PortLease&) = delete;
    PortLease& operator=(const PortLease&) = delete;
    uint16_t port() const { return port_; }

private:
    uint16_t port_;
};

} // namespace ftn::proc
