#include "ftn/orchestrator.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "ftn/control.hpp"
#include "ftn/coverage_runtime.hpp"
#include "ftn/fault_runtime.hpp"

namespace ftn::orch {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::CleanExit: return "CleanExit";
        case Verdict::TargetCrash: return "TargetCrash";
        case Verdict::WeirdPeerCrashPreConnect: return "WeirdPeerCrashPreConnect";
        case Verdict::WeirdPeerCrashPostConnect: return "WeirdPeerCrashPostConnect";
        case Verdict::Timeout: return "Timeout";
    }
    return "?";
}

std::optional<Verdict> parse_verdict(const std::string& name) {
    for (Verdict v : {Verdict::CleanExit, Verdict::TargetCrash, Verdict::WeirdPeerCrashPreConnect,
                      Verdict::WeirdPeerCrashPostConnect, Verdict::Timeout})
        if (name == verdict_name(v)) return v;
    return std::nullopt;
}

namespace {

using proc::Clock;

int ms_between(Clock::time_point a, Clock::time_point b) {
    return static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(b - a).count());
}

std::string substitute_placeholders(std::string s, const std::string& addr, uint16_t port) {
    auto replace_all = [&s](const std::string& from, const std::string& to) {
        size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("{ADDR}", addr);
    replace_all("{PORT}", std::to_string(port));
    return s;
}

constexpr size_t kStderrCap = 65536;

// One supervised peer process plus its channel state.
struct LivePeer {
    const PeerSpec* spec = nullptr;
    proc::Child child;
    bool spawned = false;
    bool ctrl_open = false;
    bool err_open = false;
    ctrl::Decoder decoder;
    std::string err_buf;
    bool connecting_seen = false;
    bool connected_seen = false;
    std::optional<Clock::time_point> term_at;
    std::optional<Clock::time_point> kill_at;

    void start(const std::string& addr, uint16_t port,
               std::vector<std::pair<std::string, std::string>> extra_env) {
        proc::SpawnSpec ss;
        ss.exe = spec->exe;
        for (const auto& a : spec->args) ss.args.push_back(substitute_placeholders(a, addr, port));
        ss.env = spec->env;
        for (auto& kv : extra_env) ss.env.push_back(std::move(kv));
        child = proc::spawn(ss);
        spawned = true;
        ctrl_open = child.ctrl_fd >= 0;
        err_open = child.err_fd >= 0;
    }

    // Escalating termination. Returns an error string once a process refuses
    // to die even after SIGKILL.
    std::optional<std::string> ensure_dying(Clock::time_point now) {
        if (!spawned || child.exited) return std::nullopt;
        if (!term_at) {
            term_at = now;
            child.send_signal(SIGTERM);
        } else if (!kill_at && ms_between(*term_at, now) >= 60) {
            kill_at = now;
            child.send_signal(SIGKILL);
        } else if (kill_at && ms_between(*kill_at, now) >= 2000) {
            return "process " + spec->exe + " survived SIGKILL for 2s";
        }
        return std::nullopt;
    }
};

// Drains a nonblocking fd into `sink` (capped). Returns false once EOF.
bool drain_into(int fd, std::string& sink) {
    char buf[4096];
    while (true) {
        ssize_t n = ::read(fd, buf, sizeof buf);
        if (n > 0) {
            if (sink.size() < kStderrCap) sink.append(buf, buf + std::min<size_t>(n, kStderrCap - sink.size()));
            continue;
        }
        if (n == 0) return false;
        return !(errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR);
    }
}

bool drain_ctrl(LivePeer& p, std::vector<ctrl::Message>& out) {
    char buf[1024];
    while (true) {
        ssize_t n = ::read(p.child.ctrl_fd, buf, sizeof buf);
        if (n > 0) {
            p.decoder.feed(reinterpret_cast<uint8_t*>(buf), static_cast<size_t>(n));
            continue;
        }
        bool open = !(n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR));
        while (auto m = p.decoder.next()) out.push_back(std::move(*m));
        return open;
    }
}

void make_sparse_file(const std::string& path, size_t size) {
    int fd = ::open(path.c_str(), O_CREAT | O_TRUNC | O_WRONLY | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot create " + path + ": " + std::strerror(errno));
    if (::ftruncate(fd, static_cast<off_t>(size)) != 0) {
        ::close(fd);
        throw std::runtime_error("cannot size " + path + ": " + std::strerror(errno));
    }
    ::close(fd);
}

ExitStatus exit_status_of(const LivePeer& p) {
    ExitStatus st;
    st.spawned = p.spawned;
    if (p.spawned && p.child.exited) {
        st.signaled = p.child.signaled();
        st.code = st.signaled ? p.child.term_signal() : p.child.exit_code();
        st.by_us = p.child.killed_by_us;
    }
    return st;
}

struct SuperviseResult {
    bool retry_bind = false;
    bool timed_out = false;
    int ready_latency_ms = -1;
    int duration_ms = 0;
    std::vector<RunEvent> events;
};

// Core event loop shared by the pair runner and the server-only runner.
// `client` may be null (server-only mode); `on_ready` fires exactly once
// when the server is ready (or its grace expired) and is where the caller
// spawns the client peer or plays the client itself.
SuperviseResult supervise(LivePeer& server, LivePeer* client, const Timeouts& timeouts,
                          const std::function<void()>& on_ready) {
    SuperviseResult res;
    const Clock::time_point t0 = server.child.spawned_at;
    res.events.push_back({"server_spawned", 0});

    const auto run_deadline = t0 + std::chrono::milliseconds(timeouts.run_ms);
    int grace = server.spec->startup_grace_ms > 0 ? server.spec->startup_grace_ms : timeouts.ready_ms;
    const auto ready_deadline = t0 + std::chrono::milliseconds(grace);

    bool ready_fired = false;
    bool client_cancelled = false;
    std::optional<Clock::time_point> first_exit;
    std::optional<std::string> term_error;

    auto peer_name = [&](const LivePeer& p) { return &p == &server ? "server" : "client"; };

    // In server-only mode the caller plays the client inside on_ready; once
    // that body returns, the "client" is done and the drain grace starts.
    auto fire_ready = [&] {
        on_ready();
        if (!client) first_exit = Clock::now();
    };

    auto handle_messages = [&](LivePeer& p, std::vector<ctrl::Message>& msgs, Clock::time_point now) {
        for (auto& m : msgs) {
            switch (m.kind) {
                case ctrl::MsgKind::Ready:
                    if (&p == &server && !ready_fired) {
                        res.ready_latency_ms = ms_between(t0, now);
                        res.events.push_back({"ready", res.ready_latency_ms});
                        ready_fired = true;
                        fire_ready();
                        if (client && client->spawned)
                            res.events.push_back({"client_spawned", ms_between(t0, Clock::now())});
                    }
                    break;
                case ctrl::MsgKind::Connecting:
                    p.connecting_seen = true;
                    res.events.push_back({std::string(peer_name(p)) + "_connecting", ms_between(t0, now)});
                    break;
                case ctrl::MsgKind::Connected:
                    p.connected_seen = true;
                    res.events.push_back({std::string(peer_name(p)) + "_connected", ms_between(t0, now)});
                    break;
                case ctrl::MsgKind::PeerError:
                    res.events.push_back({std::string(peer_name(p)) + "_error:" + m.error_text(),
                                          ms_between(t0, now)});
                    break;
            }
        }
        msgs.clear();
    };

    while (true) {
        Clock::time_point now = Clock::now();

        for (LivePeer* p : {&server, client}) {
            if (!p || !p->spawned || p->child.exited) continue;
            if (p->child.try_reap())
                res.events.push_back({std::string(peer_name(*p)) + "_exit", ms_between(t0, Clock::now())});
        }

        // A server that lost the port race reports kBindFailureExit before
        // Ready; rerun on a fresh port.
        if (server.child.exited && !ready_fired && !server.child.signaled() &&
            server.child.exit_code() == kBindFailureExit) {
            res.retry_bind = true;
            return res;
        }

        bool client_pending = client && !client_cancelled && !client->spawned;
        if (server.child.exited && client_pending) {
            // Server died before readiness: nothing to connect to.
            client_cancelled = true;
            client_pending = false;
        }

        bool server_done = server.child.exited;
        bool client_done = !client || client_cancelled || (client->spawned && client->child.exited);
        if (server_done && client_done) break;

        if (!first_exit) {
            if (server.child.exited) first_exit = server.child.exited_at;
            if (client && client->spawned && client->child.exited) first_exit = client->child.exited_at;
        }

        if (!ready_fired && now >= ready_deadline && !server.child.exited) {
            res.events.push_back({"ready_fallback", ms_between(t0, now)});
            ready_fired = true;
            fire_ready();
            if (client && client->spawned)
                res.events.push_back({"client_spawned", ms_between(t0, Clock::now())});
        }

        bool want_kill = false;
        if (now >= run_deadline) {
            if (!res.timed_out) res.events.push_back({"run_timeout", ms_between(t0, now)});
            res.timed_out = true;
            want_kill = true;
        }
        if (first_exit && now >= *first_exit + std::chrono::milliseconds(timeouts.drain_ms)) want_kill = true;

        if (want_kill) {
            for (LivePeer* p : {&server, client}) {
                if (!p) continue;
                if (auto err = p->ensure_dying(now)) term_error = err;
            }
            if (term_error) throw std::runtime_error(*term_error);
        }

        // Wake on channel traffic, peer exit (fd HUP), or the next deadline.
        struct pollfd fds[4];
        int nfds = 0;
        auto add_fd = [&](int fd) {
            fds[nfds].fd = fd;
            fds[nfds].events = POLLIN;
            fds[nfds].revents = 0;
            ++nfds;
        };
        for (LivePeer* p : {&server, client}) {
            if (!p || !p->spawned) continue;
            if (p->ctrl_open) add_fd(p->child.ctrl_fd);
            if (p->err_open) add_fd(p->child.err_fd);
        }

        auto next_deadline = run_deadline;
        if (!ready_fired) next_deadline = std::min(next_deadline, ready_deadline);
        if (first_exit) next_deadline = std::min(next_deadline, *first_exit + std::chrono::milliseconds(timeouts.drain_ms));
        int wait_ms = std::clamp(ms_between(now, next_deadline), 0, 20);
        // Once a peer exited or signals are pending, tick fast so reaping is prompt.
        if (first_exit || server.term_at || (client && client->term_at)) wait_ms = std::min(wait_ms, 2);
        // A peer whose channels all hit EOF is in its exit path: reap eagerly
        // instead of sleeping out a poll tick.
        bool reap_pending = false;
        for (LivePeer* p : {&server, client})
            if (p && p->spawned && !p->child.exited && !p->ctrl_open && !p->err_open) reap_pending = true;
        if (reap_pending) {
            ::usleep(100);
            continue;
        }
        if (nfds == 0) {
            ::usleep(static_cast<useconds_t>(std::max(wait_ms, 1)) * 1000);
        } else {
            ::poll(fds, static_cast<nfds_t>(nfds), std::max(wait_ms, 1));
        }

        std::vector<ctrl::Message> msgs;
        for (LivePeer* p : {&server, client}) {
            if (!p || !p->spawned) continue;
            if (p->ctrl_open && !drain_ctrl(*p, msgs)) p->ctrl_open = false;
            handle_messages(*p, msgs, Clock::now());
            if (p->err_open && !drain_into(p->child.err_fd, p->err_buf)) p->err_open = false;
        }
    }

    // Children are gone; collect any stderr still buffered in the pipes.
    for (LivePeer* p : {&server, client}) {
        if (!p || !p->spawned) continue;
        if (p->err_open && !drain_into(p->child.err_fd, p->err_buf)) p->err_open = false;
        std::vector<ctrl::Message> msgs;
        if (p->ctrl_open && !drain_ctrl(*p, msgs)) p->ctrl_open = false;
        handle_messages(*p, msgs, Clock::now());
    }

    res.duration_ms = ms_between(t0, Clock::now());
    return res;
}

} // namespace

Orchestrator::Orchestrator(PeerSpec weird, PeerSpec target, Timeouts timeouts, std::string workdir,
                           Transport transport)
    : weird_(std::move(weird)), target_(std::move(target)), timeouts_(timeouts),
      workdir_(std::move(workdir)), transport_(transport) {
    if (weird_.role != Role::WeirdPeer || target_.role != Role::TargetPeer)
        throw std::runtime_error("orchestrator needs exactly one weird peer and one target peer");
    if (weird_.side == target_.side)
        throw std::runtime_error("one peer must be the server and the other the client");
    ensure_dir(workdir_);
}

RunOutcome Orchestrator::run_once(const fault::ProgramFile& program, RunMode mode, const RunOptions& opts) {
    const std::string program_path = workdir_ + "/program.ftnp";
    const std::string cov_path = workdir_ + "/cov.map";
    const std::string hits_path = workdir_ + "/hits.tsv";
    program.save(program_path);

    auto weird_env = [&] {
        std::vector<std::pair<std::string, std::string>> env;
        const char* mode_s = mode == RunMode::Faulting ? "faulting" : (mode == RunMode::Counting ? "counting" : "off");
        env.emplace_back(fault::kEnvMode, mode_s);
        if (!program.entries.empty()) env.emplace_back(fault::kEnvProgram, program_path);
        if (mode == RunMode::Counting) env.emplace_back(fault::kEnvHitsOut, hits_path);
        if (opts.want_manifest) env.emplace_back(fault::kEnvManifestOut, manifest_path());
        if (!opts.record_path.empty()) env.emplace_back(kEnvRecord, opts.record_path);
        return env;
    };
    auto target_env = [&] {
        std::vector<std::pair<std::string, std::string>> env;
        env.emplace_back(cov::kEnvMapPath, cov_path);
        return env;
    };

    for (int attempt = 0; attempt < 4; ++attempt) {
        proc::PortLease lease(transport_);
        make_sparse_file(cov_path, cov::kMapSize);
        if (file_exists(hits_path)) ::unlink(hits_path.c_str());

        LivePeer server, client;
        server.spec = weird_.side == Side::Server ? &weird_ : &target_;
        client.spec = weird_.side == Side::Server ? &target_ : &weird_;

        const std::string addr = "127.0.0.1";
        server.start(addr, lease.port(), server.spec->role == Role::WeirdPeer ? weird_env() : target_env());

        SuperviseResult sr = supervise(server, &client, timeouts_, [&] {
            client.start(addr, lease.port(), client.spec->role == Role::WeirdPeer ? weird_env() : target_env());
        });
        if (sr.retry_bind) continue;

        LivePeer& weird_peer = weird_.side == Side::Server ? server : client;
        LivePeer& target_peer = weird_.side == Side::Server ? client : server;

        RunOutcome out;
        out.duration_ms = sr.duration_ms;
        out.ready_latency_ms = sr.ready_latency_ms;
        out.events = std::move(sr.events);
        out.weird_exit = exit_status_of(weird_peer);
        out.target_exit = exit_status_of(target_peer);
        out.target_stderr = target_peer.err_buf;

        if (out.weird_exit.crashed() && !weird_peer.connected_seen)
            out.verdict = Verdict::WeirdPeerCrashPreConnect;
        else if (out.target_exit.spawned && out.target_exit.signaled && !out.target_exit.by_us)
            out.verdict = Verdict::TargetCrash;
        else if (out.weird_exit.crashed())
            out.verdict = Verdict::WeirdPeerCrashPostConnect;
        else if (sr.timed_out)
            out.verdict = Verdict::Timeout;
        else
            out.verdict = Verdict::CleanExit;

        if (out.verdict != Verdict::WeirdPeerCrashPreConnect || opts.keep_coverage_on_discard)
            out.coverage = read_file(cov_path);

        if (out.verdict == Verdict::TargetCrash)
            out.crash_frames = parse_crash_record(out.target_stderr, &out.crash_bug);

        if (mode == RunMode::Counting && file_exists(hits_path))
            out.hits = fault::parse_hits(read_text_file(hits_path));

        return out;
    }
    throw std::runtime_error("server kept losing the port race (bind failure) after 4 attempts");
}

RunOutcome run_server_round(const PeerSpec& target_server, const Timeouts& timeouts,
                            const std::string& workdir, Transport transport,
                            const std::function<void(const std::string&, uint16_t)>& client_body) {
    ensure_dir(workdir);
    const std::string cov_path = workdir + "/cov.map";

    for (int attempt = 0; attempt < 4; ++attempt) {
        proc::PortLease lease(transport);
        make_sparse_file(cov_path, cov::kMapSize);

        LivePeer server;
        server.spec = &target_server;
        std::vector<std::pair<std::string, std::string>> env;
        env.emplace_back(cov::kEnvMapPath, cov_path);
        const std::string addr = "127.0.0.1";
        server.start(addr, lease.port(), std::move(env));

        SuperviseResult sr = supervise(server, nullptr, timeouts, [&] {
            if (!server.child.exited) client_body(addr, lease.port());
        });
        if (sr.retry_bind) continue;

        RunOutcome out;
        out.duration_ms = sr.duration_ms;
        out.ready_latency_ms = sr.ready_latency_ms;
        out.events = std::move(sr.events);
        out.target_exit = exit_status_of(server);
        out.target_stderr = server.err_buf;

        if (out.target_exit.signaled && !out.target_exit.by_us)
            out.verdict = Verdict::TargetCrash;
        else if (sr.timed_out)
            out.verdict = Verdict::Timeout;
        else
            out.verdict = Verdict::CleanExit;

        out.coverage = read_file(cov_path);
        if (out.verdict == Verdict::TargetCrash)
            out.crash_frames = parse_crash_record(out.target_stderr, &out.crash_bug);
        return out;
    }
    throw std::runtime_error("server kept losing the port race (bind failure) after 4 attempts");
}

std::vector<std::string> parse_crash_record(const std::string& diagnostics, std::string* bug_id) {
    std::vector<std::string> frames;
    std::istringstream is(diagnostics);
    std::string line;
    bool in_record = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("FTN-BUG ", 0) == 0) {
            in_record = true;
            if (bug_id) *bug_id = line.substr(8);
            frames.clear();
            continue;
        }
        if (in_record && line.rfind("FRAME ", 0) == 0) {
            frames.push_back(line.substr(6));
            continue;
        }
        if (in_record && !frames.empty()) break;
    }
    return frames;
}

} // namespace ftn::orch
