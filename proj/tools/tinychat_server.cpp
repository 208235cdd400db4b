#include <csignal>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ftn/control.hpp"
#include "ftn/coverage_runtime.hpp"
#include "ftn/orchestrator.hpp"
#include "ftn/testbed/net.hpp"
#include "ftn/testbed/session.hpp"

using namespace ftn;
using namespace ftn::testbed;

namespace {

int serve_session(const PeerConfig& cfg, Channel& ch, ServerSession& sess) {
    while (true) {
        RecvResult r = ch.recv(-1);
        if (r.kind == RecvResult::Kind::Closed) {
            cov::point(covpt::SessionEnd);
            return 0;
        }
        if (r.kind == RecvResult::Kind::Timeout) continue;
        if (r.kind == RecvResult::Kind::Malformed) {
            cov::point(covpt::FrameBadLength);
            if (cfg.transport == proc::Transport::Tcp) return 0; // stream desynced: close
            continue;                                           // datagrams resync themselves
        }
        Decoded d = decode_frame(r.wire, cfg.check_crc());
        if (d.status == DecodeStatus::BadCrc) {
            cov::point(covpt::FrameCrcBad);
            continue; // integrity failure: drop, session continues
        }
        if (d.status == DecodeStatus::BadLength) {
            cov::point(covpt::FrameBadLength);
            if (cfg.transport == proc::Transport::Tcp) return 0;
            continue;
        }
        if (d.status != DecodeStatus::Ok) continue;
        cov::point(covpt::FrameOk);
        ServerAction action = sess.on_frame(d.frame);
        if (action.reply && !ch.send(action.reply->encode())) {
            cov::point(covpt::SessionEnd);
            return 0;
        }
        if (action.close_now) {
            cov::point(covpt::SessionEnd);
            return 0;
        }
    }
}

} // namespace

int server_main(const PeerConfig& cfg) {
    cov::attach_from_env();
    ctrl::PeerAgent::global().init_from_env();

    if (cfg.transport == proc::Transport::Tcp) {
        int lfd = tcp_listen_ready(cfg.port);
        if (lfd < 0) {
            std::perror("tinychat-server: bind/listen");
            ctrl::PeerAgent::global().error("bind failed");
            return orch::kBindFailureExit;
        }
        for (int i = 0; i < cfg.sessions; ++i) {
            int cfd = tcp_accept_session(lfd);
            if (cfd < 0) continue;
            Bytes nonce = cfg.seed ? derive_nonce(cfg.secret, "sn", *cfg.seed + static_cast<uint64_t>(i))
                                   : fresh_nonce();
            BugOracle oracle(cfg.armed, default_crash_sink());
            ServerSession sess(cfg, std::move(nonce), &oracle);
            TcpChannel ch(cfd);
            serve_session(cfg, ch, sess);
        }
        return 0;
    }

    int fd = udp_bind_ready(cfg.port);
    if (fd < 0) {
        std::perror("tinychat-server: bind");
        ctrl::PeerAgent::global().error("bind failed");
        return orch::kBindFailureExit;
    }
    Bytes nonce = cfg.seed ? derive_nonce(cfg.secret, "sn", *cfg.seed) : fresh_nonce();
    BugOracle oracle(cfg.armed, default_crash_sink());
    ServerSession sess(cfg, std::move(nonce), &oracle);
    UdpChannel ch(fd, UdpChannel::Mode::Server);
    return serve_session(cfg, ch, sess);
}

int main(int argc, char** argv) {
    std::signal(SIGPIPE, SIG_IGN);

    CLI::App app{"TinyChat testbed server"};
    PeerConfig cfg;
    std::string transport = "tcp", integrity = "crc+hmac", secret_hex, arm;
    int64_t seed = -1;
    int port = 0;
    app.add_option("--transport", transport, "tcp|udp")->check(CLI::IsMember({"tcp", "udp"}));
    app.add_option("--integrity", integrity, "none|crc|crc+hmac")
        ->check(CLI::IsMember({"none", "crc", "crc+hmac"}));
    app.add_option("--arm", arm, "comma-separated bug ids to arm (B1_len_copy,...)");
    app.add_option("--port", port, "listen port")->required();
    app.add_option("--seed", seed, "deterministic nonce seed (omit for fresh nonces)");
    app.add_option("--secret", secret_hex, "shared secret, hex");
    app.add_option("--sessions", cfg.sessions, "sessions handled before exiting");
    CLI11_PARSE(app, argc, argv);

    cfg.transport = transport == "udp" ? proc::Transport::Udp : proc::Transport::Tcp;
    cfg.integrity = *parse_integrity(integrity);
    cfg.port = static_cast<uint16_t>(port);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (!secret_hex.empty()) cfg.secret = from_hex(secret_hex);
    if (!arm.empty()) {
        size_t pos = 0;
        while (pos <= arm.size()) {
            size_t comma = arm.find(',', pos);
            std::string one = arm.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!one.empty()) {
                auto b = parse_bug(one);
                if (!b) {
                    std::fprintf(stderr, "unknown bug id: %s\n", one.c_str());
                    return 1;
                }
                cfg.armed.insert(*b);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return server_main(cfg);
}
