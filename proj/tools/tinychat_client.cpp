#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ftn/control.hpp"
#include "ftn/coverage_runtime.hpp"
#include "ftn/fault_runtime.hpp"
#include "ftn/orchestrator.hpp"
#include "ftn/testbed/net.hpp"
#include "ftn/testbed/session.hpp"

using namespace ftn;
using namespace ftn::testbed;

int main(int argc, char** argv) {
    std::signal(SIGPIPE, SIG_IGN);

    CLI::App app{"TinyChat testbed client (instrumented weird peer)"};
    PeerConfig cfg;
    std::string transport = "tcp", integrity = "crc+hmac", secret_hex, host = "127.0.0.1", record;
    int64_t seed = -1;
    int port = 0;
    app.add_option("--transport", transport, "tcp|udp")->check(CLI::IsMember({"tcp", "udp"}));
    app.add_option("--integrity", integrity, "none|crc|crc+hmac")
        ->check(CLI::IsMember({"none", "crc", "crc+hmac"}));
    app.add_option("--host", host, "server address");
    app.add_option("--port", port, "server port")->required();
    app.add_option("--seed", seed, "deterministic nonce seed (omit for fresh nonces)");
    app.add_option("--secret", secret_hex, "shared secret, hex");
    app.add_option("--record", record, "write the session transcript to this file");
    CLI11_PARSE(app, argc, argv);

    cfg.transport = transport == "udp" ? proc::Transport::Udp : proc::Transport::Tcp;
    cfg.integrity = *parse_integrity(integrity);
    cfg.port = static_cast<uint16_t>(port);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (!secret_hex.empty()) cfg.secret = from_hex(secret_hex);
    if (record.empty())
        if (const char* r = std::getenv(orch::kEnvRecord)) record = r;

    cov::attach_from_env();
    ctrl::PeerAgent::global().init_from_env();

    auto& rt = fault::Runtime::global();
    ClientSites sites = register_client_sites(rt);
    rt.init_from_env(); // mode + program must load after site registration
    rt.seal();

    ClientScript script(cfg, rt, sites);
    script.preconnect_check();

    int fd = cfg.transport == proc::Transport::Tcp ? tcp_connect_peer(host, cfg.port)
                                                   : udp_connect_peer(host, cfg.port);
    if (fd < 0) {
        std::perror("tinychat-client: connect");
        ctrl::PeerAgent::global().error("connect failed");
        return 13;
    }
    script.postconnect_check();

    std::unique_ptr<Channel> ch;
    if (cfg.transport == proc::Transport::Tcp)
        ch = std::make_unique<TcpChannel>(fd);
    else
        ch = std::make_unique<UdpChannel>(fd, UdpChannel::Mode::Client);

    TranscriptWriter rec;
    int rc = script.run(*ch, record.empty() ? nullptr : &rec);
    if (!record.empty()) rec.save(record);
    return rc;
}
