#pragma once

#include <dirent.h>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "ftn/orchestrator.hpp"
#include "test_support.hpp"

namespace ftn_test {

inline std::vector<std::string> tb_args(const std::string& extra) {
    std::vector<std::string> out;
    std::istringstream is(extra);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

// Testbed server as the target peer.
inline ftn::orch::PeerSpec target_server(const std::string& extra_args) {
    ftn::orch::PeerSpec s;
    s.exe = g_bindir + "/tinychat-server";
    s.args = tb_args("--port {PORT} " + extra_args);
    s.role = ftn::orch::Role::TargetPeer;
    s.side = ftn::orch::Side::Server;
    return s;
}

// Testbed client as the weird peer.
inline ftn::orch::PeerSpec weird_client(const std::string& extra_args) {
    ftn::orch::PeerSpec s;
    s.exe = g_bindir + "/tinychat-client";
    s.args = tb_args("--host {ADDR} --port {PORT} " + extra_args);
    s.role = ftn::orch::Role::WeirdPeer;
    s.side = ftn::orch::Side::Client;
    return s;
}

inline ftn::orch::PeerSpec fixture_client(const std::string& exe_name) {
    ftn::orch::PeerSpec s;
    s.exe = g_bindir + "/" + exe_name;
    s.args = tb_args("--host {ADDR} --port {PORT}");
    s.role = ftn::orch::Role::WeirdPeer;
    s.side = ftn::orch::Side::Client;
    return s;
}

// Processes whose parent is this test process. Zero after a run means no
// orphans (everything was reaped).
inline int live_child_count() {
    int count = 0;
    DIR* d = opendir("/proc");
    if (!d) return -1;
    struct dirent* ent;
    while ((ent = readdir(d))) {
        std::string name = ent->d_name;
        if (name.find_first_not_of("0123456789") != std::string::npos) continue;
        std::ifstream stat("/proc/" + name + "/stat");
        std::string pid, comm, state, ppid;
        stat >> pid >> comm >> state >> ppid;
        if (!ppid.empty() && std::stoi(ppid) == getpid() && state != "Z") ++count;
        if (!ppid.empty() && std::stoi(ppid) == getpid() && state == "Z") ++count; // unreaped zombie
    }
    closedir(d);
    return count;
}

} // namespace ftn_test
