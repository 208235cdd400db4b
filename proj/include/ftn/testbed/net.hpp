#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ftn/bytes.hpp"
#include "ftn/process.hpp"
#include "ftn/testbed/session.hpp"

namespace ftn::testbed {

// Recorded session traffic, the replay baseline's seed material.
// Record layout: dir u8 (0 client->server, 1 server->client), len u32le,
// bytes. One record per frame (one per datagram on UDP).
struct Transcript {
    struct Record {
        uint8_t dir;
        Bytes bytes;
        bool operator==(const Record&) const = default;
    };
    std::vector<Record> records;

    bool operator==(const Transcript&) const = default;

    Bytes serialize() const;
    static Transcript parse(std::span<const uint8_t> data);
    void save(const std::string& path) const;
    static Transcript load(const std::string& path);

    std::vector<size_t> client_record_indices() const;
};

class TranscriptWriter {
public:
    void add(uint8_t dir, const Bytes& wire) { t_.records.push_back({dir, wire}); }
    void save(const std::string& path) const { t_.save(path); }
    const Transcript& transcript() const { return t_; }

private:
    Transcript t_;
};

// Socket helpers. The bind/listen wrappers run the readiness hook: the
// first of bind/listen emits Ready on the control channel, so UDP servers
// (which never listen) still report readiness.
int tcp_listen_ready(uint16_t port);            // -1 on failure (errno kept)
int tcp_accept_session(int listen_fd);
int udp_bind_ready(uint16_t port);
int tcp_connect_peer(const std::string& addr, uint16_t port); // Connecting/Connected hooks
int udp_connect_peer(const std::string& addr, uint16_t port);

// Stream channel carrying TinyChat frames over a connected TCP socket.
class TcpChannel : public Channel {
public:
    explicit TcpChannel(int fd) : fd_(fd) {}
    ~TcpChannel() override;
    bool send(const Bytes& wire) override;
    RecvResult recv(int timeout_ms) override;

private:
    int fd_;
    Bytes buf_;
    bool eof_ = false;
};

// Datagram channel: one frame per datagram. In server mode the peer address
// is learned from the first datagram and replies go back to it.
class UdpChannel : public Channel {
public:
    enum class Mode { Client, Server };
    UdpChannel(int fd, Mode mode) : fd_(fd), mode_(mode) {}
    ~UdpChannel() override;
    bool send(const Bytes& wire) override;
    RecvResult recv(int timeout_ms) override;

private:
    int fd_;
    Mode mode_;
    bool have_peer_ = false;
    Bytes peer_addr_; // sockaddr storage
};

} // namespace ftn::testbed
