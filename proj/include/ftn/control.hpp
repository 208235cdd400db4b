#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftn/bytes.hpp"

namespace ftn::ctrl {

// Control-channel endpoint handed to a peer: the number of an inherited
// socketpair fd.
inline constexpr const char* kEnvCtrlFd = "FTN_CTRL_FD";

enum class MsgKind : uint8_t {
    Ready = 1,      // payload: port u16le, address text
    Connecting = 2, // no payload
    Connected = 3,  // no payload
    PeerError = 4,  // payload: text
};

struct Message {
    MsgKind kind;
    Bytes payload;

    static Message ready(const std::string& address, uint16_t port);
    static Message connecting() { return {MsgKind::Connecting, {}}; }
    static Message connected() { return {MsgKind::Connected, {}}; }
    static Message error(const std::string& text);

    // Ready accessors; throw on other kinds or malformed payloads.
    uint16_t ready_port() const;
    std::string ready_address() const;
    std::string error_text() const;
};

// Wire layout: kind u8, payload-length u16le, payload bytes.
Bytes encode(const Message& msg);

// Incremental decoder for one duplex byte stream.
class Decoder {
public:
    void feed(const uint8_t* data, size_t n) { buf_.insert(buf_.end(), data, data + n); }
    std::optional<Message> next();

private:
    Bytes buf_;
};

// Peer-side agent. Never fails the peer: if the channel is absent or a write
// errors out, the calls are silent no-ops and the peer continues (readiness
// then falls back to the orchestrator's grace timer).
class PeerAgent {
public:
    void init_from_env();
    void init_fd(int fd) { fd_ = fd; }
    bool active() const { return fd_ >= 0; }

    // Emits Ready at most once; safe to call from both bind and listen hooks.
    void ready(const std::string& address, uint16_t port);
    void connecting();
    void connected();
    void error(const std::string& text);

    static PeerAgent& global();

private:
    void send(const Message& m);
    int fd_ = -1;
    bool ready_sent_ = false;
};

} // namespace ftn::ctrl
