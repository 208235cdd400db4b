#include "ftn/control.hpp"

#include <cstdlib>
#include <stdexcept>
#include <unistd.h>

namespace ftn::ctrl {

Message Message::ready(const std::string& address, uint16_t port) {
    Message m{MsgKind::Ready, {}};
    put_u16le(m.payload, port);
    m.payload.insert(m.payload.end(), address.begin(), address.end());
    return m;
}

Message Message::error(const std::string& text) {
    Message m{MsgKind::PeerError, {}};
    m.payload.assign(text.begin(), text.end());
    return m;
}

uint16_t Message::ready_port() const {
    if (kind != MsgKind::Ready || payload.size() < 2) throw std::runtime_error("not a Ready message");
    return get_u16le(payload.data());
}

std::string Message::ready_address() const {
    if (kind != MsgKind::Ready || payload.size() < 2) throw std::runtime_error("not a Ready message");
    return std::string(payload.begin() + 2, payload.end());
}

std::string Message::error_text() const {
    return std::string(payload.begin(), payload.end());
}

Bytes encode(const Message& msg) {
    if (msg.payload.size() > 0xffff) throw std::runtime_error("control payload too large");
    Bytes out;
    out.push_back(static_cast<uint8_t>(msg.kind));
    put_u16le(out, static_cast<uint16_t>(msg.payload.size()));
    out.insert(out.end(), msg.payload.begin(), msg.payload.end());
    return out;
}

std::optional<Message> Decoder::next() {
    if (buf_.size() < 3) return std::nullopt;
    uint16_t len = get_u16le(buf_.data() + 1);
    if (buf_.size() < 3u + len) return std::nullopt;
    Message m;
    m.kind = static_cast<MsgKind>(buf_[0]);
    m.payload.assign(buf_.begin() + 3, buf_.begin() + 3 + len);
    buf_.erase(buf_.begin(), buf_.begin() + 3 + len);
    return m;
}

void PeerAgent::init_from_env() {
    const char* fd_s = std::getenv(kEnvCtrlFd);
    if (!fd_s || !*fd_s) return;
    fd_ = std::atoi(fd_s);
}

void PeerAgent::send(const Message& m) {
    if (fd_ < 0) return;
    Bytes wire = encode(m);
    size_t off = 0;
    while (off < wire.size()) {
        ssize_t n = ::write(fd_, wire.data() + off, wire.size() - off);
        if (n <= 0) {
            fd_ = -1; // channel broken: peer keeps running
            return;
        }
        off += static_cast<size_t>(n);
    }
}

void PeerAgent::ready(const std::string& address, uint16_t port) {
    if (ready_sent_) return;
    ready_sent_ = true;
    send(Message::ready(address, port));
}

void PeerAgent::connecting() { send(Message::connecting()); }
void PeerAgent::connected() { send(Message::connected()); }
void PeerAgent::error(const std::string& text) { send(Message::error(text)); }

PeerAgent& PeerAgent::global() {
    static PeerAgent agent;
    return agent;
}

} // namespace ftn::ctrl
