#include "ftn/testbed/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <poll.h>
#include <stdexcept>
#include <sys/socket.h>
#include <unistd.h>

#include "ftn/control.hpp"

namespace ftn::testbed {

Bytes Transcript::serialize() const {
    Bytes out;
    for (const auto& r : records) {
        out.push_back(r.dir);
        put_u32le(out, static_cast<uint32_t>(r.bytes.size()));
        out.insert(out.end(), r.bytes.begin(), r.bytes.end());
    }
    return out;
}

Transcript Transcript::parse(std::span<const uint8_t> data) {
    Transcript t;
    size_t off = 0;
    while (off < data.size()) {
        if (off + 5 > data.size()) throw std::runtime_error("truncated transcript record header");
        Record r;
        r.dir = data[off];
        uint32_t len = get_u32le(data.data() + off + 1);
        off += 5;
        if (off + len > data.size()) throw std::runtime_error("truncated transcript record body");
        r.bytes.assign(data.begin() + off, data.begin() + off + len);
        off += len;
        t.records.push_back(std::move(r));
    }
    return t;
}

void Transcript::save(const std::string& path) const { write_file(path, std::span<const uint8_t>(serialize())); }

Transcript Transcript::load(const std::string& path) {
    Bytes b = read_file(path);
    return parse(b);
}

std::vector<size_t> Transcript::client_record_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].dir == 0) out.push_back(i);
    return out;
}

namespace {

sockaddr_in loopback(uint16_t port) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    a.sin_port = htons(port);
    return a;
}

bool wait_readable(int fd, int timeout_ms) {
    struct pollfd p{fd, POLLIN, 0};
    return ::poll(&p, 1, timeout_ms) > 0;
}

bool send_all(int fd, const Bytes& data) {
    size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<size_t>(n);
    }
    return true;
}

} // namespace

int tcp_listen_ready(uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return -1;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in a = loopback(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().ready("127.0.0.1", port); // bind hook: first of bind/listen wins
    if (::listen(fd, 4) != 0) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().ready("127.0.0.1", port); // listen hook: no-op, Ready already sent
    return fd;
}

int tcp_accept_session(int listen_fd) {
    int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd >= 0) ctrl::PeerAgent::global().connected();
    return fd;
}

int udp_bind_ready(uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) return -1;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in a = loopback(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().ready("127.0.0.1", port); // UDP servers never listen
    return fd;
}

int tcp_connect_peer(const std::string& addr, uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return -1;
    sockaddr_in a = loopback(port);
    if (::inet_pton(AF_INET, addr.c_str(), &a.sin_addr) != 1) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().connecting();
    if (::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().connected();
    return fd;
}

int udp_connect_peer(const std::string& addr, uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) return -1;
    sockaddr_in a = loopback(port);
    if (::inet_pton(AF_INET, addr.c_str(), &a.sin_addr) != 1) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().connecting();
    if (::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
        ::close(fd);
        return -1;
    }
    ctrl::PeerAgent::global().connected();
    return fd;
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

bool TcpChannel::send(const Bytes& wire) { return send_all(fd_, wire); }

RecvResult TcpChannel::recv(int timeout_ms) {
    auto deadline = proc::Clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
        // A complete frame may already be buffered.
        if (buf_.size() >= 3) {
            uint16_t len = get_u16le(buf_.data());
            if (len > kMaxPayload) {
                Bytes junk = std::move(buf_);
                buf_.clear();
                return {RecvResult::Kind::Malformed, std::move(junk)};
            }
            size_t total = 3u + len + 4u;
            if (buf_.size() >= total) {
                Bytes wire(buf_.begin(), buf_.begin() + total);
                buf_.erase(buf_.begin(), buf_.begin() + total);
                return {RecvResult::Kind::Frame, std::move(wire)};
            }
        }
        if (eof_) return {RecvResult::Kind::Closed, {}};
        int remain = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - proc::Clock::now()).count());
        if (remain < 0) remain = 0;
        if (!wait_readable(fd_, remain)) return {RecvResult::Kind::Timeout, {}};
        uint8_t tmp[4096];
        ssize_t n = ::recv(fd_, tmp, sizeof tmp, 0);
        if (n > 0) {
            buf_.insert(buf_.end(), tmp, tmp + n);
        } else if (n == 0) {
            eof_ = true;
        } else if (errno != EINTR) {
            return {RecvResult::Kind::Closed, {}};
        }
    }
}

UdpChannel::~UdpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

bool UdpChannel::send(const Bytes& wire) {
    if (mode_ == Mode::Client) return ::send(fd_, wire.data(), wire.size(), MSG_NOSIGNAL) >= 0;
    if (!have_peer_) return false; // no client seen yet
    return ::sendto(fd_, wire.data(), wire.size(), MSG_NOSIGNAL,
                    reinterpret_cast<const sockaddr*>(peer_addr_.data()),
                    static_cast<socklen_t>(peer_addr_.size())) >= 0;
}

RecvResult UdpChannel::recv(int timeout_ms) {
    if (!wait_readable(fd_, timeout_ms)) return {RecvResult::Kind::Timeout, {}};
    uint8_t tmp[8192];
    sockaddr_storage from{};
    socklen_t from_len = sizeof from;
    ssize_t n = ::recvfrom(fd_, tmp, sizeof tmp, 0, reinterpret_cast<sockaddr*>(&from), &from_len);
    if (n < 0) return {RecvResult::Kind::Timeout, {}};
    if (mode_ == Mode::Server && !have_peer_) {
        peer_addr_.assign(reinterpret_cast<uint8_t*>(&from), reinterpret_cast<uint8_t*>(&from) + from_len);
        have_peer_ = true;
        ctrl::PeerAgent::global().connected(); // first datagram: session peer learned
    }
    Bytes wire(tmp, tmp + n);
    if (wire.size() < 7 || get_u16le(wire.data()) + 7u != wire.size())
        return {RecvResult::Kind::Malformed, std::move(wire)};
    return {RecvResult::Kind::Frame, std::move(wire)};
}

} // namespace ftn::testbed
