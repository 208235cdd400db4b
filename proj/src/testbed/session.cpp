#include "ftn/testbed/session.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sys/random.h>

#include "ftn/coverage_runtime.hpp"
#include "ftn/testbed/digest.hpp"
#include "ftn/testbed/net.hpp"

namespace ftn::testbed {

const char* integrity_name(Integrity i) {
    switch (i) {
        case Integrity::None: return "none";
        case Integrity::Crc: return "crc";
        case Integrity::CrcHmac: return "crc+hmac";
    }
    return "?";
}

std::optional<Integrity> parse_integrity(const std::string& s) {
    if (s == "none") return Integrity::None;
    if (s == "crc") return Integrity::Crc;
    if (s == "crc+hmac") return Integrity::CrcHmac;
    return std::nullopt;
}

const char* bug_name(BugId b) {
    switch (b) {
        case BugId::B1_len_copy: return "B1_len_copy";
        case BugId::B2_dup_overflow: return "B2_dup_overflow";
        case BugId::B3_use_after_close: return "B3_use_after_close";
    }
    return "?";
}

std::optional<BugId> parse_bug(const std::string& s) {
    for (BugId b : {BugId::B1_len_copy, BugId::B2_dup_overflow, BugId::B3_use_after_close})
        if (s == bug_name(b)) return b;
    if (s == "B1") return BugId::B1_len_copy;
    if (s == "B2") return BugId::B2_dup_overflow;
    if (s == "B3") return BugId::B3_use_after_close;
    return std::nullopt;
}

PeerConfig::PeerConfig() {
    const char* def = "tinychat-secret";
    secret.assign(def, def + std::strlen(def));
}

CrashSink default_crash_sink() {
    return [](BugId id, const std::vector<std::string>& frames) {
        std::fprintf(stderr, "FTN-BUG %s\n", bug_name(id));
        for (const auto& f : frames) std::fprintf(stderr, "FRAME %s\n", f.c_str());
        std::fflush(stderr);
        std::abort();
    };
}

const std::vector<std::string> kB1Frames = {"copy_inner_data", "handle_data", "dispatch_frame",
                                            "session_loop", "server_main", "main"};
const std::vector<std::string> kB2Frames = {"dup_insert", "handle_dup", "dispatch_frame",
                                            "session_loop", "server_main", "main"};
const std::vector<std::string> kB3Frames = {"touch_closed_session", "dispatch_frame",
                                            "session_loop", "server_main", "main"};

Bytes derive_nonce(const Bytes& secret, const char* role_tag, uint64_t seed) {
    Bytes msg(role_tag, role_tag + std::strlen(role_tag));
    put_u64le(msg, seed);
    auto h = hmac_sha256(secret, msg);
    return Bytes(h.begin(), h.begin() + kNonceLen);
}

Bytes fresh_nonce() {
    Bytes n(kNonceLen);
    size_t off = 0;
    while (off < n.size()) {
        ssize_t r = ::getrandom(n.data() + off, n.size() - off, 0);
        if (r <= 0) throw std::runtime_error("getrandom failed");
        off += static_cast<size_t>(r);
    }
    return n;
}

std::array<uint8_t, 32> session_tag(const Bytes& secret, const Bytes& client_nonce, const Bytes& server_nonce) {
    Bytes msg = client_nonce;
    msg.insert(msg.end(), server_nonce.begin(), server_nonce.end());
    return hmac_sha256(secret, msg);
}

// ---------------------------------------------------------------------------
// Server

ServerSession::ServerSession(const PeerConfig& cfg, Bytes server_nonce, BugOracle* oracle)
    : cfg_(cfg), oracle_(oracle), server_nonce_(std::move(server_nonce)) {
    cov::point(covpt::SessionStart);
}

ServerAction ServerSession::on_frame(const Frame& f) {
    cov::point(covpt::DispatchBase + f.type);

    if (f.type > static_cast<uint8_t>(FrameType::Bye) || f.type == 0) {
        cov::point(covpt::UnknownType);
        return reject();
    }

    if (phase_ == Phase::Closed) {
        // Lingering after BYE; frames still arriving poke the closed session.
        cov::point(covpt::ClosedFrame);
        if (oracle_) oracle_->trigger(BugId::B3_use_after_close, kB3Frames);
        return reject();
    }

    switch (static_cast<FrameType>(f.type)) {
        case FrameType::Hello:
            if (phase_ != Phase::AwaitHello) break;
            return handle_hello(f);
        case FrameType::Auth:
            if (phase_ != Phase::AwaitAuth) break;
            return handle_auth(f);
        case FrameType::Data:
            if (phase_ != Phase::Established) break;
            return handle_data(f);
        case FrameType::Dup:
            if (phase_ != Phase::Established) break;
            return handle_dup(f);
        case FrameType::Bye:
            if (phase_ != Phase::Established) break;
            return handle_bye(f);
        case FrameType::Challenge:
            break; // server-to-client only
    }

    cov::point(covpt::MalformedClose);
    ++errors_;
    return ServerAction{std::nullopt, true};
}

ServerAction ServerSession::handle_hello(const Frame& f) {
    if (f.payload.size() != kNonceLen) {
        cov::point(covpt::HelloBad);
        return reject();
    }
    cov::point(covpt::Hello);
    client_nonce_ = f.payload;
    phase_ = cfg_.handshake() ? Phase::AwaitAuth : Phase::Established;
    cov::point(covpt::ChallengeSent);
    return ServerAction{Frame{static_cast<uint8_t>(FrameType::Challenge), server_nonce_}, false};
}

ServerAction ServerSession::handle_auth(const Frame& f) {
    cov::point(covpt::AuthRecv);
    auto expected = session_tag(cfg_.secret, client_nonce_, server_nonce_);
    if (f.payload.size() != kTagLen || std::memcmp(f.payload.data(), expected.data(), kTagLen) != 0) {
        cov::point(covpt::AuthBad);
        return reject();
    }
    cov::point(covpt::AuthOk);
    phase_ = Phase::Established;
    Bytes ok;
    put_u16le(ok, 2);
    ok.push_back('o');
    ok.push_back('k');
    return ServerAction{Frame{static_cast<uint8_t>(FrameType::Data), std::move(ok)}, false};
}

ServerAction ServerSession::handle_data(const Frame& f) {
    cov::point(covpt::Data);
    if (f.payload.size() < 2) {
        cov::point(covpt::DataShort);
        return reject();
    }
    uint16_t inner_len = get_u16le(f.payload.data());
    size_t content_len = f.payload.size() - 2;
    if (inner_len > content_len) {
        // The declared inner length exceeds the bytes actually present: a
        // parser trusting it would read out of bounds.
        cov::point(covpt::DataLenLie);
        if (oracle_) oracle_->trigger(BugId::B1_len_copy, kB1Frames);
        inner_len = static_cast<uint16_t>(content_len);
        ++errors_;
    }
    cov::point(covpt::DataEcho);
    Bytes echo;
    put_u16le(echo, inner_len);
    echo.insert(echo.end(), f.payload.begin() + 2, f.payload.begin() + 2 + inner_len);
    return ServerAction{Frame{static_cast<uint8_t>(FrameType::Data), std::move(echo)}, false};
}

ServerAction ServerSession::handle_dup(const Frame& f) {
    cov::point(covpt::Dup);
    if (f.payload.size() < 2) return reject();
    uint8_t capacity = f.payload[0];
    uint8_t count = f.payload[1];
    Bytes entry(f.payload.begin() + 2, f.payload.end());

    dup_capacity_ = capacity;
    dup_table_.clear();
    size_t total = 1u + count; // the entry itself plus its duplicates
    if (total > dup_capacity_) {
        // Requested duplication does not fit the declared capacity.
        cov::point(covpt::DupReject);
        if (oracle_) oracle_->trigger(BugId::B2_dup_overflow, kB2Frames);
        ++errors_;
        Bytes r{0};
        return ServerAction{Frame{static_cast<uint8_t>(FrameType::Dup), std::move(r)}, false};
    }
    for (size_t i = 0; i < total; ++i) {
        cov::point(covpt::DupInsert);
        dup_table_.push_back(entry);
    }
    Bytes r{static_cast<uint8_t>(dup_table_.size())};
    return ServerAction{Frame{static_cast<uint8_t>(FrameType::Dup), std::move(r)}, false};
}

ServerAction ServerSession::handle_bye(const Frame&) {
    cov::point(covpt::Bye);
    phase_ = Phase::Closed;
    return ServerAction{Frame{static_cast<uint8_t>(FrameType::Bye), {}}, false};
}

// ---------------------------------------------------------------------------
// Client

ClientSites register_client_sites(fault::Runtime& rt) {
    using fault::FaultKind;
    auto site = [&](uint32_t id, FaultKind k, uint8_t w, const char* label, const char* arity = "") {
        fault::FaultSiteDescriptor d;
        d.site_id = id;
        d.kind = k;
        d.width_bits = w;
        d.label = label;
        d.arity_class = arity;
        return rt.register_site(d);
    };
    ClientSites s{};
    s.preconnect_cfg = site(site_id::PreconnectCfg, FaultKind::ValueLoad, 8, "client.preconnect.cfg");
    s.session_sanity = site(site_id::SessionSanity, FaultKind::Branch, 1, "client.session.sanity");
    s.hello_nonce = site(site_id::HelloNonce, FaultKind::ValueStore, 64, "client.hello.nonce_lo");
    s.step_dispatch = site(site_id::StepDispatch, FaultKind::Switch, 8, "client.step.dispatch");
    s.frame_type = site(site_id::FrameType, FaultKind::ValueStore, 8, "client.frame.type");
    s.frame_crc = site(site_id::FrameCrc, FaultKind::CallEntry, 8, "client.frame.crc", "crc32");
    s.auth_tag = site(site_id::AuthTag, FaultKind::CallEntry, 8, "client.auth.tag", "tag32");
    s.data_len_clamp = site(site_id::DataLenClamp, FaultKind::Branch, 1, "client.data.len_clamp");
    s.data_inner_len = site(site_id::DataInnerLen, FaultKind::ValueStore, 16, "client.data.inner_len");
    s.dup_capacity = site(site_id::DupCapacity, FaultKind::ValueStore, 8, "client.dup.capacity");
    s.dup_count = site(site_id::DupCount, FaultKind::ValueStore, 8, "client.dup.count");
    s.reply_crc_ok = site(site_id::ReplyCrcOk, FaultKind::Branch, 1, "client.reply.crc_ok");
    s.reply_type_ok = site(site_id::ReplyTypeOk, FaultKind::Branch, 1, "client.reply.type_ok");

    rt.register_call_table("crc32", {"crc32", "crc_zero"});
    rt.register_call_table("tag32", {"hmac_sha256", "fold_digest", "zero_digest"});
    return s;
}

namespace {

// Alternate tag routines sharing the "tag32" signature group. Entry 0 is
// always the real digest; the others produce well-formed but wrong tags.
std::array<uint8_t, 32> fold_digest(const Bytes& secret, const Bytes& msg) {
    std::array<uint8_t, 32> out{};
    for (size_t i = 0; i < secret.size(); ++i) out[i % 32] ^= secret[i];
    for (size_t i = 0; i < msg.size(); ++i) out[(i + 7) % 32] ^= msg[i];
    return out;
}

std::array<uint8_t, 32> zero_digest(const Bytes&, const Bytes&) { return {}; }

uint8_t ordinal_to_type(uint32_t ordinal) {
    switch (ordinal) {
        case 0: return static_cast<uint8_t>(FrameType::Hello);
        case 1: return static_cast<uint8_t>(FrameType::Auth);
        case 2: return static_cast<uint8_t>(FrameType::Data);
        case 3: return static_cast<uint8_t>(FrameType::Dup);
        case 4: return static_cast<uint8_t>(FrameType::Bye);
        default: return 0; // skip-step case
    }
}

uint8_t expected_reply_type(uint32_t ordinal) {
    switch (ordinal) {
        case 0: return static_cast<uint8_t>(FrameType::Challenge);
        case 1: return static_cast<uint8_t>(FrameType::Data);
        case 2: return static_cast<uint8_t>(FrameType::Data);
        case 3: return static_cast<uint8_t>(FrameType::Dup);
        case 4: return static_cast<uint8_t>(FrameType::Bye);
        default: return 0;
    }
}

constexpr uint32_t kDispatchCases = 6; // 5 frame builders plus the skip arm

} // namespace

ClientScript::ClientScript(const PeerConfig& cfg, fault::Runtime& rt, const ClientSites& sites)
    : cfg_(cfg), rt_(rt), sites_(sites) {
    client_nonce_ = cfg_.seed ? derive_nonce(cfg_.secret, "cn", *cfg_.seed) : fresh_nonce();

    // The nonce store is a faultable 64-bit value; the faulted nonce is used
    // consistently for both the HELLO payload and the AUTH tag, so the
    // session stays integrity-valid.
    uint64_t lo = get_u64le(client_nonce_.data());
    lo = rt_.value(sites_.hello_nonce, lo);
    Bytes patched;
    put_u64le(patched, lo);
    std::copy(patched.begin(), patched.end(), client_nonce_.begin());

    steps_.push_back({0, {}});
    if (cfg_.handshake()) steps_.push_back({1, {}});
    for (const char* content : kDataContents) {
        Bytes c(content, content + std::strlen(content));
        steps_.push_back({2, std::move(c)});
    }
    steps_.push_back({3, {}});
    steps_.push_back({4, {}});
}

void ClientScript::preconnect_check() {
    uint64_t cfg_word = rt_.value(sites_.preconnect_cfg, kCfgGuardValue);
    if (cfg_word != kCfgGuardValue) {
        std::fprintf(stderr, "tinychat-client: invalid session config word %llu\n",
                     static_cast<unsigned long long>(cfg_word));
        std::abort();
    }
}

void ClientScript::postconnect_check() {
    if (!rt_.branch(sites_.session_sanity, true)) {
        std::fprintf(stderr, "tinychat-client: session sanity check failed\n");
        std::abort();
    }
}

Bytes ClientScript::build_payload(uint32_t ordinal, const Step& step) {
    switch (ordinal) {
        case 0:
            return client_nonce_;
        case 1: {
            Bytes msg = client_nonce_;
            msg.insert(msg.end(), server_nonce_.begin(), server_nonce_.end());
            auto action = rt_.call(sites_.auth_tag, 3);
            std::array<uint8_t, 32> tag{}; // skip-call default: zero tag
            if (!action.skip) {
                switch (action.index) {
                    case 0: tag = hmac_sha256(cfg_.secret, msg); break;
                    case 1: tag = fold_digest(cfg_.secret, msg); break;
                    default: tag = zero_digest(cfg_.secret, msg); break;
                }
            }
            return Bytes(tag.begin(), tag.end());
        }
        case 2: {
            // A dispatch-faulted step may build DATA without scripted content.
            Bytes content = step.data_content.empty() && step.ordinal != 2
                                ? Bytes{'a', 'l', 't'}
                                : step.data_content;
            size_t n = content.size();
            uint16_t inner_len;
            if (rt_.branch(sites_.data_len_clamp, n > kMaxPayload)) {
                inner_len = static_cast<uint16_t>(kMaxPayload);
            } else {
                inner_len = static_cast<uint16_t>(n);
            }
            inner_len = static_cast<uint16_t>(rt_.value(sites_.data_inner_len, inner_len));
            Bytes p;
            put_u16le(p, inner_len);
            p.insert(p.end(), content.begin(), content.end());
            return p;
        }
        case 3: {
            uint8_t capacity = static_cast<uint8_t>(rt_.value(sites_.dup_capacity, kDupCapacity));
            uint8_t count = static_cast<uint8_t>(rt_.value(sites_.dup_count, kDupCount));
            Bytes p{capacity, count};
            const char* e = kDupEntry;
            p.insert(p.end(), e, e + std::strlen(e));
            return p;
        }
        default:
            return {};
    }
}

Bytes ClientScript::assemble(uint32_t ordinal, Bytes payload) {
    Frame f;
    f.type = static_cast<uint8_t>(rt_.value(sites_.frame_type, ordinal_to_type(ordinal)));
    f.payload = std::move(payload);

    Bytes head;
    put_u16le(head, static_cast<uint16_t>(f.payload.size()));
    head.push_back(f.type);
    head.insert(head.end(), f.payload.begin(), f.payload.end());

    auto action = rt_.call(sites_.frame_crc, 2);
    uint32_t crc = 0; // skip-call default
    if (!action.skip) crc = action.index == 0 ? crc32(head) : 0;
    return f.encode_with_crc(crc);
}

void ClientScript::handle_reply(uint32_t expected_ordinal, const Bytes& wire) {
    Decoded d = decode_frame(wire, /*check_crc=*/false);
    bool crc_ok = true;
    if (cfg_.check_crc() && d.status == DecodeStatus::Ok)
        crc_ok = get_u32le(wire.data() + wire.size() - 4) == crc32(std::span(wire).subspan(0, wire.size() - 4));
    bool ok = d.status == DecodeStatus::Ok && crc_ok;
    if (!rt_.branch(sites_.reply_crc_ok, ok)) {
        ++errors_;
        cov::point(205);
        return;
    }
    bool type_ok = d.frame.type == expected_reply_type(expected_ordinal);
    if (!rt_.branch(sites_.reply_type_ok, type_ok)) {
        ++errors_;
        cov::point(205);
        return;
    }
    if (expected_ordinal == 0 && d.frame.payload.size() == kNonceLen) {
        server_nonce_ = d.frame.payload;
        cov::point(201);
    }
    cov::point(204);
}

bool ClientScript::sweep_replies(Channel& ch, int timeout_ms) {
    while (true) {
        RecvResult r = ch.recv(timeout_ms);
        if (r.kind == RecvResult::Kind::Closed) return false;
        if (r.kind == RecvResult::Kind::Timeout) return true;
        timeout_ms = 0; // first read may wait; the rest just sweeps the queue
        if (r.kind == RecvResult::Kind::Malformed) {
            ++errors_;
            continue;
        }
        uint32_t expected = 99; // unsolicited reply: no expectation matches
        if (!pending_.empty()) {
            expected = pending_.front().ordinal;
            replies_by_send_.emplace(pending_.front().send_index, r.wire);
            pending_.pop_front();
        } else {
            stray_replies_.push_back(r.wire);
        }
        handle_reply(expected, r.wire);
    }
}

int ClientScript::run(Channel& ch, TranscriptWriter* rec) {
    bool open = true;
    for (const Step& step : steps_) {
        if (!open) break;
        uint32_t ordinal = rt_.switch_case(sites_.step_dispatch, step.ordinal, kDispatchCases);
        if (ordinal_to_type(ordinal) == 0) {
            cov::point(206); // skip arm: nothing sent this step
            continue;
        }
        Bytes payload = build_payload(ordinal, step);
        Bytes wire = assemble(ordinal, std::move(payload));
        if (!ch.send(wire)) break; // peer gone: session over
        cov::point(203);
        pending_.push_back({step.ordinal, static_cast<int>(sent_wires_.size())});
        sent_wires_.push_back(std::move(wire));

        if (step.ordinal == 0) {
            // The AUTH tag needs the server nonce from the CHALLENGE, so the
            // HELLO reply is the one wait in the script.
            auto deadline = proc::Clock::now() + std::chrono::milliseconds(kReplyTimeoutMs);
            while (open && server_nonce_.empty()) {
                int remain = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                  deadline - proc::Clock::now())
                                                  .count());
                if (remain <= 0) break;
                open = sweep_replies(ch, remain);
            }
        } else {
            // Replies are drained opportunistically; dropped frames never
            // stall the script.
            open = sweep_replies(ch, 0);
        }
    }

    // Collect the replies still in flight. Ends early once nothing is
    // outstanding; dropped frames bound this at the drain budget.
    auto deadline = proc::Clock::now() + std::chrono::milliseconds(kFinalDrainMs);
    while (open && !pending_.empty() && proc::Clock::now() < deadline)
        open = sweep_replies(ch, 2);
    cov::point(202);

    if (rec) {
        // Protocol-order transcript: each reply right after the frame it
        // answered, unpaired replies at the end.
        for (size_t i = 0; i < sent_wires_.size(); ++i) {
            rec->add(0, sent_wires_[i]);
            if (auto it = replies_by_send_.find(static_cast<int>(i)); it != replies_by_send_.end())
                rec->add(1, it->second);
        }
        for (const auto& stray : stray_replies_) rec->add(1, stray);
    }
    return 0;
}

} // namespace ftn::testbed
