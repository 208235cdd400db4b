#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ftn/bytes.hpp"
#include "ftn/fault_runtime.hpp"
#include "ftn/process.hpp"
#include "ftn/testbed/wire.hpp"

namespace ftn::testbed {

enum class Integrity { None, Crc, CrcHmac };
const char* integrity_name(Integrity i);
std::optional<Integrity> parse_integrity(const std::string& s);

enum class BugId { B1_len_copy, B2_dup_overflow, B3_use_after_close };
const char* bug_name(BugId b);
std::optional<BugId> parse_bug(const std::string& s);

struct PeerConfig {
    proc::Transport transport = proc::Transport::Tcp;
    Integrity integrity = Integrity::CrcHmac;
    std::set<BugId> armed;
    uint16_t port = 0;
    std::optional<uint64_t> seed; // absent: fresh nonces
    Bytes secret;                 // shared authentication secret
    int sessions = 1;             // server: sessions handled before exiting

    PeerConfig();
    bool check_crc() const { return integrity != Integrity::None; }
    bool handshake() const { return integrity == Integrity::CrcHmac; }
};

// Seeded bugs terminate the process through this sink; tests install a
// capturing sink instead of the default abort().
using CrashSink = std::function<void(BugId, const std::vector<std::string>& frames)>;
CrashSink default_crash_sink();

class BugOracle {
public:
    BugOracle() : sink_(default_crash_sink()) {}
    BugOracle(std::set<BugId> armed, CrashSink sink) : armed_(std::move(armed)), sink_(std::move(sink)) {}

    bool armed(BugId id) const { return armed_.count(id) > 0; }
    // Fires the sink when the bug is armed; returns whether it fired.
    bool trigger(BugId id, const std::vector<std::string>& frames) {
        if (!armed(id)) return false;
        sink_(id, frames);
        return true;
    }

private:
    std::set<BugId> armed_;
    CrashSink sink_;
};

// Crash-record frame lists, innermost first.
extern const std::vector<std::string> kB1Frames;
extern const std::vector<std::string> kB2Frames;
extern const std::vector<std::string> kB3Frames;

// Nonce and tag derivation. Seeded nonces make identity runs bit-reproducible.
Bytes derive_nonce(const Bytes& secret, const char* role_tag, uint64_t seed);
Bytes fresh_nonce();
std::array<uint8_t, 32> session_tag(const Bytes& secret, const Bytes& client_nonce, const Bytes& server_nonce);

inline constexpr size_t kNonceLen = 16;
inline constexpr size_t kTagLen = 32;

// ---------------------------------------------------------------------------
// Server side

enum class Phase { AwaitHello, AwaitAuth, Established, Closed };

struct ServerAction {
    std::optional<Frame> reply;
    bool close_now = false; // malformed phase transition: close the session
};

// The target-peer protocol engine: one instance per session, fed decoded
// frames, produces at most one reply per frame. Carries the seeded bugs.
class ServerSession {
public:
    ServerSession(const PeerConfig& cfg, Bytes server_nonce, BugOracle* oracle);

    ServerAction on_frame(const Frame& f);

    Phase phase() const { return phase_; }
    int error_count() const { return errors_; }
    const Bytes& server_nonce() const { return server_nonce_; }
    size_t dup_table_size() const { return dup_table_.size(); }

private:
    ServerAction handle_hello(const Frame& f);
    ServerAction handle_auth(const Frame& f);
    ServerAction handle_data(const Frame& f);
    ServerAction handle_dup(const Frame& f);
    ServerAction handle_bye(const Frame& f);
    ServerAction reject() {
        ++errors_;
        return {};
    }

    const PeerConfig& cfg_;
    BugOracle* oracle_;
    Phase phase_ = Phase::AwaitHello;
    Bytes client_nonce_;
    Bytes server_nonce_;
    std::vector<Bytes> dup_table_;
    uint8_t dup_capacity_ = 0;
    int errors_ = 0;
};

// ---------------------------------------------------------------------------
// Client side (the weird peer)

// Registered fault sites of the testbed client. Handles are stored so the
// script can route every interesting decision through the fault runtime.
struct ClientSites {
    fault::Runtime::Handle preconnect_cfg;
    fault::Runtime::Handle session_sanity;
    fault::Runtime::Handle hello_nonce;
    fault::Runtime::Handle step_dispatch;
    fault::Runtime::Handle frame_type;
    fault::Runtime::Handle frame_crc;
    fault::Runtime::Handle auth_tag;
    fault::Runtime::Handle data_len_clamp;
    fault::Runtime::Handle data_inner_len;
    fault::Runtime::Handle dup_capacity;
    fault::Runtime::Handle dup_count;
    fault::Runtime::Handle reply_crc_ok;
    fault::Runtime::Handle reply_type_ok;
};

// Site ids are part of the testbed's contract with recorded fault programs.
namespace site_id {
inline constexpr uint32_t PreconnectCfg = 1;
inline constexpr uint32_t SessionSanity = 2;
inline constexpr uint32_t HelloNonce = 3;
inline constexpr uint32_t StepDispatch = 4;
inline constexpr uint32_t FrameType = 5;
inline constexpr uint32_t FrameCrc = 6;
inline constexpr uint32_t AuthTag = 7;
inline constexpr uint32_t DataLenClamp = 8;
inline constexpr uint32_t DataInnerLen = 9;
inline constexpr uint32_t DupCapacity = 10;
inline constexpr uint32_t DupCount = 11;
inline constexpr uint32_t ReplyCrcOk = 12;
inline constexpr uint32_t ReplyTypeOk = 13;
} // namespace site_id

ClientSites register_client_sites(fault::Runtime& rt);

// Transport abstraction so the client script runs over sockets in the
// binaries and over an in-process pipe in tests.
struct RecvResult {
    enum class Kind { Frame, Timeout, Closed, Malformed };
    Kind kind = Kind::Timeout;
    Bytes wire; // complete wire frame when kind == Frame
};

class Channel {
public:
    virtual ~Channel() = default;
    virtual bool send(const Bytes& wire) = 0;
    virtual RecvResult recv(int timeout_ms) = 0;
};

class TranscriptWriter;

// The scripted weird-peer client: HELLO, AUTH (hmac only), 3x DATA, DUP,
// BYE. Faults, not the script, create diversity. The guard hooks fire the
// designed pre/post-connect weird-peer crashes.
class ClientScript {
public:
    ClientScript(const PeerConfig& cfg, fault::Runtime& rt, const ClientSites& sites);

    // Called before connecting; aborts the process when the config guard
    // value is faulted (the designed always-fatal pre-connect site).
    void preconnect_check();
    // Called right after connecting; aborts when the sanity branch flips.
    void postconnect_check();

    // Runs the scripted session over the channel. Returns the process exit
    // code (0: session completed or ended by the peer).
    int run(Channel& ch, TranscriptWriter* rec = nullptr);

    const Bytes& client_nonce() const { return client_nonce_; }
    int error_count() const { return errors_; }

private:
    struct Step {
        uint32_t ordinal; // dispatch case: 0 HELLO, 1 AUTH, 2 DATA, 3 DUP, 4 BYE, 5 skip
        Bytes data_content;
    };

    Bytes build_payload(uint32_t ordinal, const Step& step);
    Bytes assemble(uint32_t ordinal, Bytes payload);
    void handle_reply(uint32_t expected_ordinal, const Bytes& wire);
    // Reads whatever replies are queued (one bounded wait for the first
    // read); false once the peer closed the session.
    bool sweep_replies(Channel& ch, int timeout_ms);

    struct Outstanding {
        uint32_t ordinal;
        int send_index;
    };

    const PeerConfig& cfg_;
    fault::Runtime& rt_;
    ClientSites sites_;
    Bytes client_nonce_;
    Bytes server_nonce_;
    std::vector<Step> steps_;
    std::deque<Outstanding> pending_; // sent frames awaiting replies, oldest first
    // Transcript bookkeeping: replies are paired to the frame they answer so
    // the recorded order is the protocol order, independent of read timing.
    std::vector<Bytes> sent_wires_;
    std::map<int, Bytes> replies_by_send_;
    std::vector<Bytes> stray_replies_;
    int errors_ = 0;
};

// Scripted contents, shared with tests and witness builders.
inline constexpr const char* kDataContents[3] = {"x", "ping-2", "ping-3"};
inline constexpr uint8_t kDupCapacity = 4;
inline constexpr uint8_t kDupCount = 2;
inline constexpr const char* kDupEntry = "dup";
inline constexpr uint8_t kCfgGuardValue = 7;
inline constexpr int kReplyTimeoutMs = 20; // one-shot wait for the CHALLENGE
inline constexpr int kFinalDrainMs = 10;   // end-of-script reply collection

// Coverage point ids (server side 1xx, client side 2xx).
namespace covpt {
inline constexpr uint64_t SessionStart = 100;
inline constexpr uint64_t FrameOk = 101;
inline constexpr uint64_t FrameCrcBad = 102;
inline constexpr uint64_t FrameBadLength = 103;
inline constexpr uint64_t Hello = 110;
inline constexpr uint64_t HelloBad = 111;
inline constexpr uint64_t ChallengeSent = 112;
inline constexpr uint64_t AuthRecv = 120;
inline constexpr uint64_t AuthOk = 121;
inline constexpr uint64_t AuthBad = 122;
inline constexpr uint64_t Data = 130;
inline constexpr uint64_t DataEcho = 131;
inline constexpr uint64_t DataLenLie = 132;
inline constexpr uint64_t DataShort = 133;
inline constexpr uint64_t Dup = 140;
inline constexpr uint64_t DupInsert = 141;
inline constexpr uint64_t DupReject = 142;
inline constexpr uint64_t Bye = 150;
inline constexpr uint64_t ClosedFrame = 151;
inline constexpr uint64_t MalformedClose = 160;
inline constexpr uint64_t UnknownType = 161;
inline constexpr uint64_t SessionEnd = 162;
inline constexpr uint64_t DispatchBase = 170; // +frame type
} // namespace covpt

} // namespace ftn::testbed
