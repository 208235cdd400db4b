#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "ftn/bytes.hpp"

namespace ftn::testbed {

// CRC-32 (IEEE polynomial, reflected, init all-ones, final xor all-ones).
uint32_t crc32(std::span<const uint8_t> data);

enum class FrameType : uint8_t {
    Hello = 1,
    Challenge = 2,
    Auth = 3,
    Data = 4,
    Dup = 5,
    Bye = 6,
};

const char* frame_type_name(uint8_t type);

inline constexpr size_t kMaxPayload = 4096;

// Wire layout, all integers little-endian:
//   length  u16   payload byte count (<= 4096)
//   type    u8
//   payload length bytes
//   crc     u32   over (length, type, payload)
struct Frame {
    uint8_t type = 0;
    Bytes payload;

    Bytes encode() const;                      // computes the crc
    Bytes encode_with_crc(uint32_t crc) const; // caller-supplied crc (fault route)
};

enum class DecodeStatus {
    Ok,
    NeedMore,   // stream: incomplete frame
    BadCrc,     // integrity failure: drop, session continues
    BadLength,  // framing violation: unrecoverable on a stream
};

struct Decoded {
    DecodeStatus status = DecodeStatus::NeedMore;
    Frame frame;
    size_t consumed = 0;
};

// Decodes one frame from the front of `data`. `check_crc` is false for the
// integrity=none testbed configuration.
Decoded decode_frame(std::span<const uint8_t> data, bool check_crc);

} // namespace ftn::testbed
