#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "ftn/bytes.hpp"

namespace ftn::testbed {

// SHA-256 (FIPS 180-4). Self-contained; the testbed's keyed digest builds
// on it. Not intended as a hardened implementation; the roadblock property
// only needs the tag to be unforgeable by byte-level mutation.
std::array<uint8_t, 32> sha256(std::span<const uint8_t> data);

// HMAC-SHA256 (RFC 2104).
std::array<uint8_t, 32> hmac_sha256(std::span<const uint8_t> key, std::span<const uint8_t> msg);

inline std::array<uint8_t, 32> hmac_sha256(const Bytes& key, const Bytes& msg) {
    return hmac_sha256(std::span<const uint8_t>(key), std::span<const uint8_t>(msg));
}

} // namespace ftn::testbed
