#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftn/bytes.hpp"

namespace ftn::fault {

struct ProgramEntry {
    uint32_t site_id = 0;
    std::vector<uint8_t> stream;

    bool operator==(const ProgramEntry&) const = default;
};

// Serialized fault program: the bit-exact unit handed to a weird peer.
//
// File layout (little-endian):
//   magic   "FTNP"     4 bytes
//   version u16        currently 1
//   count   u16        number of entries
//   entries            site_id u32, stream_len u32, stream bytes
struct ProgramFile {
    static constexpr char kMagic[4] = {'F', 'T', 'N', 'P'};
    static constexpr uint16_t kVersion = 1;

    std::vector<ProgramEntry> entries;

    bool operator==(const ProgramFile&) const = default;

    Bytes serialize() const;
    static ProgramFile parse(std::span<const uint8_t> data); // throws on malformed input

    void save(const std::string& path) const;
    static ProgramFile load(const std::string& path);
};

} // namespace ftn::fault
