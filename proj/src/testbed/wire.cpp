#include "ftn/testbed/wire.hpp"

#include <array>

namespace ftn::testbed {

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t n = 0; n < 256; ++n) {
        uint32_t c = n;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[n] = c;
    }
    return table;
}

} // namespace

uint32_t crc32(std::span<const uint8_t> data) {
    static const auto table = make_crc_table();
    uint32_t crc = 0xFFFFFFFFu;
    for (uint8_t b : data) crc = table[(crc ^ b) & 0xff] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

const char* frame_type_name(uint8_t type) {
    switch (static_cast<FrameType>(type)) {
        case FrameType::Hello: return "HELLO";
        case FrameType::Challenge: return "CHALLENGE";
        case FrameType::Auth: return "AUTH";
        case FrameType::Data: return "DATA";
        case FrameType::Dup: return "DUP";
        case FrameType::Bye: return "BYE";
    }
    return "UNKNOWN";
}

Bytes Frame::encode() const {
    Bytes head;
    put_u16le(head, static_cast<uint16_t>(payload.size()));
    head.push_back(type);
    head.insert(head.end(), payload.begin(), payload.end());
    return encode_with_crc(crc32(head));
}

Bytes Frame::encode_with_crc(uint32_t crc) const {
    Bytes out;
    put_u16le(out, static_cast<uint16_t>(payload.size()));
    out.push_back(type);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32le(out, crc);
    return out;
}

Decoded decode_frame(std::span<const uint8_t> data, bool check_crc) {
    Decoded d;
    if (data.size() < 3) return d;
    uint16_t len = get_u16le(data.data());
    if (len > kMaxPayload) {
        d.status = DecodeStatus::BadLength;
        d.consumed = data.size();
        return d;
    }
    size_t total = 3u + len + 4u;
    if (data.size() < total) return d;
    uint32_t wire_crc = get_u32le(data.data() + 3 + len);
    d.consumed = total;
    if (check_crc && wire_crc != crc32(data.subspan(0, 3u + len))) {
        d.status = DecodeStatus::BadCrc;
        return d;
    }
    d.status = DecodeStatus::Ok;
    d.frame.type = data[2];
    d.frame.payload.assign(data.begin() + 3, data.begin() + 3 + len);
    return d;
}

} // namespace ftn::testbed
