#include "ftn/fault_program.hpp"

#include <cstring>
#include <stdexcept>

namespace ftn::fault {

Bytes ProgramFile::serialize() const {
    if (entries.size() > 0xffff) throw std::runtime_error("fault program has too many entries");
    Bytes out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16le(out, kVersion);
    put_u16le(out, static_cast<uint16_t>(entries.size()));
    for (const auto& e : entries) {
        put_u32le(out, e.site_id);
        put_u32le(out, static_cast<uint32_t>(e.stream.size()));
        out.insert(out.end(), e.stream.begin(), e.stream.end());
    }
    return out;
}

ProgramFile ProgramFile::parse(std::span<const uint8_t> data) {
    auto need = [&](size_t off, size_t n) {
        if (off + n > data.size()) throw std::runtime_error("truncated fault program file");
    };
    need(0, 8);
    if (std::memcmp(data.data(), kMagic, 4) != 0) throw std::runtime_error("bad fault program magic");
    uint16_t version = get_u16le(data.data() + 4);
    if (version != kVersion) throw std::runtime_error("unsupported fault program version");
    uint16_t count = get_u16le(data.data() + 6);

    ProgramFile pf;
    size_t off = 8;
    for (uint16_t i = 0; i < count; ++i) {
        need(off, 8);
        ProgramEntry e;
        e.site_id = get_u32le(data.data() + off);
        uint32_t len = get_u32le(data.data() + off + 4);
        off += 8;
        need(off, len);
        e.stream.assign(data.begin() + off, data.begin() + off + len);
        off += len;
        pf.entries.push_back(std::move(e));
    }
    if (off != data.size()) throw std::runtime_error("trailing bytes in fault program file");
    return pf;
}

void ProgramFile::save(const std::string& path) const {
    write_file(path, std::span<const uint8_t>(serialize()));
}

ProgramFile ProgramFile::load(const std::string& path) {
    Bytes data = read_file(path);
    return parse(data);
}

} // namespace ftn::fault
