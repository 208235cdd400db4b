#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace ftn::fault {

// Per-site fuzzer input, consumed as a bit stream: bytes in sequence order,
// little-endian bit order within each byte. Running out of bits is not an
// error; once fewer than the requested bits remain the stream is exhausted
// and every consume() yields 0, which all fault kinds treat as the identity
// fault.
class FaultStream {
public:
    FaultStream() = default;
    explicit FaultStream(std::vector<uint8_t> bits) : bits_(std::move(bits)) {}

    // n_bits must be one of {1,8,16,32,64}; returns the next n_bits in the
    // low bits of the result, or 0 once exhausted.
    uint64_t consume(unsigned n_bits) {
        if (exhausted_ || n_bits > remaining_bits()) {
            exhausted_ = true;
            return 0;
        }
        uint64_t word = 0;
        for (unsigned i = 0; i < n_bits; ++i, ++cursor_) {
            uint64_t bit = (bits_[cursor_ >> 3] >> (cursor_ & 7)) & 1u;
            word |= bit << i;
        }
        return word;
    }

    size_t cursor_bits() const { return cursor_; }
    size_t remaining_bits() const { return bits_.size() * 8 - cursor_; }
    bool exhausted() const { return exhausted_; }
    const std::vector<uint8_t>& bytes() const { return bits_; }

    void reset() {
        cursor_ = 0;
        exhausted_ = false;
    }

private:
    std::vector<uint8_t> bits_;
    size_t cursor_ = 0;
    bool exhausted_ = false;
};

} // namespace ftn::fault
