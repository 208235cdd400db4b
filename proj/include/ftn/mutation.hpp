#pragma once

#include <cstdint>
#include <vector>

#include "ftn/rng.hpp"

namespace ftn::mut {

// Byte-buffer havoc operators. The fault fuzzer (stream mutation) and the
// replay baseline (record mutation) draw from this same set so comparisons
// isolate the injection strategy, not the operators.
enum class Op : uint8_t {
    BitFlip,
    ByteRandom,
    ByteZero,
    ByteFF,
    BlockRandom,
    BlockZero,
};

inline constexpr int kOpCount = 6;

void apply_op(std::vector<uint8_t>& data, Op op, Rng& rng);

// Picks one operator and applies it. No-op on an empty buffer.
Op apply(std::vector<uint8_t>& data, Rng& rng);

} // namespace ftn::mut
