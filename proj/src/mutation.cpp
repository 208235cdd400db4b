#include "ftn/mutation.hpp"

#include <algorithm>

namespace ftn::mut {

void apply_op(std::vector<uint8_t>& data, Op op, Rng& rng) {
    if (data.empty()) return;
    size_t n = data.size();
    switch (op) {
        case Op::BitFlip: {
            size_t bit = rng.below(n * 8);
            data[bit >> 3] ^= static_cast<uint8_t>(1u << (bit & 7));
            break;
        }
        case Op::ByteRandom:
            data[rng.below(n)] = rng.byte();
            break;
        case Op::ByteZero:
            data[rng.below(n)] = 0x00;
            break;
        case Op::ByteFF:
            data[rng.below(n)] = 0xff;
            break;
        case Op::BlockRandom: {
            size_t start = rng.below(n);
            size_t len = 1 + rng.below(std::min<size_t>(n - start, 16));
            for (size_t i = 0; i < len; ++i) data[start + i] = rng.byte();
            break;
        }
        case Op::BlockZero: {
            size_t start = rng.below(n);
            size_t len = 1 + rng.below(std::min<size_t>(n - start, 16));
            std::fill(data.begin() + start, data.begin() + start + len, 0);
            break;
        }
    }
}

Op apply(std::vector<uint8_t>& data, Rng& rng) {
    Op op = static_cast<Op>(rng.below(kOpCount));
    apply_op(data, op, rng);
    return op;
}

} // namespace ftn::mut
