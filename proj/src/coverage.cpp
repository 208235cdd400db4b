#include "ftn/coverage.hpp"

#include <stdexcept>

namespace ftn::cov {

Observation NoveltyIndex::observe(std::span<const uint8_t> map) {
    if (map.size() != virgin_.size())
        throw std::runtime_error("coverage map size mismatch: map " + std::to_string(map.size()) +
                                 " vs index " + std::to_string(virgin_.size()));
    Observation obs;
    for (size_t i = 0; i < map.size(); ++i) {
        uint32_t b = bucketize(map[i]);
        if (b > virgin_[i]) {
            if (virgin_[i] == 0) ++seen_;
            virgin_[i] = static_cast<uint8_t>(b);
            obs.novel_cells.push_back(static_cast<uint32_t>(i));
        }
    }
    obs.is_novel = !obs.novel_cells.empty();
    return obs;
}

} // namespace ftn::cov
