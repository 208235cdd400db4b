#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ftn::fault {

enum class FaultKind : uint8_t {
    ValueLoad = 0,
    ValueStore = 1,
    Branch = 2,
    Switch = 3,
    CallEntry = 4,
};

const char* kind_name(FaultKind k);
std::optional<FaultKind> parse_kind(const std::string& name);

// One instrumentable program location. site_id is the stable identity used
// in fault program files and manifests; width_bits is the number of stream
// bits one execution of the site consumes.
struct FaultSiteDescriptor {
    uint32_t site_id = 0;
    FaultKind kind = FaultKind::Branch;
    uint8_t width_bits = 1;
    std::string label;
    std::string arity_class; // CallEntry only: signature-group key

    // Returns an error message if the descriptor violates the width rules.
    std::optional<std::string> validate() const;
};

inline std::optional<std::string> FaultSiteDescriptor::validate() const {
    switch (kind) {
        case FaultKind::Branch:
            if (width_bits != 1) return "Branch sites must have width_bits=1";
            break;
        case FaultKind::Switch:
        case FaultKind::CallEntry:
            if (width_bits != 8) return "Switch/CallEntry sites must have width_bits=8";
            break;
        case FaultKind::ValueLoad:
        case FaultKind::ValueStore:
            if (width_bits != 8 && width_bits != 16 && width_bits != 32 && width_bits != 64)
                return "Value sites must have width_bits in {8,16,32,64}";
            break;
    }
    return std::nullopt;
}

inline const char* kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::ValueLoad: return "ValueLoad";
        case FaultKind::ValueStore: return "ValueStore";
        case FaultKind::Branch: return "Branch";
        case FaultKind::Switch: return "Switch";
        case FaultKind::CallEntry: return "CallEntry";
    }
    return "?";
}

inline std::optional<FaultKind> parse_kind(const std::string& name) {
    if (name == "ValueLoad") return FaultKind::ValueLoad;
    if (name == "ValueStore") return FaultKind::ValueStore;
    if (name == "Branch") return FaultKind::Branch;
    if (name == "Switch") return FaultKind::Switch;
    if (name == "CallEntry") return FaultKind::CallEntry;
    return std::nullopt;
}

} // namespace ftn::fault
