#include "ftn/fault_runtime.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace ftn::fault {

Runtime::Handle Runtime::register_site(const FaultSiteDescriptor& desc) {
    if (sealed_) throw std::runtime_error("fault runtime already sealed");
    if (auto err = desc.validate()) throw std::runtime_error(*err + " (site " + std::to_string(desc.site_id) + ")");
    if (by_id_.count(desc.site_id))
        throw std::runtime_error("duplicate fault site id " + std::to_string(desc.site_id));
    Handle h = static_cast<Handle>(sites_.size());
    sites_.push_back(Site{desc, FaultStream{}, false, 0});
    by_id_[desc.site_id] = h;
    return h;
}

void Runtime::register_call_table(const std::string& arity_class, std::vector<std::string> entries) {
    if (sealed_) throw std::runtime_error("fault runtime already sealed");
    if (entries.empty()) throw std::runtime_error("call table must not be empty: " + arity_class);
    call_tables_[arity_class] = std::move(entries);
}

void Runtime::seal() {
    if (sealed_) return;
    sealed_ = true;
    if (!manifest_path_.empty()) write_file(manifest_path_, manifest_text());
}

void Runtime::configure(Mode mode, const ProgramFile* program) {
    mode_ = mode;
    for (auto& s : sites_) {
        s.stream = FaultStream{};
        s.has_stream = false;
        s.hits = 0;
    }
    if (program) {
        for (const auto& e : program->entries) {
            auto it = by_id_.find(e.site_id);
            if (it == by_id_.end()) continue; // stale program entry: ignore
            Site& s = sites_[it->second];
            s.stream = FaultStream{e.stream};
            s.has_stream = true;
        }
    }
}

void Runtime::init_from_env() {
    Mode mode = Mode::Off;
    if (const char* m = std::getenv(kEnvMode)) {
        std::string v = m;
        if (v == "faulting") mode = Mode::Faulting;
        else if (v == "counting") mode = Mode::Counting;
        else if (v == "off") mode = Mode::Off;
        else throw std::runtime_error(std::string("bad ") + kEnvMode + " value: " + v);
    }
    if (const char* p = std::getenv(kEnvManifestOut)) manifest_path_ = p;
    if (const char* p = std::getenv(kEnvHitsOut)) hits_path_ = p;

    ProgramFile program;
    bool have_program = false;
    if (const char* p = std::getenv(kEnvProgram)) {
        program = ProgramFile::load(p);
        have_program = true;
    }
    configure(mode, have_program ? &program : nullptr);

    static bool hook_installed = false;
    if (!hook_installed) {
        hook_installed = true;
        std::atexit([] { Runtime::global().flush_outputs(); });
    }
}

uint64_t Runtime::take_bits(Site& s, unsigned n_bits) {
    ++s.hits;
    if (mode_ != Mode::Faulting || !s.has_stream) return 0;
    return s.stream.consume(n_bits);
}

uint64_t Runtime::value(Handle h, uint64_t original) {
    Site& s = sites_[h];
    unsigned w = s.desc.width_bits;
    uint64_t mask = (w == 64) ? ~0ULL : ((1ULL << w) - 1);
    return (original ^ take_bits(s, w)) & mask;
}

bool Runtime::branch(Handle h, bool condition) {
    return condition ^ (take_bits(sites_[h], 1) & 1);
}

uint32_t Runtime::switch_case(Handle h, uint32_t original_index, uint32_t case_count) {
    uint64_t b = take_bits(sites_[h], 8);
    if (b == 0 || case_count == 0) return original_index;
    return static_cast<uint32_t>((original_index + b) % case_count);
}

CallAction Runtime::call(Handle h, uint32_t table_len) {
    uint64_t b = take_bits(sites_[h], 8);
    if (b == 0 || table_len == 0) return CallAction{false, 0};
    uint32_t r = static_cast<uint32_t>(b % (table_len + 1));
    if (r == table_len) return CallAction{true, 0};
    return CallAction{false, r};
}

std::map<uint32_t, uint64_t> Runtime::hit_counts() const {
    std::map<uint32_t, uint64_t> out;
    for (const auto& [id, h] : by_id_)
        if (sites_[h].hits > 0) out[id] = sites_[h].hits;
    return out;
}

uint64_t Runtime::hits_for(uint32_t site_id) const {
    auto it = by_id_.find(site_id);
    return it == by_id_.end() ? 0 : sites_[it->second].hits;
}

uint64_t Runtime::bits_consumed(Handle h) const { return sites_[h].stream.cursor_bits(); }

void Runtime::reset_run() {
    for (auto& s : sites_) {
        s.stream.reset();
        s.hits = 0;
    }
}

std::string Runtime::manifest_text() const {
    std::ostringstream os;
    for (const auto& [id, h] : by_id_) {
        const auto& d = sites_[h].desc;
        os << id << '\t' << kind_name(d.kind) << '\t' << unsigned(d.width_bits) << '\t' << d.label << '\n';
    }
    return os.str();
}

std::string Runtime::hits_text() const {
    std::ostringstream os;
    for (const auto& [id, hits] : hit_counts()) os << id << '\t' << hits << '\n';
    return os.str();
}

void Runtime::flush_outputs() {
    if (!hits_path_.empty()) write_file(hits_path_, hits_text());
}

Runtime& Runtime::global() {
    static Runtime rt;
    return rt;
}

std::vector<FaultSiteDescriptor> parse_manifest(const std::string& text) {
    std::vector<FaultSiteDescriptor> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string id_s, kind_s, width_s, label;
        if (!std::getline(ls, id_s, '\t') || !std::getline(ls, kind_s, '\t') || !std::getline(ls, width_s, '\t'))
            throw std::runtime_error("malformed manifest line: " + line);
        std::getline(ls, label);
        FaultSiteDescriptor d;
        d.site_id = static_cast<uint32_t>(std::stoul(id_s));
        auto kind = parse_kind(kind_s);
        if (!kind) throw std::runtime_error("unknown fault kind in manifest: " + kind_s);
        d.kind = *kind;
        d.width_bits = static_cast<uint8_t>(std::stoul(width_s));
        d.label = label;
        out.push_back(std::move(d));
    }
    return out;
}

std::map<uint32_t, uint64_t> parse_hits(const std::string& text) {
    std::map<uint32_t, uint64_t> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("malformed hits line: " + line);
        out[static_cast<uint32_t>(std::stoul(line.substr(0, tab)))] = std::stoull(line.substr(tab + 1));
    }
    return out;
}

} // namespace ftn::fault
