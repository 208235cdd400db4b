#include "ftn/config.hpp"

#include <functional>
#include <sstream>

namespace ftn::cfg {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Fault: return "fault";
        case Mode::Baseline: return "baseline";
        case Mode::IdentityCheck: return "identity-check";
        case Mode::Reproduce: return "reproduce";
    }
    return "?";
}

std::optional<Mode> parse_mode(const std::string& s) {
    for (Mode m : {Mode::Fault, Mode::Baseline, Mode::IdentityCheck, Mode::Reproduce})
        if (s == mode_name(m)) return m;
    return std::nullopt;
}

std::vector<std::string> PeerEntry::split_args() const {
    std::vector<std::string> out;
    std::istringstream is(args);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::vector<std::pair<std::string, std::string>> PeerEntry::split_env() const {
    std::vector<std::pair<std::string, std::string>> out;
    size_t pos = 0;
    while (pos < env.size()) {
        size_t semi = env.find(';', pos);
        std::string item = env.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
        if (!item.empty()) {
            size_t eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("peer env entry lacks '=': " + item);
            out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
        if (semi == std::string::npos) break;
        pos = semi + 1;
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (...) {
        throw ConfigError(key + ": not an unsigned integer: '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (...) {
        throw ConfigError(key + ": not an integer: '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (...) {
        throw ConfigError(key + ": not a number: '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

std::string fmt_double(double d) {
    std::ostringstream os;
    os << d;
    return os.str();
}

// One table drives set(), parse() and serialize() so the three stay in sync.
struct Field {
    const char* section;
    const char* key;
    std::function<void(CampaignConfig&, const std::string&)> set;
    std::function<std::string(const CampaignConfig&)> get;
};

const std::vector<Field>& fields() {
    auto peer = [](CampaignConfig& c, bool weird) -> PeerEntry& { return weird ? c.weird : c.target; };
    auto cpeer = [](const CampaignConfig& c, bool weird) -> const PeerEntry& {
        return weird ? c.weird : c.target;
    };
    auto peer_fields = [&](const char* section, bool weird, std::vector<Field>& out) {
        out.push_back({section, "exe",
                       [peer, weird](CampaignConfig& c, const std::string& v) { peer(c, weird).exe = v; },
                       [cpeer, weird](const CampaignConfig& c) { return cpeer(c, weird).exe; }});
        out.push_back({section, "args",
                       [peer, weird](CampaignConfig& c, const std::string& v) { peer(c, weird).args = v; },
                       [cpeer, weird](const CampaignConfig& c) { return cpeer(c, weird).args; }});
        out.push_back({section, "side",
                       [peer, weird, section](CampaignConfig& c, const std::string& v) {
                           if (v == "client") peer(c, weird).side = orch::Side::Client;
                           else if (v == "server") peer(c, weird).side = orch::Side::Server;
                           else throw ConfigError(std::string(section) + ".side: expected client|server");
                       },
                       [cpeer, weird](const CampaignConfig& c) {
                           return cpeer(c, weird).side == orch::Side::Client ? "client" : "server";
                       }});
        out.push_back({section, "env",
                       [peer, weird](CampaignConfig& c, const std::string& v) { peer(c, weird).env = v; },
                       [cpeer, weird](const CampaignConfig& c) { return cpeer(c, weird).env; }});
        out.push_back({section, "grace_ms",
                       [peer, weird, section](CampaignConfig& c, const std::string& v) {
                           peer(c, weird).grace_ms = to_int(std::string(section) + ".grace_ms", v);
                       },
                       [cpeer, weird](const CampaignConfig& c) {
                           return std::to_string(cpeer(c, weird).grace_ms);
                       }});
    };

    static const std::vector<Field> table = [&] {
        std::vector<Field> t;
        t.push_back({"campaign", "mode",
                     [](CampaignConfig& c, const std::string& v) {
                         auto m = parse_mode(v);
                         if (!m) throw ConfigError("campaign.mode: unknown mode '" + v + "'");
                         c.mode = *m;
                     },
                     [](const CampaignConfig& c) { return std::string(mode_name(c.mode)); }});
        t.push_back({"campaign", "seed",
                     [](CampaignConfig& c, const std::string& v) { c.seed = to_u64("campaign.seed", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.seed); }});
        t.push_back({"campaign", "iterations",
                     [](CampaignConfig& c, const std::string& v) { c.iterations = to_u64("campaign.iterations", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.iterations); }});
        t.push_back({"campaign", "wall_time_s",
                     [](CampaignConfig& c, const std::string& v) { c.wall_time_s = to_u64("campaign.wall_time_s", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.wall_time_s); }});
        t.push_back({"campaign", "workers",
                     [](CampaignConfig& c, const std::string& v) { c.workers = to_int("campaign.workers", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.workers); }});
        t.push_back({"campaign", "stop_on_crash",
                     [](CampaignConfig& c, const std::string& v) { c.stop_on_crash = to_bool("campaign.stop_on_crash", v); },
                     [](const CampaignConfig& c) { return std::string(c.stop_on_crash ? "true" : "false"); }});
        t.push_back({"campaign", "identity_reps",
                     [](CampaignConfig& c, const std::string& v) { c.identity_reps = to_int("campaign.identity_reps", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.identity_reps); }});
        t.push_back({"campaign", "transcript",
                     [](CampaignConfig& c, const std::string& v) { c.transcript = v; },
                     [](const CampaignConfig& c) { return c.transcript; }});
        t.push_back({"campaign", "out",
                     [](CampaignConfig& c, const std::string& v) { c.out_dir = v; },
                     [](const CampaignConfig& c) { return c.out_dir; }});

        peer_fields("weird", true, t);
        peer_fields("target", false, t);

        t.push_back({"scheduler", "probes_per_site",
                     [](CampaignConfig& c, const std::string& v) { c.sched.probes_per_site = to_int("scheduler.probes_per_site", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.sched.probes_per_site); }});
        t.push_back({"scheduler", "crash_threshold",
                     [](CampaignConfig& c, const std::string& v) { c.sched.crash_threshold = to_int("scheduler.crash_threshold", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.sched.crash_threshold); }});
        t.push_back({"scheduler", "p_favored",
                     [](CampaignConfig& c, const std::string& v) { c.sched.p_favored = to_double("scheduler.p_favored", v); },
                     [](const CampaignConfig& c) { return fmt_double(c.sched.p_favored); }});
        t.push_back({"scheduler", "weight_stream",
                     [](CampaignConfig& c, const std::string& v) { c.sched.weight_stream = to_int("scheduler.weight_stream", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.sched.weight_stream); }});
        t.push_back({"scheduler", "weight_splice",
                     [](CampaignConfig& c, const std::string& v) { c.sched.weight_splice = to_int("scheduler.weight_splice", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.sched.weight_splice); }});
        t.push_back({"scheduler", "weight_extend",
                     [](CampaignConfig& c, const std::string& v) { c.sched.weight_extend = to_int("scheduler.weight_extend", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.sched.weight_extend); }});
        t.push_back({"scheduler", "dormant_weight",
                     [](CampaignConfig& c, const std::string& v) { c.sched.dormant_weight = to_double("scheduler.dormant_weight", v); },
                     [](const CampaignConfig& c) { return fmt_double(c.sched.dormant_weight); }});
        t.push_back({"scheduler", "default_probe_bytes",
                     [](CampaignConfig& c, const std::string& v) { c.sched.default_probe_bytes = to_int("scheduler.default_probe_bytes", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.sched.default_probe_bytes); }});

        t.push_back({"orchestrator", "run_timeout_ms",
                     [](CampaignConfig& c, const std::string& v) { c.timeouts.run_ms = to_int("orchestrator.run_timeout_ms", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.timeouts.run_ms); }});
        t.push_back({"orchestrator", "drain_grace_ms",
                     [](CampaignConfig& c, const std::string& v) { c.timeouts.drain_ms = to_int("orchestrator.drain_grace_ms", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.timeouts.drain_ms); }});
        t.push_back({"orchestrator", "ready_grace_ms",
                     [](CampaignConfig& c, const std::string& v) { c.timeouts.ready_ms = to_int("orchestrator.ready_grace_ms", v); },
                     [](const CampaignConfig& c) { return std::to_string(c.timeouts.ready_ms); }});
        t.push_back({"orchestrator", "transport",
                     [](CampaignConfig& c, const std::string& v) {
                         if (v == "tcp") c.transport = proc::Transport::Tcp;
                         else if (v == "udp") c.transport = proc::Transport::Udp;
                         else throw ConfigError("orchestrator.transport: expected tcp|udp");
                     },
                     [](const CampaignConfig& c) {
                         return std::string(c.transport == proc::Transport::Tcp ? "tcp" : "udp");
                     }});
        return t;
    }();
    return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields())
        if (section == f.section && key == f.key) return &f;
    return nullptr;
}

} // namespace

CampaignConfig CampaignConfig::parse(const std::string& text) {
    CampaignConfig c;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = s.substr(1, s.size() - 2);
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        const Field* f = find_field(section, key);
        if (!f)
            throw ConfigError("line " + std::to_string(lineno) + ": unknown option " + section + "." + key);
        try {
            f->set(c, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

std::string CampaignConfig::serialize() const {
    std::ostringstream os;
    std::string current;
    for (const auto& f : fields()) {
        if (current != f.section) {
            if (!current.empty()) os << '\n';
            current = f.section;
            os << '[' << current << "]\n";
        }
        os << f.key << " = " << f.get(*this) << '\n';
    }
    return os.str();
}

CampaignConfig CampaignConfig::load(const std::string& path) { return parse(read_text_file(path)); }

void CampaignConfig::save(const std::string& path) const { write_file(path, serialize()); }

void CampaignConfig::set(const std::string& section_key, const std::string& value) {
    size_t dot = section_key.find('.');
    if (dot == std::string::npos) throw ConfigError("expected section.key, got '" + section_key + "'");
    const Field* f = find_field(section_key.substr(0, dot), section_key.substr(dot + 1));
    if (!f) throw ConfigError("unknown option " + section_key);
    f->set(*this, value);
}

std::vector<std::string> CampaignConfig::validate() const {
    std::vector<std::string> errs;
    if (iterations == 0 && wall_time_s == 0)
        errs.push_back("campaign.iterations/campaign.wall_time_s: at least one budget must be positive");
    if (workers < 1) errs.push_back("campaign.workers: must be >= 1");
    if (identity_reps < 1) errs.push_back("campaign.identity_reps: must be >= 1");
    if ((mode == Mode::Fault || mode == Mode::IdentityCheck || mode == Mode::Reproduce) && weird.exe.empty())
        errs.push_back("weird.exe: required for this mode");
    if (target.exe.empty()) errs.push_back("target.exe: required");
    if (mode == Mode::Baseline && transcript.empty())
        errs.push_back("campaign.transcript: required in baseline mode");
    if (mode != Mode::Baseline && weird.side == target.side)
        errs.push_back("weird.side/target.side: one peer must be the server, the other the client");
    if (sched.probes_per_site < 1) errs.push_back("scheduler.probes_per_site: must be >= 1");
    if (sched.crash_threshold < 1 || sched.crash_threshold > sched.probes_per_site)
        errs.push_back("scheduler.crash_threshold: must be in [1, probes_per_site]");
    if (sched.p_favored < 0 || sched.p_favored > 1) errs.push_back("scheduler.p_favored: must be in [0,1]");
    if (sched.weight_stream + sched.weight_splice + sched.weight_extend <= 0)
        errs.push_back("scheduler.weight_*: total mutation weight must be positive");
    if (timeouts.run_ms <= 0) errs.push_back("orchestrator.run_timeout_ms: must be positive");
    return errs;
}

orch::PeerSpec CampaignConfig::weird_spec() const {
    orch::PeerSpec s;
    s.exe = weird.exe;
    s.args = weird.split_args();
    s.role = orch::Role::WeirdPeer;
    s.side = weird.side;
    s.env = weird.split_env();
    s.startup_grace_ms = weird.grace_ms;
    return s;
}

orch::PeerSpec CampaignConfig::target_spec() const {
    orch::PeerSpec s;
    s.exe = target.exe;
    s.args = target.split_args();
    s.role = orch::Role::TargetPeer;
    s.side = target.side;
    s.env = target.split_env();
    s.startup_grace_ms = target.grace_ms;
    return s;
}

} // namespace ftn::cfg
