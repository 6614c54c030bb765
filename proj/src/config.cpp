#include "ltpfleo/config.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>

namespace ltp {
namespace {

struct Field {
    const char* key;
    const char* fallback;
    const char* help;
};

// Schema order is also the canonical order used for hashing.
const std::vector<Field>& schema() {
    static const std::vector<Field> fields = {
        {"run.mode", "ltp", "ltp | baseline"},
        {"run.seed", "1", "root seed; every random stream derives from it"},
        {"run.rounds", "20", "number of rounds T (leave empty when time_budget_s is set)"},
        {"run.time_budget_s", "", "simulated-time budget in seconds instead of rounds"},
        {"constellation.orbits", "5", "number of orbital planes P"},
        {"constellation.sats_per_orbit", "10", "satellites per plane S"},
        {"constellation.altitude_km", "780", "circular altitude"},
        {"constellation.orbit_altitudes_km", "", "optional per-plane altitudes, comma separated"},
        {"constellation.inclination_deg", "80", "inclination"},
        {"constellation.raan_spread_deg", "360", "RAAN spread across planes"},
        {"constellation.phasing", "1", "Walker phasing factor F"},
        {"station.latitude_deg", "45", "ground-station latitude"},
        {"station.longitude_deg", "-100", "ground-station longitude"},
        {"station.min_elevation_deg", "15", "elevation mask"},
        {"visibility.horizon_s", "86400", "initial prediction horizon"},
        {"visibility.max_horizon_s", "31622400", "horizon limit when extending"},
        {"visibility.sample_step_s", "10", "sampling step"},
        {"visibility.refine_tolerance_s", "0.1", "bisection tolerance at window edges"},
        {"ltp.L", "2", "target LTP guarantee (partition size)"},
        {"ltp.alpha", "3", "staleness tolerance: integer >= 1 or t"},
        {"ltp.inner", "data", "inner aggregation weighting: data | sum"},
        {"data.kind", "blobs", "blobs | linear-regression"},
        {"data.split", "iid", "iid | non-iid-2class"},
        {"data.samples_per_satellite", "200", "samples per satellite before the held-out split"},
        {"data.holdout_fraction", "0.1", "fraction of each satellite's data held out"},
        {"data.blob_std", "0.15", "blob standard deviation"},
        {"data.noise_std", "0.5", "regression target noise"},
        {"data.heterogeneity", "1.0", "regression spread of per-satellite optima"},
        {"data.dir", "", "directory of sat_<k>.csv files replacing synthesis"},
        {"loss.kind", "logistic-l2", "quadratic | logistic-l2 | mlp-small"},
        {"loss.num_features", "10", "feature dimension"},
        {"loss.num_classes", "10", "classes (classifiers)"},
        {"loss.hidden_units", "32", "mlp-small hidden width"},
        {"loss.regularization", "0.001", "L2 coefficient"},
        {"loss.clip_radius", "", "optional projection radius"},
        {"sgd.local_steps", "5", "local steps I"},
        {"sgd.mini_batch", "32", "mini-batch size"},
        {"sgd.lr_schedule", "constant", "constant | inverse (lr / (lr_offset + step))"},
        {"sgd.lr", "0.1", "learning rate, or numerator for the inverse schedule"},
        {"sgd.lr_offset", "0", "offset of the inverse schedule"},
        {"overhead.min_s", "60", "round overhead lower bound"},
        {"overhead.max_s", "180", "round overhead upper bound"},
        {"output.checkpoint_every", "0", "write a checkpoint every n rounds (0: final only)"},
    };
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class Resolver {
public:
    explicit Resolver(const ConfigFile& f) : file_(f) {
        for (const auto& [k, v] : f.values) {
            const bool known = std::any_of(schema().begin(), schema().end(),
                                           [&](const Field& fd) { return k == fd.key; });
            if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", f.source, k));
        }
    }

    std::string raw(const std::string& key) const {
        const auto it = file_.values.find(key);
        if (it != file_.values.end()) return it->second;
        for (const auto& fd : schema())
            if (key == fd.key) return fd.fallback;
        throw ConfigError(fmt::format("internal: no schema entry for '{}'", key));
    }

    bool present(const std::string& key) const { return !raw(key).empty(); }

    double number(const std::string& key) {
        const auto v = parse_double(key, raw(key));
        canonical_[key] = fmt::format("{}", v);
        return v;
    }

    std::optional<double> optional_number(const std::string& key) {
        if (!present(key)) {
            canonical_[key] = "";
            return std::nullopt;
        }
        return number(key);
    }

    std::size_t count(const std::string& key) {
        const auto s = raw(key);
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw ConfigError(fmt::format("{}: {} must be a non-negative integer, got '{}'", file_.source, key, s));
        canonical_[key] = fmt::format("{}", v);
        return v;
    }

    std::optional<std::size_t> optional_count(const std::string& key) {
        if (!present(key)) {
            canonical_[key] = "";
            return std::nullopt;
        }
        return count(key);
    }

    long long integer(const std::string& key) {
        const auto s = raw(key);
        long long v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw ConfigError(fmt::format("{}: {} must be an integer, got '{}'", file_.source, key, s));
        canonical_[key] = fmt::format("{}", v);
        return v;
    }

    std::string choice(const std::string& key, std::initializer_list<const char*> options) {
        const auto s = raw(key);
        for (const char* o : options)
            if (s == o) {
                canonical_[key] = s;
                return s;
            }
        std::string list;
        for (const char* o : options) list += (list.empty() ? "" : " | ") + std::string(o);
        throw ConfigError(fmt::format("{}: {} must be one of {}, got '{}'", file_.source, key, list, s));
    }

    std::vector<double> number_list(const std::string& key) {
        std::vector<double> out;
        std::stringstream ss(raw(key));
        std::string item;
        std::string canon;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            out.push_back(parse_double(key, item));
            canon += (canon.empty() ? "" : ",") + fmt::format("{}", out.back());
        }
        canonical_[key] = canon;
        return out;
    }

    void unset(const std::string& key) { canonical_[key] = ""; }

    std::string text(const std::string& key) {
        canonical_[key] = raw(key);
        return raw(key);
    }

    // Fields never read keep their raw value so the canonical form lists every key.
    std::string canonical() {
        std::string out;
        for (const auto& fd : schema()) {
            const auto it = canonical_.find(fd.key);
            out += fmt::format("{}={}\n", fd.key, it != canonical_.end() ? it->second : raw(fd.key));
        }
        return out;
    }

private:
    double parse_double(const std::string& key, const std::string& s) const {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
            throw ConfigError(fmt::format("{}: {} must be a finite number, got '{}'", file_.source, key, s));
        return v;
    }

    const ConfigFile& file_;
    std::map<std::string, std::string> canonical_;
};

}  // namespace

ConfigFile parse_config(std::istream& in, const std::string& source) {
    ConfigFile cfg;
    cfg.source = source;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError(fmt::format("{}:{}: malformed section header '{}'", source, line_no, line));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", source, line_no, line));
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, line_no));
        const auto full = section.empty() ? key : section + "." + key;
        if (cfg.values.count(full))
            throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, line_no, full));
        cfg.values[full] = trim(line.substr(eq + 1));
    }
    return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
    return parse_config(in, path.string());
}

void apply_override(ConfigFile& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(fmt::format("override '{}' must look like section.key=value", assignment));
    config.values[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

RunConfig resolve_config(const ConfigFile& file) {
    Resolver r(file);
    RunConfig out;
    SimConfig& s = out.sim;

    out.mode = r.choice("run.mode", {"ltp", "baseline"}) == "baseline" ? RunMode::baseline : RunMode::ltp;
    const auto seed = r.integer("run.seed");
    if (seed < 0) throw ConfigError("run.seed must be >= 0");
    s.seed = static_cast<std::uint64_t>(seed);
    s.time_budget_s = r.optional_number("run.time_budget_s");
    if (s.time_budget_s) {
        if (r.present("run.rounds") && file.values.count("run.rounds"))
            throw ConfigError("set only one of run.rounds and run.time_budget_s");
        r.unset("run.rounds");
    } else {
        s.rounds = r.count("run.rounds");
    }

    auto& c = s.constellation;
    c.num_orbits = r.count("constellation.orbits");
    c.sats_per_orbit = r.count("constellation.sats_per_orbit");
    c.altitude_km = r.number("constellation.altitude_km");
    c.orbit_altitudes_km = r.number_list("constellation.orbit_altitudes_km");
    c.inclination_deg = r.number("constellation.inclination_deg");
    c.raan_spread_deg = r.number("constellation.raan_spread_deg");
    c.phasing = static_cast<int>(r.integer("constellation.phasing"));
    s.station.latitude_deg = r.number("station.latitude_deg");
    s.station.longitude_deg = r.number("station.longitude_deg");
    s.station.min_elevation_deg = r.number("station.min_elevation_deg");
    s.horizon_s = r.number("visibility.horizon_s");
    s.max_horizon_s = r.number("visibility.max_horizon_s");
    s.visibility.sample_step_s = r.number("visibility.sample_step_s");
    s.visibility.refine_tolerance_s = r.number("visibility.refine_tolerance_s");

    s.target_ltp = r.count("ltp.L");
    const auto alpha = r.text("ltp.alpha");
    if (alpha == "t") {
        s.tolerance = StalenessTolerance::always_t();
    } else {
        const auto a = r.count("ltp.alpha");
        if (a < 1) throw ConfigError("ltp.alpha must be >= 1 or t");
        s.tolerance = StalenessTolerance::fixed(a);
    }
    s.inner = r.choice("ltp.inner", {"data", "sum"}) == "sum" ? InnerWeighting::sum : InnerWeighting::data;

    s.data.kind = r.choice("data.kind", {"blobs", "linear-regression"}) == "blobs" ? DataKind::blobs
                                                                                   : DataKind::linear_regression;
    s.data.split = r.choice("data.split", {"iid", "non-iid-2class"}) == "iid" ? SplitKind::iid
                                                                              : SplitKind::non_iid_2class;
    s.samples_per_satellite = r.count("data.samples_per_satellite");
    s.holdout_fraction = r.number("data.holdout_fraction");
    s.data.blob_std = r.number("data.blob_std");
    s.data.noise_std = r.number("data.noise_std");
    s.data.heterogeneity = r.number("data.heterogeneity");
    if (const auto dir = r.text("data.dir"); !dir.empty()) s.data_dir = dir;

    s.loss.kind = loss_kind_from_string(r.choice("loss.kind", {"quadratic", "logistic-l2", "mlp-small"}));
    s.loss.num_features = r.count("loss.num_features");
    s.loss.num_classes = r.count("loss.num_classes");
    s.loss.hidden_units = r.count("loss.hidden_units");
    s.loss.regularization = r.number("loss.regularization");
    s.loss.clip_radius = r.optional_number("loss.clip_radius");

    s.sgd.steps = r.count("sgd.local_steps");
    s.sgd.mini_batch = r.count("sgd.mini_batch");
    s.sgd.lr.kind = r.choice("sgd.lr_schedule", {"constant", "inverse"}) == "inverse" ? LearningRate::Kind::inverse
                                                                                     : LearningRate::Kind::constant;
    s.sgd.lr.c = r.number("sgd.lr");
    s.sgd.lr.offset = r.number("sgd.lr_offset");
    s.overhead_min_s = r.number("overhead.min_s");
    s.overhead_max_s = r.number("overhead.max_s");
    s.checkpoint_every = r.count("output.checkpoint_every");

    out.canonical = r.canonical();
    out.hash = sha256_hex(out.canonical);
    s.config_hash = out.hash;
    return out;
}

std::string default_config_text() {
    std::string out = "# LTP-FLEO run configuration (defaults)\n";
    std::string section;
    for (const auto& fd : schema()) {
        const std::string key = fd.key;
        const auto dot = key.find('.');
        const auto sec = key.substr(0, dot);
        if (sec != section) {
            out += fmt::format("\n[{}]\n", sec);
            section = sec;
        }
        out += fmt::format("{} = {}  # {}\n", key.substr(dot + 1), fd.fallback, fd.help);
    }
    return out;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

}  // namespace ltp
