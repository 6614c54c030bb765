#include "ltpfleo/event_log.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace ltp {
namespace {

using json = nlohmann::ordered_json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
json optional_id(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> read_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

RoundRecord round_from_json(const json& j) {
    RoundRecord r;
    r.round = j.at("round").get<std::size_t>();
    r.start_s = j.at("start_s").get<double>();
    r.end_s = j.at("end_s").get<double>();
    r.skipped = j.at("skipped").get<bool>();
    r.warmup = j.value("warmup", false);
    r.primary = read_optional<PartitionId>(j, "primary");
    r.candidates = j.at("candidates").get<std::vector<PartitionId>>();
    r.selected = j.at("selected").get<std::vector<PartitionId>>();
    r.promoted = j.value("promoted", std::vector<PartitionId>{});
    r.trained = j.value("trained", std::vector<PartitionId>{});
    for (const auto& g : j.at("groups")) {
        GroupRecord gr;
        gr.partition = read_optional<PartitionId>(g, "partition");
        gr.members = g.at("members").get<std::vector<SatelliteId>>();
        gr.beta = g.at("beta").get<double>();
        gr.gamma = g.value("gamma", 0.0);
        gr.frequency = g.value("frequency", std::size_t{0});
        gr.age = g.value("age", std::size_t{0});
        gr.cached = g.value("cached", false);
        r.groups.push_back(std::move(gr));
    }
    r.data_size_fallback = j.value("fallback", false);
    r.dim = j.at("dim").get<std::size_t>();
    if (j.contains("spans")) {
        for (const auto& s : j.at("spans"))
            r.spans.push_back({read_optional<PartitionId>(s, "partition"),
                               Interval{s.at("start").get<double>(), s.at("end").get<double>()}});
    }
    r.loss = read_optional<double>(j, "loss");
    r.accuracy = read_optional<double>(j, "accuracy");
    return r;
}

}  // namespace

std::vector<SatelliteId> RoundRecord::participants() const {
    std::vector<SatelliteId> out;
    for (const auto& g : groups) out.insert(out.end(), g.members.begin(), g.members.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::string header_to_json_line(const EventLogHeader& h) {
    json j;
    j["kind"] = "header";
    j["schema_version"] = h.schema_version;
    j["mode"] = h.mode == RunMode::ltp ? "ltp" : "baseline";
    j["config_hash"] = h.config_hash;
    j["seed"] = h.seed;
    j["data_sizes"] = h.data_sizes;
    j["partitions"] = h.partitions;
    j["L"] = h.target_ltp;
    j["alpha"] = h.alpha ? json(*h.alpha) : json("t");
    j["inner"] = h.inner == InnerWeighting::data ? "data" : "sum";
    j["dim"] = h.dim;
    j["local_steps"] = h.local_steps;
    return j.dump();
}

std::string round_to_json_line(const RoundRecord& r) {
    json j;
    j["round"] = r.round;
    j["start_s"] = r.start_s;
    j["end_s"] = r.end_s;
    j["skipped"] = r.skipped;
    j["warmup"] = r.warmup;
    j["primary"] = optional_id(r.primary);
    j["candidates"] = r.candidates;
    j["selected"] = r.selected;
    j["promoted"] = r.promoted;
    j["trained"] = r.trained;
    json groups = json::array();
    for (const auto& g : r.groups) {
        json gj;
        gj["partition"] = optional_id(g.partition);
        gj["members"] = g.members;
        gj["beta"] = g.beta;
        gj["gamma"] = g.gamma;
        gj["frequency"] = g.frequency;
        gj["age"] = g.age;
        gj["cached"] = g.cached;
        groups.push_back(std::move(gj));
    }
    j["groups"] = std::move(groups);
    j["fallback"] = r.data_size_fallback;
    j["dim"] = r.dim;
    json spans = json::array();
    for (const auto& s : r.spans)
        spans.push_back({{"partition", optional_id(s.partition)}, {"start", s.span.start}, {"end", s.span.end}});
    j["spans"] = std::move(spans);
    j["loss"] = optional_number(r.loss);
    j["accuracy"] = optional_number(r.accuracy);
    return j.dump();
}

void write_event_log(std::ostream& out, const EventLog& log) {
    out << header_to_json_line(log.header) << '\n';
    for (const auto& r : log.rounds) out << round_to_json_line(r) << '\n';
}

void write_event_log(const std::filesystem::path& path, const EventLog& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    write_event_log(out, log);
}

EventLog read_event_log(std::istream& in, const std::string& source) {
    EventLog log;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(fmt::format("{}:{}: malformed JSON: {}", source, line_no, e.what()));
        }
        try {
            if (!have_header) {
                if (j.value("kind", std::string{}) != "header")
                    throw std::runtime_error("first record must be the header");
                const int found = j.at("schema_version").get<int>();
                if (found != kEventLogSchema)
                    throw std::runtime_error(fmt::format("schema version mismatch: expected {}, found {}",
                                                         kEventLogSchema, found));
                auto& h = log.header;
                h.schema_version = found;
                h.mode = j.at("mode").get<std::string>() == "baseline" ? RunMode::baseline : RunMode::ltp;
                h.config_hash = j.value("config_hash", std::string{});
                h.seed = j.value("seed", std::uint64_t{0});
                h.data_sizes = j.at("data_sizes").get<std::vector<std::uint64_t>>();
                h.partitions = j.at("partitions").get<std::vector<std::vector<SatelliteId>>>();
                h.target_ltp = j.at("L").get<std::size_t>();
                if (j.at("alpha").is_string())
                    h.alpha.reset();
                else
                    h.alpha = j.at("alpha").get<std::size_t>();
                h.inner = j.at("inner").get<std::string>() == "sum" ? InnerWeighting::sum : InnerWeighting::data;
                h.dim = j.at("dim").get<std::size_t>();
                h.local_steps = j.value("local_steps", std::size_t{1});
                have_header = true;
                continue;
            }
            auto r = round_from_json(j);
            if (r.round != log.rounds.size() + 1)
                throw std::runtime_error(fmt::format("round {} out of sequence (expected {})", r.round,
                                                     log.rounds.size() + 1));
            for (const auto& g : r.groups)
                for (auto k : g.members)
                    if (k >= log.header.num_satellites())
                        throw std::runtime_error(fmt::format("satellite {} outside the header's {}", k,
                                                             log.header.num_satellites()));
            log.rounds.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw std::runtime_error(fmt::format("{}:{}: {}", source, line_no, e.what()));
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(fmt::format("{}:{}: {}", source, line_no, e.what()));
        }
    }
    if (!have_header) throw std::runtime_error(fmt::format("{}: empty event log", source));
    return log;
}

EventLog read_event_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open event log {}", path.string()));
    return read_event_log(in, path.string());
}

}  // namespace ltp
