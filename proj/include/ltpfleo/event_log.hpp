#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ltpfleo/aggregation.hpp"
#include "ltpfleo/partitioning.hpp"

namespace ltp {

inline constexpr int kEventLogSchema = 1;

enum class RunMode { ltp, baseline };

struct EventLogHeader {
    int schema_version = kEventLogSchema;
    RunMode mode = RunMode::ltp;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> data_sizes;           // per satellite
    std::vector<std::vector<SatelliteId>> partitions;  // member lists by partition id
    std::size_t target_ltp = 1;
    std::optional<std::size_t> alpha;  // nullopt: alpha = t
    InnerWeighting inner = InnerWeighting::data;
    std::size_t dim = 0;
    std::size_t local_steps = 1;

    std::size_t num_satellites() const { return data_sizes.size(); }
};

// One aggregation group. In an LTP run each group is a partition; the baseline logs a
// single group of all participants with beta = 1.
struct GroupRecord {
    std::optional<PartitionId> partition;
    std::vector<SatelliteId> members;
    double beta = 0.0;
    double gamma = 0.0;
    std::size_t frequency = 0;
    std::size_t age = 0;  // staleness age of the models used
    bool cached = false;
};

struct CollectionSpan {
    std::optional<PartitionId> partition;
    Interval span;
};

struct RoundRecord {
    std::size_t round = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    bool skipped = false;
    bool warmup = false;
    std::optional<PartitionId> primary;
    std::vector<PartitionId> candidates;  // G'
    std::vector<PartitionId> selected;    // G''
    std::vector<PartitionId> promoted;
    std::vector<PartitionId> trained;
    std::vector<GroupRecord> groups;
    bool data_size_fallback = false;
    std::size_t dim = 0;
    std::vector<CollectionSpan> spans;
    std::optional<double> loss;
    std::optional<double> accuracy;

    // Satellites whose models entered the aggregate, ascending.
    std::vector<SatelliteId> participants() const;
};

struct EventLog {
    EventLogHeader header;
    std::vector<RoundRecord> rounds;
};

// Line-delimited JSON: a header object, then one object per round.
std::string header_to_json_line(const EventLogHeader& header);
std::string round_to_json_line(const RoundRecord& record);
void write_event_log(std::ostream& out, const EventLog& log);
void write_event_log(const std::filesystem::path& path, const EventLog& log);

// Throws std::runtime_error with line numbers; a schema mismatch names both versions.
EventLog read_event_log(std::istream& in, const std::string& source_name = "<stream>");
EventLog read_event_log(const std::filesystem::path& path);

}  // namespace ltp
