#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ltpfleo/aggregation.hpp"
#include "ltpfleo/event_log.hpp"
#include "ltpfleo/orbital.hpp"
#include "ltpfleo/partitioning.hpp"
#include "ltpfleo/scheduling.hpp"
#include "ltpfleo/training.hpp"

namespace ltp {

struct PreparedData {
    std::vector<Dataset> train;  // indexed by satellite
    Dataset holdout;
};

struct SimConfig {
    ConstellationSpec constellation;
    GroundStation station;
    std::size_t target_ltp = 2;
    StalenessTolerance tolerance = StalenessTolerance::fixed(3);
    InnerWeighting inner = InnerWeighting::data;

    LossSpec loss;
    SynthSpec data;  // per_sat_sizes / orbit_of_sat are filled in when empty
    std::size_t samples_per_satellite = 200;
    double holdout_fraction = 0.1;
    std::optional<std::filesystem::path> data_dir;  // sat_<k>.csv per satellite instead of synthesis

    SgdConfig sgd;  // seed is ignored; per-satellite seeds derive from the root seed
    double overhead_min_s = 60.0;
    double overhead_max_s = 180.0;

    std::optional<std::size_t> rounds;
    std::optional<double> time_budget_s;
    std::uint64_t seed = 1;
    std::uint64_t replica = 0;  // varies overhead and SGD draws only; data and w1 stay fixed

    double horizon_s = 86400.0;
    double max_horizon_s = 366.0 * 86400.0;
    VisibilityOptions visibility;

    // Overrides for tests and experiments.
    std::optional<PreparedData> prepared;
    std::optional<ContactSchedule> schedule;  // precomputed; fixed unless schedule_extendable
    bool schedule_extendable = false;         // extend a precomputed schedule from the constellation
    std::optional<PartitionSet> partitions;
    std::optional<Params> initial_model;

    bool evaluate = true;            // loss / accuracy snapshots each round
    bool record_trace = false;       // private per-satellite models (ground truth for attacks)
    bool record_trajectory = false;  // global model after every aggregation
    std::optional<std::filesystem::path> checkpoint_dir;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    std::string config_hash;
    Exec exec = Exec::parallel;

    void validate() const;  // throws std::invalid_argument naming the field
};

// Models each satellite contributed to one round's aggregate.
struct PrivateRound {
    std::size_t round = 0;
    std::map<SatelliteId, Params> local_models;
};

struct SimResult {
    EventLog log;
    Params initial_model;
    Params final_model;
    std::vector<Params> trajectory;               // [0] = w1, [a] = after the a-th aggregation
    std::vector<std::size_t> aggregation_rounds;  // round number of each aggregation
    std::vector<std::vector<double>> step_rates;  // learning rates of aggregation a+1's local steps
    std::vector<Params> globals;                  // global model after every round (with the trace)
    std::vector<PrivateRound> trace;
    ParticipationLog participation;
    PartitionSet partitions;
    PreparedData data;
    ContactSchedule schedule;  // as extended by the run
    double simulated_seconds = 0.0;
    std::size_t aggregations = 0;
};

PreparedData prepare_data(const SimConfig& config);

// LTP-FLEO rounds: candidates, staleness filter, training, fair weights, aggregation.
SimResult run(const SimConfig& config);

// L = 1 comparison target: every satellite visible over the round's collection span
// contributes, one group weighted by data size, no staleness filter.
SimResult run_baseline(const SimConfig& config);

// Independent replicas (replica index 0..count-1) sharing data and initial model.
std::vector<SimResult> run_replicas(const SimConfig& config, std::size_t count, Exec exec = Exec::parallel);

}  // namespace ltp
