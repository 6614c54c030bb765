#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "ltpfleo/partitioning.hpp"

namespace ltp {

// s_G^m for every partition and every completed round m = 1..rounds().
class ParticipationLog {
public:
    explicit ParticipationLog(std::size_t num_partitions = 0) : rows_(num_partitions) {}

    std::size_t num_partitions() const { return rows_.size(); }
    std::size_t rounds() const { return rows_.empty() ? recorded_ : rows_.front().size(); }
    std::uint8_t indicator(PartitionId g, std::size_t round) const { return rows_.at(g).at(round - 1); }
    const std::vector<std::uint8_t>& history(PartitionId g) const { return rows_.at(g); }

    // Appends round t; t must equal rounds() + 1.
    void record_round(const std::vector<PartitionId>& selected, std::size_t t);

private:
    std::vector<std::vector<std::uint8_t>> rows_;
    std::size_t recorded_ = 0;
};

// f_G^t: participations of g in rounds 1..t-1.
std::size_t participation_frequency(const ParticipationLog& log, PartitionId g, std::size_t t);

// Tolerance alpha. full_fairness is the alpha = t mode (every partition admitted).
struct StalenessTolerance {
    std::size_t alpha = 3;
    bool full_fairness = false;

    static StalenessTolerance fixed(std::size_t a) { return {a, false}; }
    static StalenessTolerance always_t() { return {0, true}; }
    std::size_t at_round(std::size_t t) const { return full_fairness ? t : alpha; }
};

struct FilterResult {
    std::vector<PartitionId> selected;  // G'' in ascending id order
    std::vector<PartitionId> promoted;  // members of G'' that were not candidates (alpha = t only)
    bool skipped() const { return selected.empty(); }
};

// Keeps candidates with t - alpha <= f_G^t <= t - 1. In the alpha = t mode every
// partition in [0, num_partitions) is admitted and the non-candidates are reported
// as promoted (they contribute cached models). A fixed alpha >= t only widens the band.
FilterResult staleness_filter(const std::vector<PartitionId>& candidates,
                              const std::map<PartitionId, std::size_t>& frequencies, std::size_t t,
                              const StalenessTolerance& tolerance, std::size_t num_partitions);

struct RoundPlan {
    std::size_t round = 0;
    std::vector<PartitionId> candidates;
    std::map<PartitionId, std::size_t> frequencies;
    FilterResult filter;
    std::size_t tolerance = 1;
};

RoundPlan plan_round(const ParticipationLog& log, const CandidateSet& candidates, std::size_t t,
                     const StalenessTolerance& tolerance);

}  // namespace ltp
