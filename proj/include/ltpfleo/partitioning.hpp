#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ltpfleo/orbital.hpp"

namespace ltp {

using PartitionId = std::size_t;

struct Partition {
    PartitionId id = 0;
    std::vector<SatelliteId> members;  // sorted ascending
};

struct PartitionSet {
    std::vector<Partition> partitions;
    std::size_t target_ltp = 1;  // L

    std::size_t size() const { return partitions.size(); }
    std::size_t num_satellites() const { return partitions.size() * target_ltp; }
    // Partition id owning each satellite.
    std::vector<PartitionId> owner_table() const;
    // Checks |members| = L, disjointness and full coverage of 0..K-1; throws on failure.
    void validate() const;
    void write_csv(std::ostream& out) const;
};

// Greedy overlap-maximizing grouping into K/L partitions of size L.
PartitionSet build_partitions(const ContactSchedule& schedule, std::size_t L);

// Builds a partition set directly from member lists (tests, ablations).
PartitionSet make_partition_set(std::vector<std::vector<SatelliteId>> groups);

// Number of non-empty subsets of partitions the server could pick in a round: 2^(K/L) - 1.
std::uint64_t count_selectable_sets(const PartitionSet& partitions);

// Intervals during which every member of the partition is visible.
std::vector<Interval> common_windows(const Partition& partition, const ContactSchedule& schedule);

struct CandidateEntry {
    PartitionId partition = 0;
    Interval window;  // common window used this round, clipped to start at now
};

struct CandidateSet {
    std::size_t round = 0;
    std::optional<PartitionId> primary;  // G*
    std::vector<CandidateEntry> entries;  // G* first, then ascending partition id

    bool empty() const { return entries.empty(); }
    bool contains(PartitionId id) const;
    std::vector<PartitionId> ids() const;
    const CandidateEntry* find(PartitionId id) const;
};

// Eq.-2 objective: max over members of p_k, where p_k is the start of the pass in which
// member k joins the partition's next usable common window (clipped to now). The
// latest member therefore arrives at that window's start. +inf without a usable window.
double latest_member_contact(const Partition& partition, const ContactSchedule& schedule, double now_s,
                             double min_window_s = 0.0);

struct CommonWindowIndex {
    std::vector<std::vector<Interval>> windows;  // per partition
};
CommonWindowIndex index_common_windows(const PartitionSet& partitions, const ContactSchedule& schedule);

// Picks G* (smallest latest_member_contact, ties to the lowest id)
// and every partition whose common window overlaps G*'s. Windows shorter than
// min_window_s after clipping to now are ignored. Empty result: nothing usable in horizon.
CandidateSet select_candidates(const PartitionSet& partitions, const ContactSchedule& schedule,
                               double now_s, double min_window_s = 0.0);
CandidateSet select_candidates(const PartitionSet& partitions, const ContactSchedule& schedule,
                               const CommonWindowIndex& index, double now_s, double min_window_s);

}  // namespace ltp
