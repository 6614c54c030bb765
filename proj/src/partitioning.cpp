#include "ltpfleo/partitioning.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ltpfleo/diagnostics.hpp"

namespace ltp {

std::vector<PartitionId> PartitionSet::owner_table() const {
    std::vector<PartitionId> owner(num_satellites(), std::numeric_limits<PartitionId>::max());
    for (const auto& p : partitions)
        for (auto k : p.members) owner.at(k) = p.id;
    return owner;
}

void PartitionSet::validate() const {
    if (target_ltp < 1) throw std::invalid_argument("partition size L must be >= 1");
    std::vector<int> seen(num_satellites(), 0);
    for (std::size_t i = 0; i < partitions.size(); ++i) {
        const auto& p = partitions[i];
        if (p.id != i) throw std::invalid_argument("partition ids must be 0..n-1 in order");
        if (p.members.size() != target_ltp)
            throw std::invalid_argument(fmt::format("partition {} has {} members, expected {}", p.id,
                                                    p.members.size(), target_ltp));
        for (auto k : p.members) {
            if (k >= seen.size())
                throw std::invalid_argument(fmt::format("satellite {} out of range", k));
            if (seen[k]++ != 0)
                throw std::invalid_argument(fmt::format("satellite {} in more than one partition", k));
        }
    }
}

void PartitionSet::write_csv(std::ostream& out) const {
    out << "partition_id,satellite_id\n";
    for (const auto& p : partitions)
        for (auto k : p.members) fmt::print(out, "{},{}\n", p.id, k);
}

PartitionSet make_partition_set(std::vector<std::vector<SatelliteId>> groups) {
    if (groups.empty()) throw std::invalid_argument("no partitions given");
    PartitionSet set;
    set.target_ltp = groups.front().size();
    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::sort(groups[i].begin(), groups[i].end());
        set.partitions.push_back({i, std::move(groups[i])});
    }
    set.validate();
    return set;
}

PartitionSet build_partitions(const ContactSchedule& schedule, std::size_t L) {
    const std::size_t K = schedule.num_satellites();
    if (K == 0) throw std::invalid_argument("contact schedule has no satellites");
    if (L < 1) throw std::invalid_argument("partition size L must be >= 1");
    if (K % L != 0)
        throw std::invalid_argument(
            fmt::format("K = {} satellites is not divisible by partition size L = {}", K, L));

    const auto first_start = [&](SatelliteId k) {
        const auto& w = schedule.windows[k];
        return w.empty() ? std::numeric_limits<double>::infinity() : w.front().start;
    };
    std::vector<SatelliteId> order(K);
    std::iota(order.begin(), order.end(), SatelliteId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](SatelliteId a, SatelliteId b) { return first_start(a) < first_start(b); });

    std::vector<bool> assigned(K, false);
    PartitionSet set;
    set.target_ltp = L;
    for (std::size_t pos = 0; pos < K; ++pos) {
        const SatelliteId seed = order[pos];
        if (assigned[seed]) continue;
        assigned[seed] = true;

        // Rank the remaining satellites by overlap with the seed; order position breaks ties.
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t q = pos + 1; q < K; ++q) {
            const SatelliteId k = order[q];
            if (!assigned[k]) ranked.emplace_back(overlap_duration(schedule.windows[seed], schedule.windows[k]), q);
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });

        Partition p{set.partitions.size(), {seed}};
        for (std::size_t i = 0; i + 1 < L; ++i) {
            const SatelliteId k = order[ranked.at(i).second];
            assigned[k] = true;
            p.members.push_back(k);
        }
        std::sort(p.members.begin(), p.members.end());
        if (L > 1 && common_windows(p, schedule).empty())
            warn(fmt::format("partition {} has no common visibility window within the horizon", p.id));
        set.partitions.push_back(std::move(p));
    }
    set.validate();
    return set;
}

std::uint64_t count_selectable_sets(const PartitionSet& partitions) {
    const std::size_t n = partitions.size();
    if (n >= 64) throw std::overflow_error("2^(K/L) - 1 does not fit in 64 bits");
    return (std::uint64_t{1} << n) - 1;
}

std::vector<Interval> common_windows(const Partition& partition, const ContactSchedule& schedule) {
    if (partition.members.empty()) return {};
    std::vector<Interval> acc = schedule.windows.at(partition.members.front());
    for (std::size_t i = 1; i < partition.members.size(); ++i)
        acc = intersect(acc, schedule.windows.at(partition.members[i]));
    return acc;
}

double latest_member_contact(const Partition& partition, const ContactSchedule& schedule, double now_s,
                             double min_window_s) {
    for (const auto& w : common_windows(partition, schedule)) {
        const Interval clipped{std::max(w.start, now_s), w.end};
        if (!(clipped.length() > 0.0) || clipped.length() < min_window_s) continue;
        double latest = -std::numeric_limits<double>::infinity();
        for (auto k : partition.members) {
            for (const auto& pass : schedule.windows.at(k)) {
                if (pass.start <= clipped.start && clipped.start <= pass.end) {
                    latest = std::max(latest, std::max(pass.start, now_s));
                    break;
                }
            }
        }
        return latest;
    }
    return std::numeric_limits<double>::infinity();
}

bool CandidateSet::contains(PartitionId id) const { return find(id) != nullptr; }

const CandidateEntry* CandidateSet::find(PartitionId id) const {
    for (const auto& e : entries)
        if (e.partition == id) return &e;
    return nullptr;
}

std::vector<PartitionId> CandidateSet::ids() const {
    std::vector<PartitionId> out;
    for (const auto& e : entries) out.push_back(e.partition);
    return out;
}

CommonWindowIndex index_common_windows(const PartitionSet& partitions, const ContactSchedule& schedule) {
    CommonWindowIndex index;
    for (const auto& p : partitions.partitions) index.windows.push_back(common_windows(p, schedule));
    return index;
}

CandidateSet select_candidates(const PartitionSet& partitions, const ContactSchedule& schedule,
                               double now_s, double min_window_s) {
    return select_candidates(partitions, schedule, index_common_windows(partitions, schedule), now_s,
                             min_window_s);
}

CandidateSet select_candidates(const PartitionSet& partitions, const ContactSchedule& schedule,
                               const CommonWindowIndex& index, double now_s, double min_window_s) {
    const auto usable = [&](const Interval& w) -> std::optional<Interval> {
        const Interval clipped{std::max(w.start, now_s), w.end};
        if (clipped.length() > 0.0 && clipped.length() >= min_window_s) return clipped;
        return std::nullopt;
    };

    CandidateSet out;
    double best = std::numeric_limits<double>::infinity();
    Interval primary_window;
    for (const auto& p : partitions.partitions) {
        std::optional<Interval> first;
        for (const auto& w : index.windows[p.id])
            if ((first = usable(w))) break;
        if (!first) continue;
        const double objective = first->start;  // equals latest_member_contact(p, schedule, now_s, min_window_s)
        if (objective < best) {
            best = objective;
            out.primary = p.id;
            primary_window = *first;
        }
    }
    if (!out.primary) return out;

    out.entries.push_back({*out.primary, primary_window});
    for (const auto& p : partitions.partitions) {
        if (p.id == *out.primary) continue;
        for (const auto& w : index.windows[p.id]) {
            if (w.start >= primary_window.end) break;
            const auto clipped = usable(w);
            if (!clipped) continue;
            if (std::max(clipped->start, primary_window.start) < std::min(clipped->end, primary_window.end)) {
                out.entries.push_back({p.id, *clipped});
                break;
            }
        }
    }
    return out;
}

}  // namespace ltp
