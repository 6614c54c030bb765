#include "ltpfleo/scheduling.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ltp {

void ParticipationLog::record_round(const std::vector<PartitionId>& selected, std::size_t t) {
    if (t != rounds() + 1)
        throw std::logic_error(fmt::format("round {} already recorded or out of order (log has {} rounds)",
                                           t, rounds()));
    for (auto g : selected)
        if (g >= rows_.size()) throw std::out_of_range(fmt::format("partition {} not in log", g));
    for (auto& row : rows_) row.push_back(0);
    for (auto g : selected) rows_[g].back() = 1;
    ++recorded_;
}

std::size_t participation_frequency(const ParticipationLog& log, PartitionId g, std::size_t t) {
    if (t == 0) throw std::invalid_argument("rounds are numbered from 1");
    if (log.rounds() < t - 1)
        throw std::invalid_argument(
            fmt::format("log covers {} rounds, frequency at t = {} needs {}", log.rounds(), t, t - 1));
    const auto& h = log.history(g);
    return static_cast<std::size_t>(std::count(h.begin(), h.begin() + static_cast<long>(t - 1), 1));
}

FilterResult staleness_filter(const std::vector<PartitionId>& candidates,
                              const std::map<PartitionId, std::size_t>& frequencies, std::size_t t,
                              const StalenessTolerance& tolerance, std::size_t num_partitions) {
    if (t < 1) throw std::invalid_argument("rounds are numbered from 1");
    const std::size_t alpha = tolerance.at_round(t);
    if (alpha < 1) throw std::invalid_argument("staleness tolerance alpha must be >= 1");

    FilterResult out;
    if (tolerance.full_fairness) {
        out.selected.resize(num_partitions);
        std::iota(out.selected.begin(), out.selected.end(), PartitionId{0});
        for (PartitionId g = 0; g < num_partitions; ++g)
            if (std::find(candidates.begin(), candidates.end(), g) == candidates.end())
                out.promoted.push_back(g);
        return out;
    }

    const std::size_t lower = alpha >= t ? 0 : t - alpha;
    for (auto g : candidates) {
        const std::size_t f = frequencies.at(g);
        if (f > t - 1)
            throw std::logic_error(fmt::format("partition {} frequency {} exceeds t - 1 = {}", g, f, t - 1));
        if (f >= lower) out.selected.push_back(g);
    }
    std::sort(out.selected.begin(), out.selected.end());
    return out;
}

RoundPlan plan_round(const ParticipationLog& log, const CandidateSet& candidates, std::size_t t,
                     const StalenessTolerance& tolerance) {
    RoundPlan plan;
    plan.round = t;
    plan.candidates = candidates.ids();
    plan.tolerance = tolerance.at_round(t);
    for (PartitionId g = 0; g < log.num_partitions(); ++g)
        plan.frequencies[g] = participation_frequency(log, g, t);
    if (plan.candidates.empty() && !tolerance.full_fairness) return plan;
    plan.filter = staleness_filter(plan.candidates, plan.frequencies, t, tolerance, log.num_partitions());
    return plan;
}

}  // namespace ltp
