#include "ltpfleo/aggregation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ltpfleo/diagnostics.hpp"

namespace ltp {
namespace {

using u128 = unsigned __int128;

u128 gcd128(u128 a, u128 b) {
    while (b != 0) {
        const u128 r = a % b;
        a = b;
        b = r;
    }
    return a;
}

// num/den reduced to lowest terms first, so equal ratios give bit-identical doubles.
double exact_ratio(u128 num, u128 den) {
    if (den == 0) throw std::domain_error("zero denominator in weight ratio");
    if (num == 0) return 0.0;
    const u128 g = gcd128(num, den);
    return static_cast<double>(num / g) / static_cast<double>(den / g);
}

}  // namespace

double AggregationWeights::beta_of(PartitionId g) const {
    for (const auto& e : entries)
        if (e.partition == g) return e.beta;
    throw std::out_of_range(fmt::format("partition {} has no weight this round", g));
}

double AggregationWeights::beta_sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.beta;
    return s;
}

AggregationWeights compute_weights(const std::vector<PartitionId>& selected,
                                   const std::map<PartitionId, std::size_t>& frequencies,
                                   const std::map<PartitionId, std::uint64_t>& partition_data_sizes) {
    if (selected.empty()) throw std::invalid_argument("cannot weight an empty partition selection");

    AggregationWeights w;
    std::vector<PartitionId> ids = selected;
    std::sort(ids.begin(), ids.end());
    u128 sum_f = 0, sum_fd = 0;
    for (auto g : ids) {
        PartitionWeight e;
        e.partition = g;
        e.frequency = frequencies.at(g);
        e.data_size = partition_data_sizes.at(g);
        w.total_data += e.data_size;
        sum_f += e.frequency;
        sum_fd += static_cast<u128>(e.frequency) * e.data_size;
        w.entries.push_back(e);
    }
    if (w.total_data == 0) throw std::invalid_argument("selected partitions hold no data");

    if (sum_f == 0) {
        w.data_size_fallback = true;
        for (auto& e : w.entries) {
            e.gamma = exact_ratio(e.data_size, w.total_data);
            e.beta = e.gamma;
        }
        return w;
    }
    const u128 gamma_den = sum_f * w.total_data;
    for (auto& e : w.entries) {
        const u128 fd = static_cast<u128>(e.frequency) * e.data_size;
        e.gamma = exact_ratio(fd, gamma_den);
        e.beta = exact_ratio(fd, sum_fd);  // gamma / sum gamma, normalizers cancel
        if (e.frequency == 0) w.weight_starved.push_back(e.partition);
    }
    return w;
}

double member_coefficient(double beta, std::uint64_t member_data, std::uint64_t partition_data,
                          InnerWeighting inner) {
    if (inner == InnerWeighting::sum) return beta;
    return beta * (static_cast<double>(member_data) / static_cast<double>(partition_data));
}

Params aggregate(const AggregationWeights& weights, const std::vector<PartitionModels>& models,
                 const PartitionSet& partitions, InnerWeighting inner) {
    if (weights.entries.empty()) throw std::invalid_argument("no weighted partitions to aggregate");

    std::size_t dim = 0;
    bool have_dim = false;
    Params out;
    for (const auto& e : weights.entries) {
        const auto it = std::find_if(models.begin(), models.end(),
                                     [&](const PartitionModels& m) { return m.partition == e.partition; });
        if (it == models.end())
            throw std::invalid_argument(fmt::format("partition {} weighted but no models supplied", e.partition));
        const auto& expected = partitions.partitions.at(e.partition).members;
        std::vector<MemberModel> members = it->members;
        std::sort(members.begin(), members.end(),
                  [](const MemberModel& a, const MemberModel& b) { return a.satellite < b.satellite; });
        if (members.size() != expected.size() ||
            !std::equal(members.begin(), members.end(), expected.begin(),
                        [](const MemberModel& m, SatelliteId k) { return m.satellite == k; }))
            throw std::invalid_argument(fmt::format(
                "partition {} is incomplete: all-or-none participation would be violated", e.partition));

        std::uint64_t partition_data = 0;
        for (const auto& m : members) partition_data += m.data_size;
        for (const auto& m : members) {
            if (m.params == nullptr) throw std::invalid_argument("null member model");
            if (!have_dim) {
                dim = m.params->size();
                out.assign(dim, 0.0);
                have_dim = true;
            } else if (m.params->size() != dim) {
                throw std::invalid_argument(fmt::format("satellite {} model has dimension {}, expected {}",
                                                        m.satellite, m.params->size(), dim));
            }
            axpy(member_coefficient(e.beta, m.data_size, partition_data, inner), *m.params, out);
        }
    }
    return out;
}

const CachedPartition* ModelCache::find(PartitionId g) const {
    const auto it = entries_.find(g);
    return it == entries_.end() ? nullptr : &it->second;
}

void ModelCache::store(PartitionId g, std::vector<Params> member_models, std::size_t round) {
    entries_[g] = CachedPartition{std::move(member_models), round};
}

std::optional<PartitionContribution> fetch_or_cache(PartitionId g, ModelCache& cache,
                                                    std::optional<std::vector<Params>> fresh,
                                                    std::size_t t) {
    if (fresh) {
        cache.store(g, std::move(*fresh), t);
        return PartitionContribution{g, &cache.find(g)->member_models, 0, false};
    }
    const auto* hit = cache.find(g);
    if (hit == nullptr) {
        warn(fmt::format("round {}: partition {} is not visible and has no cached models; excluded", t, g));
        return std::nullopt;
    }
    if (hit->stamp > t) throw std::logic_error("cache stamp is ahead of the current round");
    return PartitionContribution{g, &hit->member_models, t - hit->stamp, true};
}

}  // namespace ltp
