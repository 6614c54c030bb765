#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ltpfleo/model.hpp"
#include "ltpfleo/partitioning.hpp"

namespace ltp {

struct PartitionWeight {
    PartitionId partition = 0;
    std::size_t frequency = 0;    // f_G^t
    std::uint64_t data_size = 0;  // |D_G|
    double gamma = 0.0;
    double beta = 0.0;
};

struct AggregationWeights {
    std::vector<PartitionWeight> entries;  // ascending partition id
    std::uint64_t total_data = 0;          // |D_G''|
    bool data_size_fallback = false;       // sum f = 0: beta proportional to |D_G|
    std::vector<PartitionId> weight_starved;  // f_G = 0 inside a round with sum f > 0

    double beta_of(PartitionId g) const;
    double beta_sum() const;
};

// Fair partition weights. gamma_G = (f_G / sum f) (|D_G| / |D_G''|), beta = gamma / sum gamma.
// Both are evaluated as reduced integer fractions before conversion, so scaling every
// data size by a common factor leaves beta bit-identical.
AggregationWeights compute_weights(const std::vector<PartitionId>& selected,
                                   const std::map<PartitionId, std::size_t>& frequencies,
                                   const std::map<PartitionId, std::uint64_t>& partition_data_sizes);

// Inner sum of the aggregation rule: data-weighted (convex) or the literal unnormalized sum.
enum class InnerWeighting { data, sum };

struct MemberModel {
    SatelliteId satellite = 0;
    std::uint64_t data_size = 0;
    const Params* params = nullptr;
};

struct PartitionModels {
    PartitionId partition = 0;
    std::vector<MemberModel> members;
};

// w = sum_G beta_G sum_{k in G} c_k w_k with c_k = |D_k|/|D_G| (data) or 1 (sum).
// Every member of every weighted partition must be present.
Params aggregate(const AggregationWeights& weights, const std::vector<PartitionModels>& models,
                 const PartitionSet& partitions, InnerWeighting inner = InnerWeighting::data);

// Coefficient the aggregate applies to one member's model.
double member_coefficient(double beta, std::uint64_t member_data, std::uint64_t partition_data,
                          InnerWeighting inner);

struct CachedPartition {
    std::vector<Params> member_models;  // in partition member order
    std::size_t stamp = 0;              // round that produced them
};

class ModelCache {
public:
    bool contains(PartitionId g) const { return entries_.count(g) != 0; }
    const CachedPartition* find(PartitionId g) const;
    void store(PartitionId g, std::vector<Params> member_models, std::size_t round);
    std::size_t size() const { return entries_.size(); }

private:
    std::map<PartitionId, CachedPartition> entries_;
};

struct PartitionContribution {
    PartitionId partition = 0;
    const std::vector<Params>* member_models = nullptr;  // points into the cache
    std::size_t staleness_age = 0;
    bool from_cache = false;
};

// Visible partitions (fresh models given) refresh the cache with age 0; otherwise the
// cached models are returned with age = t - stamp. A miss returns nullopt and warns.
std::optional<PartitionContribution> fetch_or_cache(PartitionId g, ModelCache& cache,
                                                    std::optional<std::vector<Params>> fresh,
                                                    std::size_t t);

}  // namespace ltp
