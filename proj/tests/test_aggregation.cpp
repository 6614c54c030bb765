#include <doctest.h>

#include <cmath>
#include <random>

#include "ltpfleo/aggregation.hpp"
#include "ltpfleo/diagnostics.hpp"

using namespace ltp;

TEST_CASE("fair weights") {
    const auto w = compute_weights({2, 3}, {{2, 9}, {3, 7}}, {{2, 300}, {3, 300}});
    CHECK(w.beta_of(2) == 0.5625);
    CHECK(w.beta_of(3) == 0.4375);
    CHECK(w.beta_sum() == 1.0);

    const auto d = compute_weights({0, 1}, {{0, 4}, {1, 4}}, {{0, 100}, {1, 300}});
    CHECK(d.beta_of(0) == 0.25);
    CHECK(d.beta_of(1) == 0.75);

    const auto one = compute_weights({5}, {{5, 0}}, {{5, 17}});
    CHECK(one.beta_of(5) == 1.0);
    CHECK(one.data_size_fallback);
}

TEST_CASE("weights are nonnegative, normalized and scale-equivariant") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PartitionId> sel;
        std::map<PartitionId, std::size_t> f;
        std::map<PartitionId, std::uint64_t> d, d_scaled;
        const std::uint64_t scale = 1 + rng() % 1000;
        for (PartitionId g = 0; g < 1 + rng() % 8; ++g) {
            sel.push_back(g);
            f[g] = rng() % 50;
            d[g] = 1 + rng() % 5000;
            d_scaled[g] = d[g] * scale;
        }
        const auto a = compute_weights(sel, f, d);
        const auto b = compute_weights(sel, f, d_scaled);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            CHECK(a.entries[i].beta >= 0.0);
            CHECK(a.entries[i].beta == b.entries[i].beta);
            sum += a.entries[i].beta;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("aggregation rule") {
    const Params a{1.0, 0.0}, b{0.0, 1.0};
    const auto single = make_partition_set({{0}});
    const auto w1 = compute_weights({0}, {{0, 3}}, {{0, 10}});
    CHECK(aggregate(w1, {{0, {{0, 10, &a}}}}, single) == a);

    const auto two = make_partition_set({{0}, {1}});
    const auto half = compute_weights({0, 1}, {{0, 2}, {1, 2}}, {{0, 5}, {1, 5}});
    CHECK(aggregate(half, {{0, {{0, 5, &a}}}, {1, {{1, 5, &b}}}}, two) == Params{0.5, 0.5});

    // 3 partitions x 2 members against a double loop
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    const auto parts = make_partition_set({{0, 3}, {1, 4}, {2, 5}});
    std::vector<Params> models(6, Params(4));
    std::vector<std::uint64_t> sizes(6);
    for (std::size_t k = 0; k < 6; ++k) {
        for (auto& x : models[k]) x = n(rng);
        sizes[k] = 10 + rng() % 90;
    }
    std::map<PartitionId, std::uint64_t> pd;
    std::vector<PartitionModels> pm;
    for (const auto& g : parts.partitions) {
        PartitionModels m{g.id, {}};
        for (auto k : g.members) {
            pd[g.id] += sizes[k];
            m.members.push_back({k, sizes[k], &models[k]});
        }
        pm.push_back(m);
    }
    const auto w = compute_weights({0, 1, 2}, {{0, 3}, {1, 5}, {2, 1}}, pd);
    for (auto inner : {InnerWeighting::data, InnerWeighting::sum}) {
        const auto got = aggregate(w, pm, parts, inner);
        for (std::size_t j = 0; j < 4; ++j) {
            double expect = 0.0;
            for (const auto& g : parts.partitions)
                for (auto k : g.members) {
                    const double c = inner == InnerWeighting::data
                                         ? static_cast<double>(sizes[k]) / static_cast<double>(pd[g.id])
                                         : 1.0;
                    expect += w.beta_of(g.id) * c * models[k][j];
                }
            CHECK(std::abs(got[j] - expect) <= 1e-12);
        }
    }

    pm[1].members.pop_back();
    CHECK_THROWS(aggregate(w, pm, parts));
}

TEST_CASE("model cache ages") {
    ModelCache cache;
    const auto fresh = fetch_or_cache(0, cache, std::vector<Params>{{1.0}}, 4);
    REQUIRE(fresh);
    CHECK(fresh->staleness_age == 0);
    CHECK_FALSE(fresh->from_cache);

    const auto old = fetch_or_cache(0, cache, std::nullopt, 10);
    REQUIRE(old);
    CHECK(old->staleness_age == 6);
    CHECK(old->from_cache);

    ScopedWarningCapture capture;
    CHECK_FALSE(fetch_or_cache(1, cache, std::nullopt, 10));
    CHECK(capture.contains("no cached models"));
}
