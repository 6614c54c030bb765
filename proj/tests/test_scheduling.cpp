#include <doctest.h>

#include <numeric>
#include <random>
#include <stdexcept>

#include "ltpfleo/scheduling.hpp"

using namespace ltp;

TEST_CASE("participation frequency") {
    ParticipationLog log(4);
    CHECK(participation_frequency(log, 2, 1) == 0);
    for (std::size_t t = 1; t <= 9; ++t) log.record_round({2}, t);
    CHECK(participation_frequency(log, 2, 10) == 9);
    CHECK(participation_frequency(log, 0, 10) == 0);

    ParticipationLog alt(1);
    for (std::size_t t = 1; t <= 5; ++t) alt.record_round(t % 2 ? std::vector<PartitionId>{0} : std::vector<PartitionId>{}, t);
    CHECK(participation_frequency(alt, 0, 6) == 3);
    CHECK_THROWS(participation_frequency(alt, 0, 8));
}

TEST_CASE("record round") {
    ParticipationLog log(3);
    log.record_round({}, 1);
    log.record_round({1}, 2);
    CHECK(log.history(0) == std::vector<std::uint8_t>{0, 0});
    CHECK(log.history(1) == std::vector<std::uint8_t>{0, 1});
    CHECK(log.history(2) == std::vector<std::uint8_t>{0, 0});
    CHECK(log.indicator(1, 2) == 1);
    CHECK_THROWS_AS(log.record_round({0}, 2), std::logic_error);
    CHECK_THROWS_AS(log.record_round({3}, 3), std::out_of_range);
}

TEST_CASE("staleness band reproduces the four-partition example") {
    const std::map<PartitionId, std::size_t> f{{0, 3}, {1, 1}, {2, 9}, {3, 7}};
    const auto r = staleness_filter({0, 1, 2, 3}, f, 10, StalenessTolerance::fixed(3), 4);
    CHECK(r.selected == std::vector<PartitionId>{2, 3});
    CHECK(r.promoted.empty());

    const auto all = staleness_filter({0, 1, 2, 3}, f, 10, StalenessTolerance::always_t(), 4);
    CHECK(all.selected == std::vector<PartitionId>{0, 1, 2, 3});

    const auto some = staleness_filter({2}, f, 10, StalenessTolerance::always_t(), 4);
    CHECK(some.selected == std::vector<PartitionId>{0, 1, 2, 3});
    CHECK(some.promoted == std::vector<PartitionId>{0, 1, 3});

    const auto none = staleness_filter({0, 1}, {{0, 0}, {1, 0}}, 5, StalenessTolerance::fixed(1), 2);
    CHECK(none.skipped());

    // the first round admits everyone since f = 0 = t - 1
    CHECK(staleness_filter({0, 1}, {{0, 0}, {1, 0}}, 1, StalenessTolerance::fixed(1), 2).selected.size() == 2);
}

TEST_CASE("plan round and replay") {
    ParticipationLog log(5);
    std::mt19937_64 rng(5);
    std::size_t total = 0;
    for (std::size_t t = 1; t <= 100; ++t) {
        CandidateSet c;
        c.round = t;
        for (PartitionId g = 0; g < 5; ++g)
            if (rng() % 2) c.entries.push_back({g, {0, 1}});
        const auto plan = plan_round(log, c, t, StalenessTolerance::fixed(4));
        for (auto g : plan.filter.selected) CHECK(c.contains(g));
        total += plan.filter.selected.size();
        log.record_round(plan.filter.selected, t);
    }
    std::size_t sum = 0;
    for (PartitionId g = 0; g < 5; ++g) sum += participation_frequency(log, g, 101);
    CHECK(sum == total);
}
