#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ltpfleo/orbital.hpp"

namespace ltp::testing {

inline ContactSchedule schedule_of(std::vector<std::vector<Interval>> windows, double horizon_s) {
    ContactSchedule s;
    s.horizon_s = horizon_s;
    s.windows = std::move(windows);
    return s;
}

// Random passes: each satellite gets a handful of disjoint windows in [0, horizon].
inline ContactSchedule random_schedule(std::size_t K, double horizon_s, std::mt19937_64& rng,
                                       std::size_t max_passes = 6) {
    std::uniform_int_distribution<std::size_t> passes(1, max_passes);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<Interval>> w(K);
    for (auto& sat : w) {
        const std::size_t n = passes(rng);
        const double slot = horizon_s / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = slot * (static_cast<double>(i) + 0.4 * u(rng));
            const double len = slot * (0.2 + 0.4 * u(rng));
            sat.push_back({a, a + len});
        }
    }
    return schedule_of(std::move(w), horizon_s);
}

}  // namespace ltp::testing
