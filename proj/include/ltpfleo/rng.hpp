#pragma once

#include <cstdint>
#include <random>

namespace ltp {

// Randomness is split from one root seed. Each consumer names a stream and up to
// two indices (round, satellite, replica, ...); the derived seed is the first
// output of std::seed_seq over {root lo/hi words, stream, a, b}. seed_seq's
// algorithm is fixed by the standard, so derived seeds are stable across runs.
enum class Stream : std::uint32_t {
    data = 1,
    holdout = 2,
    init_model = 3,
    overhead = 4,
    sgd = 5,
    replica = 6,
    constants = 7,
    property = 8,
};

inline std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t a = 0,
                                 std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                      static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                      static_cast<std::uint32_t>(b >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline std::mt19937_64 make_rng(std::uint64_t root, Stream stream, std::uint64_t a = 0,
                                std::uint64_t b = 0) {
    return std::mt19937_64(derive_seed(root, stream, a, b));
}

}  // namespace ltp
