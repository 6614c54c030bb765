#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ltpfleo/orbital.hpp"

namespace ltp {

using Params = std::vector<double>;

struct ModelVector {
    Params values;
    std::optional<SatelliteId> owner;  // nullopt: global model
    std::size_t round_produced = 0;

    std::size_t dimension() const { return values.size(); }
    bool finite() const;
};

double norm2(std::span<const double> v);
double norm(std::span<const double> v);
double distance2(std::span<const double> a, std::span<const double> b);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

// Flat binary checkpoint: little-endian uint64 dimension, then that many
// little-endian IEEE-754 float64 values.
void write_checkpoint(const std::filesystem::path& path, std::span<const double> values);
Params read_checkpoint(const std::filesystem::path& path);

}  // namespace ltp
