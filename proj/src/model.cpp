#include "ltpfleo/model.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ltp {
namespace {

template <typename T>
void put_le(std::ofstream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in, const std::filesystem::path& path) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
        throw std::runtime_error(fmt::format("{}: truncated checkpoint", path.string()));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

bool ModelVector::finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(norm2(v)); }

double distance2(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void write_checkpoint(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    put_le<std::uint64_t>(out, values.size());
    for (double v : values) put_le<double>(out, v);
    if (!out) throw std::runtime_error(fmt::format("write to {} failed", path.string()));
}

Params read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open checkpoint {}", path.string()));
    const auto d = get_le<std::uint64_t>(in, path);
    const auto expected = 8 + 8 * d;
    if (std::filesystem::file_size(path) != expected)
        throw std::runtime_error(fmt::format("{}: size does not match dimension header {}", path.string(), d));
    Params values(d);
    for (auto& v : values) v = get_le<double>(in, path);
    return values;
}

}  // namespace ltp
