#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "ltpfleo/parallel.hpp"

namespace ltp {

using SatelliteId = std::size_t;

namespace earth {
inline constexpr double radius_km = 6371.0;
inline constexpr double mu_km3_s2 = 398600.4418;
inline constexpr double rotation_rad_s = 7.2921159e-5;  // sidereal
}  // namespace earth

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Walker-Delta layout. Satellite ids run orbit-major: id = orbit * sats_per_orbit + slot.
struct ConstellationSpec {
    std::size_t num_orbits = 5;
    std::size_t sats_per_orbit = 10;
    double altitude_km = 780.0;
    // Optional per-orbit override of altitude_km; empty or num_orbits long.
    std::vector<double> orbit_altitudes_km;
    double inclination_deg = 80.0;
    double raan_spread_deg = 360.0;
    int phasing = 1;

    std::size_t num_satellites() const { return num_orbits * sats_per_orbit; }
    double altitude_of_orbit(std::size_t orbit) const;
    void validate() const;  // throws std::invalid_argument
};

struct GroundStation {
    double latitude_deg = 45.0;
    double longitude_deg = -100.0;
    double min_elevation_deg = 15.0;

    void validate() const;
};

// Circular orbit. arg_latitude0_rad is the argument of latitude at epoch.
struct CircularElements {
    SatelliteId satellite = 0;
    std::size_t orbit = 0;
    double semi_major_axis_km = 0.0;
    double inclination_rad = 0.0;
    double raan_rad = 0.0;
    double arg_latitude0_rad = 0.0;

    double mean_motion() const;  // rad/s
    double period_s() const;
};

std::vector<CircularElements> build_walker_delta(const ConstellationSpec& spec);

enum class Frame { earth_fixed, inertial };

// Earth-fixed position (km). Frame::inertial skips the Earth-rotation step; the
// two frames coincide at t = 0.
Vec3 propagate_ecef(const CircularElements& elements, double t_s,
                    Frame frame = Frame::earth_fixed);

Vec3 station_position(const GroundStation& gs);
double elevation_deg(const Vec3& sat_pos_km, const GroundStation& gs);

struct Interval {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }
    bool contains(double t) const { return start <= t && t <= end; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

// Intersection of two sorted disjoint interval lists (positive-length pieces only).
std::vector<Interval> intersect(const std::vector<Interval>& a, const std::vector<Interval>& b);
double total_length(const std::vector<Interval>& v);
double overlap_duration(const std::vector<Interval>& a, const std::vector<Interval>& b);

struct VisibilityWindow {
    SatelliteId satellite_id = 0;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct ContactSchedule {
    double horizon_s = 0.0;
    double sample_step_s = 10.0;
    std::vector<std::vector<Interval>> windows;  // indexed by satellite id

    std::size_t num_satellites() const { return windows.size(); }
    std::vector<VisibilityWindow> flattened() const;
    // Earliest time >= now at which the satellite is visible, or +inf.
    double next_contact(SatelliteId k, double now_s) const;
    void write_csv(std::ostream& out) const;
};

struct VisibilityOptions {
    double sample_step_s = 10.0;
    double refine_tolerance_s = 0.1;
    Exec exec = Exec::parallel;
};

ContactSchedule compute_visibility(const ConstellationSpec& spec, const GroundStation& gs,
                                   double horizon_s, const VisibilityOptions& options = {});

// Extends the schedule to new_horizon_s, sampling only the added span; a pass open at
// the old horizon is joined with its continuation.
void extend_visibility(ContactSchedule& schedule, const ConstellationSpec& spec, const GroundStation& gs,
                       double new_horizon_s, const VisibilityOptions& options = {});

// Single-satellite kernel used by compute_visibility, over [start_s, horizon_s].
std::vector<Interval> satellite_windows(const CircularElements& elements, const GroundStation& gs,
                                        double horizon_s, double sample_step_s,
                                        double refine_tolerance_s, double start_s = 0.0);

}  // namespace ltp
