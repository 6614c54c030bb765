#include "ltpfleo/orbital.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ltpfleo/diagnostics.hpp"

namespace ltp {
namespace {

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

double ConstellationSpec::altitude_of_orbit(std::size_t orbit) const {
    return orbit_altitudes_km.empty() ? altitude_km : orbit_altitudes_km.at(orbit);
}

void ConstellationSpec::validate() const {
    if (num_orbits < 1) throw std::invalid_argument("constellation.num_orbits must be >= 1");
    if (sats_per_orbit < 1) throw std::invalid_argument("constellation.sats_per_orbit must be >= 1");
    if (!orbit_altitudes_km.empty() && orbit_altitudes_km.size() != num_orbits)
        throw std::invalid_argument("constellation.orbit_altitudes_km must list one altitude per orbit");
    for (std::size_t p = 0; p < num_orbits; ++p) {
        const double h = altitude_of_orbit(p);
        if (!(h > 0.0 && h < 2000.0))
            throw std::invalid_argument(
                fmt::format("constellation altitude {} km outside LEO range (0, 2000)", h));
    }
    if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0))
        throw std::invalid_argument("constellation.inclination_deg must lie in [0, 180]");
}

void GroundStation::validate() const {
    if (!(std::abs(latitude_deg) <= 90.0))
        throw std::invalid_argument("station.latitude_deg must lie in [-90, 90]");
    if (!(min_elevation_deg >= -90.0 && min_elevation_deg <= 90.0))
        throw std::invalid_argument("station.min_elevation_deg must lie in [-90, 90]");
}

double CircularElements::mean_motion() const {
    return std::sqrt(earth::mu_km3_s2 / (semi_major_axis_km * semi_major_axis_km * semi_major_axis_km));
}

double CircularElements::period_s() const { return 2.0 * std::numbers::pi / mean_motion(); }

std::vector<CircularElements> build_walker_delta(const ConstellationSpec& spec) {
    spec.validate();
    const auto planes = static_cast<double>(spec.num_orbits);
    const auto slots = static_cast<double>(spec.sats_per_orbit);
    const double raan_step = deg2rad(spec.raan_spread_deg) / planes;
    const double slot_step = 2.0 * std::numbers::pi / slots;
    const double phase_step = 2.0 * std::numbers::pi * spec.phasing / (planes * slots);

    std::vector<CircularElements> out;
    out.reserve(spec.num_satellites());
    for (std::size_t p = 0; p < spec.num_orbits; ++p) {
        for (std::size_t j = 0; j < spec.sats_per_orbit; ++j) {
            CircularElements e;
            e.satellite = p * spec.sats_per_orbit + j;
            e.orbit = p;
            e.semi_major_axis_km = earth::radius_km + spec.altitude_of_orbit(p);
            e.inclination_rad = deg2rad(spec.inclination_deg);
            e.raan_rad = raan_step * static_cast<double>(p);
            e.arg_latitude0_rad = std::fmod(slot_step * static_cast<double>(j) +
                                                phase_step * static_cast<double>(p),
                                            2.0 * std::numbers::pi);
            out.push_back(e);
        }
    }
    return out;
}

Vec3 propagate_ecef(const CircularElements& e, double t_s, Frame frame) {
    const double u = e.arg_latitude0_rad + e.mean_motion() * t_s;
    const double r = e.semi_major_axis_km;
    const double cu = std::cos(u), su = std::sin(u);
    const double co = std::cos(e.raan_rad), so = std::sin(e.raan_rad);
    const double ci = std::cos(e.inclination_rad), si = std::sin(e.inclination_rad);

    const Vec3 inertial{r * (co * cu - so * su * ci), r * (so * cu + co * su * ci), r * su * si};
    if (frame == Frame::inertial) return inertial;

    const double theta = earth::rotation_rad_s * t_s;
    const double ct = std::cos(theta), st = std::sin(theta);
    return {ct * inertial.x + st * inertial.y, -st * inertial.x + ct * inertial.y, inertial.z};
}

Vec3 station_position(const GroundStation& gs) {
    const double lat = deg2rad(gs.latitude_deg), lon = deg2rad(gs.longitude_deg);
    return {earth::radius_km * std::cos(lat) * std::cos(lon),
            earth::radius_km * std::cos(lat) * std::sin(lon), earth::radius_km * std::sin(lat)};
}

double elevation_deg(const Vec3& sat, const GroundStation& gs) {
    const Vec3 site = station_position(gs);
    const Vec3 range = sat - site;
    const double up = dot(range, site) / earth::radius_km;
    const double s = std::clamp(up / range.norm(), -1.0, 1.0);
    return rad2deg(std::asin(s));
}

std::vector<Interval> intersect(const std::vector<Interval>& a, const std::vector<Interval>& b) {
    std::vector<Interval> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double lo = std::max(a[i].start, b[j].start);
        const double hi = std::min(a[i].end, b[j].end);
        if (hi > lo) out.push_back({lo, hi});
        if (a[i].end < b[j].end)
            ++i;
        else
            ++j;
    }
    return out;
}

double total_length(const std::vector<Interval>& v) {
    double sum = 0.0;
    for (const auto& w : v) sum += w.length();
    return sum;
}

double overlap_duration(const std::vector<Interval>& a, const std::vector<Interval>& b) {
    return total_length(intersect(a, b));
}

std::vector<VisibilityWindow> ContactSchedule::flattened() const {
    std::vector<VisibilityWindow> out;
    for (SatelliteId k = 0; k < windows.size(); ++k)
        for (const auto& w : windows[k]) out.push_back({k, w.start, w.end});
    return out;
}

double ContactSchedule::next_contact(SatelliteId k, double now_s) const {
    for (const auto& w : windows.at(k))
        if (w.end > now_s) return std::max(w.start, now_s);
    return std::numeric_limits<double>::infinity();
}

void ContactSchedule::write_csv(std::ostream& out) const {
    out << "satellite_id,start_s,end_s\n";
    for (const auto& w : flattened()) fmt::print(out, "{},{:.3f},{:.3f}\n", w.satellite_id, w.start_s, w.end_s);
}

std::vector<Interval> satellite_windows(const CircularElements& e, const GroundStation& gs,
                                        double horizon_s, double step, double tol, double start_s) {
    const auto visible = [&](double t) {
        return elevation_deg(propagate_ecef(e, t), gs) >= gs.min_elevation_deg;
    };
    // Returns the visible end of a bracket [lo, hi] whose endpoints differ in visibility.
    const auto refine = [&](double lo, double hi, bool lo_visible) {
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (visible(mid) == lo_visible)
                lo = mid;
            else
                hi = mid;
        }
        return lo_visible ? lo : hi;
    };

    std::vector<Interval> out;
    if (!(horizon_s > start_s)) return out;

    double prev_t = start_s;
    bool prev_vis = visible(start_s);
    double open_start = prev_vis ? start_s : -1.0;
    const auto n_steps = static_cast<std::size_t>(std::ceil((horizon_s - start_s) / step));
    for (std::size_t i = 1; i <= n_steps; ++i) {
        const double t = std::min(start_s + static_cast<double>(i) * step, horizon_s);
        const bool vis = visible(t);
        if (vis && !prev_vis) {
            open_start = refine(prev_t, t, false);
        } else if (!vis && prev_vis) {
            const double end = refine(prev_t, t, true);
            if (end > open_start) out.push_back({open_start, end});
            open_start = -1.0;
        }
        prev_t = t;
        prev_vis = vis;
    }
    if (prev_vis && horizon_s > open_start) out.push_back({open_start, horizon_s});
    return out;
}

ContactSchedule compute_visibility(const ConstellationSpec& spec, const GroundStation& gs,
                                   double horizon_s, const VisibilityOptions& options) {
    gs.validate();
    if (!(options.sample_step_s > 0.0)) throw std::invalid_argument("sample_step_s must be positive");
    if (!(options.refine_tolerance_s > 0.0))
        throw std::invalid_argument("refine_tolerance_s must be positive");
    if (horizon_s < 0.0) throw std::invalid_argument("horizon_s must be non-negative");
    if (options.sample_step_s > 60.0)
        warn(fmt::format("sample_step_s = {} s exceeds 60 s; short passes may be missed",
                         options.sample_step_s));

    const auto elements = build_walker_delta(spec);
    ContactSchedule schedule;
    schedule.horizon_s = horizon_s;
    schedule.sample_step_s = options.sample_step_s;
    schedule.windows.resize(elements.size());
    for_each_index(options.exec, elements.size(), [&](std::size_t k) {
        schedule.windows[k] = satellite_windows(elements[k], gs, horizon_s, options.sample_step_s,
                                                options.refine_tolerance_s);
    });
    return schedule;
}

void extend_visibility(ContactSchedule& schedule, const ConstellationSpec& spec, const GroundStation& gs,
                       double new_horizon_s, const VisibilityOptions& options) {
    if (new_horizon_s <= schedule.horizon_s) return;
    const auto elements = build_walker_delta(spec);
    if (elements.size() != schedule.windows.size())
        throw std::invalid_argument("schedule and constellation differ in satellite count");
    const double old_h = schedule.horizon_s;
    std::vector<std::vector<Interval>> added(elements.size());
    for_each_index(options.exec, elements.size(), [&](std::size_t k) {
        added[k] = satellite_windows(elements[k], gs, new_horizon_s, options.sample_step_s,
                                     options.refine_tolerance_s, old_h);
    });
    for (std::size_t k = 0; k < elements.size(); ++k) {
        auto& w = schedule.windows[k];
        auto& a = added[k];
        std::size_t first = 0;
        if (!w.empty() && !a.empty() && w.back().end == old_h && a.front().start == old_h) {
            w.back().end = a.front().end;
            first = 1;
        }
        w.insert(w.end(), a.begin() + static_cast<std::ptrdiff_t>(first), a.end());
    }
    schedule.horizon_s = new_horizon_s;
}

}  // namespace ltp
