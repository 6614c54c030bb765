#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ltpfleo/orbital.hpp"

using namespace ltp;

namespace {

double kepler_period(double altitude_km) {
    const double a = 6371.0 + altitude_km;
    return 2.0 * std::numbers::pi * std::sqrt(a * a * a / 398600.4418);
}

Vec3 geodetic(double lat_deg, double lon_deg, double r_km) {
    const double la = lat_deg * std::numbers::pi / 180.0, lo = lon_deg * std::numbers::pi / 180.0;
    return {r_km * std::cos(la) * std::cos(lo), r_km * std::cos(la) * std::sin(lo), r_km * std::sin(la)};
}

}  // namespace

TEST_CASE("walker delta layout") {
    ConstellationSpec spec;
    const auto els = build_walker_delta(spec);
    REQUIRE(els.size() == 50);
    CHECK(els[10].raan_rad - els[0].raan_rad == doctest::Approx(72.0 * std::numbers::pi / 180.0));
    CHECK(els[49].orbit == 4);
    for (const auto& e : els) {
        CHECK(e.inclination_rad == doctest::Approx(80.0 * std::numbers::pi / 180.0));
        CHECK(std::abs(e.period_s() - 6018.0) <= 2.0);
        CHECK(e.period_s() == doctest::Approx(kepler_period(780.0)).epsilon(1e-12));
    }

    ConstellationSpec one;
    one.num_orbits = 1;
    one.sats_per_orbit = 1;
    const auto single = build_walker_delta(one);
    REQUIRE(single.size() == 1);
    CHECK(single[0].arg_latitude0_rad == 0.0);
}

TEST_CASE("per-orbit altitudes") {
    ConstellationSpec spec;
    spec.num_orbits = 2;
    spec.sats_per_orbit = 1;
    spec.orbit_altitudes_km = {600.0, 1200.0};
    const auto els = build_walker_delta(spec);
    CHECK(els[0].semi_major_axis_km == doctest::Approx(6971.0));
    CHECK(els[1].semi_major_axis_km == doctest::Approx(7571.0));
    spec.orbit_altitudes_km = {600.0};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("propagation") {
    ConstellationSpec spec;
    const auto e = build_walker_delta(spec)[7];
    const Vec3 p0 = propagate_ecef(e, 0.0);
    CHECK(p0 == propagate_ecef(e, 0.0, Frame::inertial));
    CHECK(p0.norm() == doctest::Approx(e.semi_major_axis_km).epsilon(1e-12));

    const Vec3 p1 = propagate_ecef(e, e.period_s(), Frame::inertial);
    CHECK((p1 - p0).norm() / p0.norm() < 1e-9);

    ConstellationSpec eq;
    eq.num_orbits = 1;
    eq.sats_per_orbit = 3;
    eq.inclination_deg = 0.0;
    for (const auto& el : build_walker_delta(eq))
        for (double t = 0.0; t < 20000.0; t += 777.0) CHECK(std::abs(propagate_ecef(el, t).z) < 1e-9);
}

TEST_CASE("elevation geometry") {
    GroundStation gs{30.0, 40.0, 10.0};
    const Vec3 st = station_position(gs);
    CHECK(elevation_deg(geodetic(30.0, 40.0, 7151.0), gs) == doctest::Approx(90.0).epsilon(1e-9));
    CHECK(elevation_deg(geodetic(-30.0, -140.0, 7151.0), gs) < 0.0);

    // point on the tangent plane: station + d * east
    const double lo = 40.0 * std::numbers::pi / 180.0;
    const Vec3 east{-std::sin(lo), std::cos(lo), 0.0};
    const Vec3 p{st.x + 500.0 * east.x, st.y + 500.0 * east.y, st.z + 500.0 * east.z};
    CHECK(std::abs(elevation_deg(p, gs)) < 1e-9);
}

TEST_CASE("interval helpers") {
    const std::vector<Interval> a{{0, 10}, {20, 30}};
    const std::vector<Interval> b{{5, 25}};
    const auto c = intersect(a, b);
    REQUIRE(c.size() == 2);
    CHECK(c[0] == Interval{5, 10});
    CHECK(c[1] == Interval{20, 25});
    CHECK(total_length(c) == 10.0);
    CHECK(overlap_duration(a, b) == 10.0);
    CHECK(intersect(a, {{10, 20}}).empty());
}

TEST_CASE("visibility edge cases") {
    ConstellationSpec spec;
    spec.num_orbits = 1;
    spec.sats_per_orbit = 2;
    GroundStation blocked{45.0, -100.0, 90.0};
    for (const auto& w : compute_visibility(spec, blocked, 86400.0).windows) CHECK(w.empty());

    ConstellationSpec eq = spec;
    eq.inclination_deg = 0.0;
    GroundStation open{0.0, 0.0, -90.0};
    const auto s = compute_visibility(eq, open, 7200.0);
    for (const auto& w : s.windows) {
        REQUIRE(w.size() == 1);
        CHECK(w[0] == Interval{0.0, 7200.0});
    }

    const auto empty = compute_visibility(ConstellationSpec{}, GroundStation{}, 0.0);
    CHECK(empty.num_satellites() == 50);
    for (const auto& w : empty.windows) CHECK(w.empty());
}

TEST_CASE("default constellation passes") {
    const auto s = compute_visibility(ConstellationSpec{}, GroundStation{}, 86400.0);
    std::size_t passes = 0;
    for (const auto& w : s.windows)
        for (const auto& iv : w) {
            CHECK(iv.length() > 0.0);
            CHECK(iv.length() <= 900.0);
            ++passes;
        }
    CHECK(passes > 50);

    // dense 1 s sampling oracle on a few satellites
    const auto els = build_walker_delta(ConstellationSpec{});
    const GroundStation gs;
    for (SatelliteId k : {0u, 13u, 27u, 49u}) {
        double visible = 0.0;
        for (double t = 0.0; t < 86400.0; t += 1.0)
            if (elevation_deg(propagate_ecef(els[k], t + 0.5), gs) >= gs.min_elevation_deg) visible += 1.0;
        CHECK(std::abs(total_length(s.windows[k]) - visible) <= 2.0 * static_cast<double>(s.windows[k].size()) + 1.0);
    }
}

TEST_CASE("serial and parallel visibility agree") {
    VisibilityOptions serial;
    serial.exec = Exec::serial;
    const auto a = compute_visibility(ConstellationSpec{}, GroundStation{}, 43200.0, serial);
    const auto b = compute_visibility(ConstellationSpec{}, GroundStation{}, 43200.0);
    CHECK(a.windows == b.windows);
}

TEST_CASE("extending the horizon matches a fresh computation") {
    ConstellationSpec spec;
    spec.num_orbits = 2;
    spec.sats_per_orbit = 3;
    const GroundStation gs;
    auto grown = compute_visibility(spec, gs, 40000.0);
    extend_visibility(grown, spec, gs, 130000.0);
    const auto fresh = compute_visibility(spec, gs, 130000.0);
    CHECK(grown.horizon_s == fresh.horizon_s);
    REQUIRE(grown.windows.size() == fresh.windows.size());
    for (std::size_t k = 0; k < grown.windows.size(); ++k) {
        REQUIRE(grown.windows[k].size() == fresh.windows[k].size());
        for (std::size_t i = 0; i < grown.windows[k].size(); ++i) {
            CHECK(grown.windows[k][i].start == doctest::Approx(fresh.windows[k][i].start).epsilon(1e-9));
            CHECK(grown.windows[k][i].end == doctest::Approx(fresh.windows[k][i].end).epsilon(1e-9));
        }
    }
}

TEST_CASE("schedule csv and next contact") {
    ContactSchedule s;
    s.horizon_s = 100.0;
    s.windows = {{{10.0, 20.0}}, {}};
    std::ostringstream out;
    s.write_csv(out);
    CHECK(out.str() == "satellite_id,start_s,end_s\n0,10.000,20.000\n");
    CHECK(s.next_contact(0, 0.0) == 10.0);
    CHECK(s.next_contact(0, 15.0) == 15.0);
    CHECK(std::isinf(s.next_contact(0, 25.0)));
    CHECK(std::isinf(s.next_contact(1, 0.0)));
}

TEST_CASE("invalid inputs") {
    ConstellationSpec bad;
    bad.num_orbits = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    GroundStation g{95.0, 0.0, 10.0};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
