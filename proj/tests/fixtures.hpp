#pragma once

#include "ltpfleo/simulator.hpp"

namespace ltp::testing {

// 6 satellites in two close planes; the smoke profile.
inline SimConfig smoke_config() {
    SimConfig c;
    c.constellation.num_orbits = 2;
    c.constellation.sats_per_orbit = 3;
    c.constellation.raan_spread_deg = 20.0;
    c.constellation.phasing = 0;
    c.target_ltp = 2;
    c.rounds = 20;
    c.samples_per_satellite = 200;
    c.loss.num_features = 10;
    c.loss.num_classes = 10;
    c.sgd.steps = 5;
    c.sgd.mini_batch = 32;
    c.sgd.lr.c = 0.1;
    return c;
}

}  // namespace ltp::testing
