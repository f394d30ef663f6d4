// SPDX-License-Identifier: Apache-2.0
//
// bisense — passive bistatic OFDM sensing toolkit
// Copyright (C) 2026 bisense contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bisense/scene.hpp"

using namespace bisense;

namespace {

WaveformConfig lte_waveform() {
    WaveformConfig wf;
    wf.carrier_frequency = 3.1e9;
    wf.num_subcarriers = 100;
    wf.subcarrier_spacing = 200e3;  // 20 MHz total
    wf.symbol_interval = 1e-3;
    wf.frames_per_second = 1000.0;
    return wf;
}

// Independent oracle: bistatic Doppler from a central finite difference of the
// total path length, with the full (kinematic + vital) position map.
double fd_doppler_oracle(const Scene& scene, const TargetState& target,
                         const WaveformConfig& wf, double t, double h = 1e-5) {
    const BistaticGeometry geom = scene.geometry();
    auto pl = [&](double u) { return geom.path_length(apply_vitals(target, geom, u)); };
    const double dpl_dt = (pl(t + h) - pl(t - h)) / (2.0 * h);
    return -dpl_dt / wf.wavelength();
}

}  // namespace

TEST_CASE("stationary target has zero Doppler") {
    Scene scene;
    scene.tx_position = {0.0, 0.0};
    scene.rx_position = {2.2, 0.0};
    scene.duration = 10.0;
    TargetState t;
    t.position = {1.0, 3.0};
    scene.targets.push_back(t);
    const auto paths = scene_to_paths(scene, lte_waveform(), 1.0);
    REQUIRE(paths.size() == 2);
    CHECK(paths[0].delay == 0.0);    // LOS by convention
    CHECK(paths[0].doppler == 0.0);
    CHECK(paths[1].doppler == 0.0);
    CHECK(paths[1].delay > 0.0);
}

TEST_CASE("path parameters match frozen high-precision values") {
    // tx=(0,0), rx=(2.2,0), target (1.1, 2.0), v=(0.5,-0.3), 3.1 GHz,
    // rx array facing the transmitter.
    Scene scene;
    scene.tx_position = {0.0, 0.0};
    scene.rx_position = {2.2, 0.0};
    scene.rx_boresight_rad = kPi;
    scene.duration = 10.0;
    TargetState t;
    t.position = {1.1, 2.0};
    t.velocity = {0.5, -0.3};
    scene.targets.push_back(t);
    const auto paths = scene_to_paths(scene, lte_waveform(), 0.0);
    REQUIRE(paths.size() == 2);
    CHECK(std::abs(paths[1].delay - 7.8890739946677743e-9) < 1e-20);
    CHECK(std::abs(paths[1].doppler - 5.4362995020327144) < 1e-9);
    CHECK(std::abs(paths[1].aoa - (-1.0679531158670358)) < 1e-12);
}

TEST_CASE("Doppler matches the finite-difference path-length oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> upos(-3.0, 5.0), uy(1.0, 6.0), uv(-1.5, 1.5);
    const WaveformConfig wf = lte_waveform();
    for (int i = 0; i < 50; ++i) {
        Scene scene;
        scene.tx_position = {0.0, 0.0};
        scene.rx_position = {2.2, 0.0};
        scene.duration = 10.0;
        TargetState t;
        t.position = {upos(rng), uy(rng)};
        t.velocity = {uv(rng), uv(rng)};
        t.acceleration = {0.2 * uv(rng), 0.2 * uv(rng)};
        scene.targets.push_back(t);
        const double tt = 1.0;
        const auto paths = scene_to_paths(scene, wf, tt);
        const double oracle = fd_doppler_oracle(scene, scene.targets[0], wf, tt);
        CHECK(std::abs(paths[1].doppler - oracle) < 1e-4 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("vital displacement enters the Doppler and the oracle agrees") {
    const WaveformConfig wf = lte_waveform();
    Scene scene;
    scene.tx_position = {0.0, 0.0};
    scene.rx_position = {2.0, 0.0};
    scene.duration = 30.0;
    TargetState t;
    t.position = {1.0, 4.0};
    VitalModel vm;
    vm.resp_amplitude = 0.005;
    vm.resp_rate = 22.0 / 60.0;
    t.vital = vm;
    scene.targets.push_back(t);
    for (double tt : {0.3, 1.1, 2.4}) {
        const auto paths = scene_to_paths(scene, wf, tt);
        const double oracle = fd_doppler_oracle(scene, scene.targets[0], wf, tt, 1e-6);
        CHECK(std::abs(paths[1].doppler - oracle) < 1e-3);
    }
}

TEST_CASE("apply_vitals: zero amplitudes leave the position unchanged") {
    Scene scene;
    scene.tx_position = {0.0, 0.0};
    scene.rx_position = {2.0, 0.0};
    TargetState t;
    t.position = {1.0, 4.0};
    VitalModel vm;  // all amplitudes zero
    vm.resp_amplitude = 0.0;
    vm.heart_amplitude = 0.0;
    t.vital = vm;
    const Vec2 p = apply_vitals(t, scene.geometry(), 1.234);
    CHECK(p.x == 1.0);
    CHECK(p.y == 4.0);
}

TEST_CASE("apply_vitals: displacement period and peak phase swing") {
    // Period of a 22/60 Hz respiration cycle is 60/22 s.
    VitalModel vm;
    vm.resp_amplitude = 0.005;
    vm.resp_rate = 22.0 / 60.0;
    const double period = 60.0 / 22.0;
    CHECK(std::abs(period - 2.7272727272727273) < 1e-12);
    CHECK(std::abs(vm.displacement(0.1) - vm.displacement(0.1 + period)) < 1e-12);

    // 5 mm resp amplitude at 5.32 GHz: peak path-length phase swing between the
    // displacement extremes, evaluated by direct geometry (frozen oracle value).
    Scene scene;
    scene.tx_position = {0.0, 0.0};
    scene.rx_position = {2.0, 0.0};
    TargetState t;
    t.position = {1.0, 4.0};
    t.vital = vm;
    const BistaticGeometry geom = scene.geometry();
    const Vec2 bis = geom.bisector(t.position);
    const double pl_hi = geom.path_length(t.position + bis * (-0.005));
    const double pl_lo = geom.path_length(t.position + bis * (+0.005));
    const double lambda = kSpeedOfLight / 5.32e9;
    const double swing = kTwoPi * (pl_hi - pl_lo) / lambda;
    CHECK(std::abs((pl_hi - pl_lo) - 0.019402849163681915) < 1e-12);
    CHECK(std::abs(swing - 2.1633974090295274) < 1e-9);
}

TEST_CASE("rectangular waypoint trajectory stays on the rectangle") {
    TargetState t;
    t.waypoints = {{2.0, 2.0}, {4.0, 2.0}, {4.0, 5.0}, {2.0, 5.0}};  // 2 m x 3 m
    t.speed = 0.5;
    const double perimeter = 10.0;
    const Vec2 p0 = t.position_at(0.0);
    CHECK(std::abs(p0.x - 2.0) + std::abs(p0.y - 2.0) < 1e-12);
    const Vec2 p1 = t.position_at(perimeter / t.speed);  // one full lap
    CHECK(std::abs(p1.x - 2.0) + std::abs(p1.y - 2.0) < 1e-9);
    const Vec2 pm = t.position_at(2.0);  // 1 m along the first edge
    CHECK(std::abs(pm.x - 3.0) + std::abs(pm.y - 2.0) < 1e-12);
    const Vec2 v = t.velocity_at(2.0);
    CHECK(std::abs(v.x - 0.5) + std::abs(v.y) < 1e-12);
}

TEST_CASE("scene validation rejects bad scenes") {
    Scene scene;
    scene.tx_position = {1.0, 1.0};
    scene.rx_position = {1.0, 1.0};  // coincident sites
    CHECK_THROWS_AS(scene.validate(), Error);

    Scene s2;
    s2.tx_position = {0.0, 0.0};
    s2.rx_position = {2.0, 0.0};
    s2.duration = 1.0;
    TargetState t;
    t.position = {0.0, 0.0};  // on top of tx
    s2.targets.push_back(t);
    CHECK_THROWS_AS(scene_to_paths(s2, lte_waveform(), 0.0), Error);
}
