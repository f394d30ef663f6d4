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

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "common.hpp"
#include "geometry.hpp"

namespace bisense {

/// OFDM waveform parameters. Subcarrier j carries the baseband frequency
/// offset (j - N/2) * spacing, i.e. the grid is centered on the carrier.
struct WaveformConfig {
    double carrier_frequency = 3.1e9;   // Hz
    int num_subcarriers = 100;
    double subcarrier_spacing = 200e3;  // Hz
    double symbol_interval = 1e-3;      // s, CSI sample interval
    double frames_per_second = 1000.0;  // Hz, must match 1/symbol_interval
    double propagation_speed = kSpeedOfLight;

    double wavelength() const { return propagation_speed / carrier_frequency; }
    double bandwidth() const { return num_subcarriers * subcarrier_spacing; }
    /// Baseband frequency of subcarrier j (Delta f_j).
    double subcarrier_offset(int j) const {
        return (j - num_subcarriers / 2) * subcarrier_spacing;
    }

    void validate() const {
        require(carrier_frequency > 0, errc::invalid_config, "carrier_frequency must be > 0");
        require(subcarrier_spacing > 0, errc::invalid_config, "subcarrier_spacing must be > 0");
        require(symbol_interval > 0, errc::invalid_config, "symbol_interval must be > 0");
        require(num_subcarriers >= 2, errc::invalid_config, "num_subcarriers must be >= 2");
        require(propagation_speed > 0, errc::invalid_config, "propagation_speed must be > 0");
        require(std::abs(frames_per_second * symbol_interval - 1.0) < 1e-6,
                errc::invalid_config, "frames_per_second must equal 1/symbol_interval");
    }
};

/// Uniform linear arrays at both sites. A spacing of 0 means "use half the
/// carrier wavelength" (resolved by effective_*_spacing).
struct ArrayConfig {
    int num_tx = 1;
    int num_rx = 3;
    double tx_spacing = 0.0;  // m; 0 -> lambda/2
    double rx_spacing = 0.0;

    double effective_tx_spacing(const WaveformConfig& wf) const {
        return tx_spacing > 0.0 ? tx_spacing : 0.5 * wf.wavelength();
    }
    double effective_rx_spacing(const WaveformConfig& wf) const {
        return rx_spacing > 0.0 ? rx_spacing : 0.5 * wf.wavelength();
    }

    void validate() const {
        require(num_tx >= 1, errc::invalid_config, "num_tx must be >= 1");
        require(num_rx >= 1, errc::invalid_config, "num_rx must be >= 1");
        require(tx_spacing >= 0, errc::invalid_config, "tx_spacing must be >= 0");
        require(rx_spacing >= 0, errc::invalid_config, "rx_spacing must be >= 0");
    }
};

/// One resolved propagation path of the channel model: excess delay relative
/// to the LOS path, bistatic Doppler, arrival/departure angles and a complex
/// gain that absorbs path loss and reflection coefficient.
struct PathComponent {
    double delay = 0.0;    // s, >= 0
    double doppler = 0.0;  // Hz
    double aoa = 0.0;      // rad, from rx boresight
    double aod = 0.0;      // rad, from tx boresight
    cplx gain{1.0, 0.0};
};

/// Chest/heart periodic displacement model.
struct VitalModel {
    double resp_amplitude = 0.0;   // m
    double resp_rate = 0.3;        // Hz
    double heart_amplitude = 0.0;  // m
    double heart_rate = 1.2;       // Hz

    double displacement(double t) const {
        return resp_amplitude * std::sin(kTwoPi * resp_rate * t) +
               heart_amplitude * std::sin(kTwoPi * heart_rate * t);
    }
    /// d/dt of displacement.
    double velocity(double t) const {
        return resp_amplitude * kTwoPi * resp_rate * std::cos(kTwoPi * resp_rate * t) +
               heart_amplitude * kTwoPi * heart_rate * std::cos(kTwoPi * heart_rate * t);
    }

    void validate() const {
        require(resp_amplitude >= 0 && heart_amplitude >= 0, errc::invalid_config,
                "vital amplitudes must be >= 0");
        require(resp_rate > 0 && heart_rate > 0, errc::invalid_config,
                "vital rates must be > 0");
    }
};

/**
 * @brief A moving (or breathing) reflector.
 *
 * Kinematics follow position + velocity*t + 0.5*acceleration*t^2 unless a
 * closed waypoint polyline is given, in which case the target walks the
 * polyline at constant `speed`, wrapping around at the end.
 */
struct TargetState {
    Vec2 position{};
    Vec2 velocity{};
    Vec2 acceleration{};
    cplx reflect_gain{1.0, 0.0};
    std::optional<VitalModel> vital;
    std::vector<Vec2> waypoints;  // closed polyline when size >= 2
    double speed = 0.0;           // m/s along the polyline

    bool has_waypoints() const { return waypoints.size() >= 2; }

    Vec2 position_at(double t) const {
        if (!has_waypoints())
            return position + velocity * t + acceleration * (0.5 * t * t);
        return waypoint_state(t).first;
    }

    Vec2 velocity_at(double t) const {
        if (!has_waypoints()) return velocity + acceleration * t;
        return waypoint_state(t).second;
    }

  private:
    std::pair<Vec2, Vec2> waypoint_state(double t) const {
        double perimeter = 0.0;
        const size_t n = waypoints.size();
        for (size_t i = 0; i < n; ++i) perimeter += (waypoints[(i + 1) % n] - waypoints[i]).norm();
        require(perimeter > 0.0, errc::invalid_config, "degenerate waypoint polyline");
        double s = std::fmod(speed * t, perimeter);
        if (s < 0) s += perimeter;
        for (size_t i = 0; i < n; ++i) {
            const Vec2 a = waypoints[i];
            const Vec2 b = waypoints[(i + 1) % n];
            const double seg = (b - a).norm();
            if (s <= seg || i + 1 == n) {
                const Vec2 dir = (b - a) * (1.0 / seg);
                return {a + dir * s, dir * speed};
            }
            s -= seg;
        }
        return {waypoints[0], {0.0, 0.0}};  // unreachable
    }
};

struct Scatterer {
    Vec2 position{};
    cplx gain{1.0, 0.0};
};

/**
 * @brief Ground-truth multipath scene: sites, the LOS path, moving targets and
 *        static scatterers.
 *
 * Boresights default to NaN, which resolves to the left-hand normal of the
 * tx->rx baseline (arrays lie along the baseline, looking at the +normal side
 * where targets are expected).
 */
struct Scene {
    Vec2 tx_position{};
    Vec2 rx_position{};
    double rx_boresight_rad = std::nan("");
    double tx_boresight_rad = std::nan("");
    cplx los_gain{1.0, 0.0};
    std::vector<TargetState> targets;
    std::vector<Scatterer> static_scatterers;
    double duration = 1.0;  // s

    BistaticGeometry geometry() const {
        BistaticGeometry g;
        g.tx = tx_position;
        g.rx = rx_position;
        const double normal = (rx_position - tx_position).angle() + kPi / 2;
        g.rx_boresight = std::isnan(rx_boresight_rad) ? normal : rx_boresight_rad;
        g.tx_boresight = std::isnan(tx_boresight_rad) ? normal : tx_boresight_rad;
        return g;
    }

    void validate() const {
        require((tx_position - rx_position).norm() > 0.0, errc::invalid_config,
                "tx_position and rx_position must differ");
        require(duration > 0.0, errc::invalid_config, "duration must be > 0");
        for (const auto& t : targets) {
            require(std::isfinite(t.position.x) && std::isfinite(t.position.y) &&
                        std::isfinite(t.velocity.x) && std::isfinite(t.velocity.y) &&
                        std::isfinite(t.acceleration.x) && std::isfinite(t.acceleration.y),
                    errc::invalid_config, "target kinematics must be finite");
            if (t.vital) t.vital->validate();
        }
    }
};

/// Position of a target at time t with its vital displacement applied along
/// the bistatic bisector (identity when no vital model is present).
inline Vec2 apply_vitals(const TargetState& target, const BistaticGeometry& geom, double t) {
    const Vec2 p = target.position_at(t);
    if (!target.vital) return p;
    return p + geom.bisector(p) * target.vital->displacement(t);
}

namespace detail {

inline PathComponent point_path(const BistaticGeometry& geom, const WaveformConfig& wf, Vec2 p,
                                Vec2 v, cplx gain) {
    require((p - geom.tx).norm() > 1e-9 && (p - geom.rx).norm() > 1e-9, errc::invalid_config,
            "scatterer coincides with tx or rx");
    PathComponent pc;
    pc.delay = geom.excess_delay(p, wf.propagation_speed);
    pc.doppler = geom.doppler(p, v, wf.wavelength());
    pc.aoa = geom.aoa(p);
    pc.aod = geom.aod(p);
    pc.gain = gain;
    require(std::abs(pc.aoa) <= kPi / 2 + 1e-12 && std::abs(pc.aod) <= kPi / 2 + 1e-12,
            errc::invalid_config, "scatterer behind an array (|angle| > pi/2)");
    return pc;
}

}  // namespace detail

/**
 * @brief Forward model: evaluate the scene's multipath components at time t.
 *
 * Always emits the LOS path first (zero excess delay, zero Doppler), then one
 * path per target and per static scatterer. Target Doppler includes the
 * vital-motion velocity along the bistatic bisector.
 */
inline std::vector<PathComponent> scene_to_paths(const Scene& scene, const WaveformConfig& wf,
                                                 double t) {
    scene.validate();
    require(t >= 0.0 && t <= scene.duration, errc::invalid_argument,
            "t outside scene duration");
    const BistaticGeometry geom = scene.geometry();

    std::vector<PathComponent> paths;
    paths.reserve(1 + scene.targets.size() + scene.static_scatterers.size());

    PathComponent los;
    los.delay = 0.0;
    los.doppler = 0.0;
    los.aoa = geom.aoa(geom.tx);
    los.aod = geom.aod(geom.rx);
    los.gain = scene.los_gain;
    paths.push_back(los);

    for (const auto& target : scene.targets) {
        const Vec2 p = apply_vitals(target, geom, t);
        Vec2 v = target.velocity_at(t);
        if (target.vital) v += geom.bisector(target.position_at(t)) * target.vital->velocity(t);
        paths.push_back(detail::point_path(geom, wf, p, v, target.reflect_gain));
    }
    for (const auto& sc : scene.static_scatterers)
        paths.push_back(detail::point_path(geom, wf, sc.position, {0.0, 0.0}, sc.gain));
    return paths;
}

}  // namespace bisense
