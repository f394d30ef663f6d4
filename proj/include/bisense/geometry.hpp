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

#include "common.hpp"

namespace bisense {

/// 2-D Cartesian vector. All geometry is planar (azimuth plane, linear arrays).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        double n = norm();
        require(n > 0.0, errc::degenerate_geometry, "cannot normalize zero vector");
        return {x / n, y / n};
    }
    double angle() const { return std::atan2(y, x); }
};

inline Vec2 unit_from_angle(double a) { return {std::cos(a), std::sin(a)}; }

/**
 * @brief Bistatic site geometry: fixed transmitter and receiver positions plus
 *        the orientation (boresight) of the linear arrays at each site.
 *
 * Angles of arrival/departure are measured from the respective boresight,
 * positive counter-clockwise. Array elements lie along the direction
 * boresight + 90 degrees.
 */
struct BistaticGeometry {
    Vec2 tx;
    Vec2 rx;
    double rx_boresight = 0.0;  // rad, global frame
    double tx_boresight = 0.0;

    double baseline() const { return (rx - tx).norm(); }

    /// Total tx->p->rx path length in meters.
    double path_length(Vec2 p) const { return (p - tx).norm() + (p - rx).norm(); }

    /// Excess delay over the LOS path, seconds.
    double excess_delay(Vec2 p, double prop_speed = kSpeedOfLight) const {
        return (path_length(p) - baseline()) / prop_speed;
    }

    /// Bistatic Doppler for a scatterer at p moving with velocity v:
    /// f_D = -(1/lambda) d/dt(|tx-p| + |p-rx|).
    double doppler(Vec2 p, Vec2 v, double wavelength) const {
        Vec2 ut = (p - tx).normalized();
        Vec2 ur = (p - rx).normalized();
        return -(v.dot(ut + ur)) / wavelength;
    }

    /// Angle of arrival at the rx array, measured from its boresight.
    double aoa(Vec2 p) const { return wrap_pi((p - rx).angle() - rx_boresight); }

    /// Angle of departure at the tx array, measured from its boresight.
    double aod(Vec2 p) const { return wrap_pi((p - tx).angle() - tx_boresight); }

    /// Unit vector from p toward the sum of the directions to tx and rx.
    /// Motion along it maximizes bistatic path-length change.
    Vec2 bisector(Vec2 p) const {
        Vec2 to_tx = (tx - p).normalized();
        Vec2 to_rx = (rx - p).normalized();
        return (to_tx + to_rx).normalized();
    }
};

/**
 * @brief Invert (excess delay, arrival ray) to a Cartesian position.
 *
 * The range sum s = |tx-rx| + c*delay defines an ellipse with foci tx and rx;
 * the returned point is the intersection of that ellipse with the ray leaving
 * rx at global angle `ray_angle`:
 *
 *   r = (s^2 - L^2) / (2 (s - L cos(psi))),  psi = angle(ray, rx->tx)
 *
 * @param delay excess delay over LOS, seconds (must be > 0 off the baseline)
 * @param ray_angle global angle of the arrival ray at rx
 */
inline Vec2 bistatic_to_cartesian(double delay, double ray_angle, Vec2 tx, Vec2 rx,
                                  double prop_speed = kSpeedOfLight) {
    require(delay >= 0.0, errc::invalid_argument, "excess delay must be non-negative");
    const double L = (tx - rx).norm();
    require(L > 0.0, errc::degenerate_geometry, "tx and rx coincide");
    const double s = L + prop_speed * delay;
    const Vec2 u = unit_from_angle(ray_angle);
    const double cos_psi = u.dot((tx - rx) * (1.0 / L));
    const double denom = 2.0 * (s - L * cos_psi);
    if (denom <= 0.0)
        fail(errc::degenerate_geometry, "degenerate bistatic inversion (ray along baseline)");
    const double r = (s * s - L * L) / denom;
    if (r <= 0.0)
        fail(errc::degenerate_geometry, "point on baseline cannot be resolved (zero excess delay)");
    return rx + u * r;
}

}  // namespace bisense
