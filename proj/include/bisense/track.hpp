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

#include <Eigen/Dense>

#include <deque>
#include <optional>
#include <vector>

#include "cfar.hpp"
#include "cube.hpp"
#include "geometry.hpp"

namespace bisense {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// One CFAR detection lifted to physical units.
struct DetectionPoint {
    double delay = 0.0;    // s, excess over LOS
    double aoa = 0.0;      // rad, from rx boresight
    double doppler = 0.0;  // Hz
    double snr_db = 0.0;
    double window_timestamp = 0.0;
};

/// Convert CFAR hits on the Doppler-AoA heatmap into detection points: the
/// delay of a hit is the argmax of its delay spectrum, the SNR comes from the
/// CFAR noise estimate.
inline std::vector<DetectionPoint> points_from_cube(const FeatureCube& cube,
                                                    const std::vector<CfarHit>& hits) {
    std::vector<DetectionPoint> points;
    points.reserve(hits.size());
    for (const auto& h : hits) {
        require(h.row >= 0 && h.row < cube.nd && h.col >= 0 && h.col < cube.na,
                errc::invalid_argument, "CFAR hit outside the cube");
        int best = 0;
        for (int t = 1; t < cube.nt; ++t)
            if (cube.power_at(h.row, t, h.col) > cube.power_at(h.row, best, h.col)) best = t;
        DetectionPoint p;
        p.delay = cube.delay_axis[best];
        p.aoa = cube.aoa_axis[h.col];
        p.doppler = cube.doppler_axis[h.row];
        const double noise = std::max(h.noise, 1e-15 * h.power);  // keep SNR finite
        p.snr_db = db_from_power(h.power / noise);
        p.window_timestamp = cube.window_timestamp;
        points.push_back(p);
    }
    return points;
}

enum class TrackStatus { tentative, confirmed, deleted };

inline const char* to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::tentative: return "tentative";
        case TrackStatus::confirmed: return "confirmed";
        case TrackStatus::deleted: return "deleted";
    }
    return "?";
}

/// Constant-acceleration track: state [x y vx vy ax ay].
struct Track {
    int id = 0;
    Vec6 state = Vec6::Zero();
    Mat6 covariance = Mat6::Identity();
    TrackStatus status = TrackStatus::tentative;
    int hits = 0;
    int misses = 0;          // consecutive
    int age = 0;             // frames since creation
    std::deque<bool> recent; // association outcomes of the last N frames

    struct Snapshot {
        double timestamp;
        Vec6 state;
        TrackStatus status;
    };
    std::vector<Snapshot> history;

    Vec2 position() const { return {state(0), state(1)}; }
    Vec2 velocity() const { return {state(2), state(3)}; }
};

struct TrackerConfig {
    enum class Metric { euclidean, mahalanobis };
    Metric association = Metric::mahalanobis;
    double gate_threshold = 11.34;  // chi^2(3) 99% for mahalanobis; meters for euclidean
    int confirm_m = 3;
    int confirm_n = 5;
    int max_misses = 5;
    double process_noise_psd = 1.0;  // white-jerk PSD, (m/s^3)^2/Hz per axis
    double meas_var_delay = 2.5e-17; // (5 ns)^2
    double meas_var_aoa = 2.5e-3;    // (0.05 rad)^2
    double meas_var_doppler = 0.25;  // (0.5 Hz)^2
    bool use_doppler = true;         // Doppler in the measurement vector
    double init_cluster_radius = 0.75;  // m, one delay-bin equivalent
    int init_windows = 3;
    double init_pos_var = 0.25;
    double init_vel_var = 0.25;
    double init_acc_var = 0.25;

    void validate() const {
        require(confirm_m >= 1 && confirm_m <= confirm_n, errc::invalid_config,
                "M-of-N requires 1 <= M <= N");
        require(max_misses >= 1, errc::invalid_config, "max_misses must be >= 1");
        require(gate_threshold > 0 && process_noise_psd >= 0, errc::invalid_config,
                "invalid tracker gate/process noise");
        require(meas_var_delay > 0 && meas_var_aoa > 0 && meas_var_doppler > 0,
                errc::invalid_config, "measurement variances must be positive");
        require(init_windows >= 1 && init_cluster_radius > 0, errc::invalid_config,
                "invalid initialisation parameters");
    }
};

/**
 * @brief Bistatic measurement model h(state) = (delay, aoa, doppler) and its
 *        analytic Jacobian.
 */
struct MeasurementModel {
    BistaticGeometry geom;
    double wavelength = 0.1;
    double prop_speed = kSpeedOfLight;
    bool use_doppler = true;

    int dim() const { return use_doppler ? 3 : 2; }

    Eigen::VectorXd h(const Vec6& s) const {
        const Vec2 p{s(0), s(1)};
        const Vec2 v{s(2), s(3)};
        Eigen::VectorXd z(dim());
        z(0) = geom.excess_delay(p, prop_speed);
        z(1) = geom.aoa(p);
        if (use_doppler) z(2) = geom.doppler(p, v, wavelength);
        return z;
    }

    Eigen::MatrixXd jacobian(const Vec6& s) const {
        const Vec2 p{s(0), s(1)};
        const Vec2 v{s(2), s(3)};
        const Vec2 dt_ = p - geom.tx;
        const Vec2 dr_ = p - geom.rx;
        const double rt = dt_.norm(), rr = dr_.norm();
        require(rt > 1e-9 && rr > 1e-9, errc::degenerate_geometry,
                "track state coincides with a site");
        const Vec2 ut = dt_ * (1.0 / rt), ur = dr_ * (1.0 / rr);

        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim(), 6);
        // d tau / d p
        j(0, 0) = (ut.x + ur.x) / prop_speed;
        j(0, 1) = (ut.y + ur.y) / prop_speed;
        // d theta / d p (boresight constant)
        j(1, 0) = -dr_.y / (rr * rr);
        j(1, 1) = dr_.x / (rr * rr);
        if (use_doppler) {
            // d fD / d p = -(1/lambda) [ (v - (v.ut)ut)/rt + (v - (v.ur)ur)/rr ]
            const double vut = v.dot(ut), vur = v.dot(ur);
            j(2, 0) = -((v.x - vut * ut.x) / rt + (v.x - vur * ur.x) / rr) / wavelength;
            j(2, 1) = -((v.y - vut * ut.y) / rt + (v.y - vur * ur.y) / rr) / wavelength;
            j(2, 2) = -(ut.x + ur.x) / wavelength;
            j(2, 3) = -(ut.y + ur.y) / wavelength;
        }
        return j;
    }

    Eigen::VectorXd measurement(const DetectionPoint& p) const {
        Eigen::VectorXd z(dim());
        z(0) = p.delay;
        z(1) = p.aoa;
        if (use_doppler) z(2) = p.doppler;
        return z;
    }

    Eigen::MatrixXd noise(const TrackerConfig& cfg) const {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim(), dim());
        r(0, 0) = cfg.meas_var_delay;
        r(1, 1) = cfg.meas_var_aoa;
        if (use_doppler) r(2, 2) = cfg.meas_var_doppler;
        return r;
    }

    /// Detection point -> Cartesian position through the ellipse inversion.
    Vec2 to_cartesian(const DetectionPoint& p) const {
        return bistatic_to_cartesian(p.delay, geom.rx_boresight + p.aoa, geom.tx, geom.rx,
                                     prop_speed);
    }
};

namespace detail {

/// Per-axis constant-acceleration transition and white-jerk noise blocks.
inline void ca_blocks(double dt, double q, Eigen::Matrix3d& f, Eigen::Matrix3d& qm) {
    f << 1, dt, 0.5 * dt * dt, 0, 1, dt, 0, 0, 1;
    const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
    qm << dt5 / 20, dt4 / 8, dt3 / 6, dt4 / 8, dt3 / 3, dt2 / 2, dt3 / 6, dt2 / 2, dt;
    qm *= q;
}

inline void symmetrize(Mat6& p) { p = 0.5 * (p + p.transpose()).eval(); }

/// Clamp to positive definiteness by flooring eigenvalues; reports failure if
/// the matrix is beyond repair (non-finite).
inline void clamp_positive(Mat6& p) {
    symmetrize(p);
    require(p.allFinite(), errc::numerical_conditioning, "covariance became non-finite");
    Eigen::SelfAdjointEigenSolver<Mat6> es(p);
    require(es.info() == Eigen::Success, errc::numerical_conditioning,
            "covariance eigendecomposition failed");
    if (es.eigenvalues()(0) > 0.0) return;
    Eigen::Matrix<double, 6, 1> ev = es.eigenvalues().cwiseMax(1e-12);
    p = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Constant-acceleration prediction with white-jerk process noise.
inline Track ekf_predict(Track track, double dt, double process_noise_psd) {
    require(dt > 0.0, errc::invalid_argument, "dt must be positive");
    require(track.status != TrackStatus::deleted, errc::invalid_argument,
            "cannot predict a deleted track");
    Eigen::Matrix3d f, q;
    detail::ca_blocks(dt, process_noise_psd, f, q);
    // State order [x y vx vy ax ay]: per-axis indices {0,2,4} and {1,3,5}.
    Mat6 bigf = Mat6::Zero(), bigq = Mat6::Zero();
    for (int axis = 0; axis < 2; ++axis)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                bigf(axis + 2 * i, axis + 2 * j) = f(i, j);
                bigq(axis + 2 * i, axis + 2 * j) = q(i, j);
            }
    track.state = bigf * track.state;
    track.covariance = bigf * track.covariance * bigf.transpose() + bigq;
    detail::clamp_positive(track.covariance);
    return track;
}

/**
 * @brief EKF measurement update; returns false (leaving the track unchanged)
 *        when the innovation covariance is singular.
 */
inline bool ekf_update(Track& track, const DetectionPoint& point, const MeasurementModel& model,
                       const TrackerConfig& cfg) {
    const Eigen::MatrixXd h = model.jacobian(track.state);
    const Eigen::MatrixXd r = model.noise(cfg);
    Eigen::VectorXd innovation = model.measurement(point) - model.h(track.state);
    innovation(1) = wrap_pi(innovation(1));
    const Eigen::MatrixXd s = h * track.covariance * h.transpose() + r;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd gain = track.covariance * h.transpose() * llt.solve(
        Eigen::MatrixXd::Identity(model.dim(), model.dim()));
    track.state += gain * innovation;
    // Joseph-stabilized covariance update.
    const Mat6 ikh = Mat6::Identity() - gain * h;
    track.covariance = ikh * track.covariance * ikh.transpose() + gain * r * gain.transpose();
    detail::clamp_positive(track.covariance);
    return true;
}

struct Association {
    std::vector<std::pair<int, int>> pairs;  // (track index, point index)
    std::vector<int> unassigned_tracks;
    std::vector<int> unassigned_points;
};

/**
 * @brief Greedy global-nearest association with gating.
 *
 * Mahalanobis distance is taken over the (delay, aoa[, doppler]) innovation;
 * Euclidean distance over Cartesian positions (points that cannot be inverted
 * to Cartesian stay unassigned). Ties break deterministically by (track id,
 * point index).
 */
inline Association associate(const std::vector<Track>& tracks,
                             const std::vector<DetectionPoint>& points,
                             const TrackerConfig& cfg, const MeasurementModel& model) {
    struct Cand {
        double d2;
        int ti, pi, track_id;
    };
    std::vector<Cand> cands;
    for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti) {
        const Track& tr = tracks[ti];
        if (tr.status == TrackStatus::deleted) continue;
        std::optional<Eigen::MatrixXd> sinv;
        if (cfg.association == TrackerConfig::Metric::mahalanobis) {
            const Eigen::MatrixXd h = model.jacobian(tr.state);
            const Eigen::MatrixXd s = h * tr.covariance * h.transpose() + model.noise(cfg);
            Eigen::LLT<Eigen::MatrixXd> llt(s);
            if (llt.info() != Eigen::Success) continue;
            sinv = llt.solve(Eigen::MatrixXd::Identity(model.dim(), model.dim()));
        }
        for (int pi = 0; pi < static_cast<int>(points.size()); ++pi) {
            double d2;
            if (cfg.association == TrackerConfig::Metric::mahalanobis) {
                Eigen::VectorXd nu = model.measurement(points[pi]) - model.h(tr.state);
                nu(1) = wrap_pi(nu(1));
                d2 = nu.dot(*sinv * nu);
            } else {
                Vec2 pos;
                try {
                    pos = model.to_cartesian(points[pi]);
                } catch (const Error&) {
                    continue;  // on-baseline point: not assignable in Euclidean mode
                }
                d2 = (pos - tr.position()).norm();
            }
            if (d2 <= cfg.gate_threshold) cands.push_back({d2, ti, pi, tr.id});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.track_id != b.track_id) return a.track_id < b.track_id;
        return a.pi < b.pi;
    });
    Association out;
    std::vector<char> track_used(tracks.size(), 0), point_used(points.size(), 0);
    for (const auto& c : cands) {
        if (track_used[c.ti] || point_used[c.pi]) continue;
        track_used[c.ti] = point_used[c.pi] = 1;
        out.pairs.emplace_back(c.ti, c.pi);
    }
    for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti)
        if (!track_used[ti] && tracks[ti].status != TrackStatus::deleted)
            out.unassigned_tracks.push_back(ti);
    for (int pi = 0; pi < static_cast<int>(points.size()); ++pi)
        if (!point_used[pi]) out.unassigned_points.push_back(pi);
    return out;
}

/**
 * @brief Full track lifecycle over successive detection windows.
 *
 * Per step: predict all live tracks, associate, update assigned tracks,
 * coast unassigned ones (deleted after max_misses consecutive misses or a
 * failed M-of-N confirmation window), and spawn tentative tracks from
 * SNR-weighted clusters of unassigned points collected over the last few
 * windows. Track ids are never reused.
 */
class Tracker {
  public:
    Tracker(TrackerConfig cfg, MeasurementModel model)
        : cfg_(std::move(cfg)), model_(std::move(model)) {
        cfg_.validate();
        model_.use_doppler = cfg_.use_doppler;
    }

    struct StepResult {
        bool motion_presence = false;
        int spawned = 0;
        int dropped_degenerate_points = 0;
    };

    StepResult step(const std::vector<DetectionPoint>& points, double timestamp) {
        StepResult result;
        const double dt = last_timestamp_ ? timestamp - *last_timestamp_ : 0.0;
        last_timestamp_ = timestamp;

        // 1. Predict.
        if (dt > 0.0)
            for (auto& tr : tracks_)
                if (tr.status != TrackStatus::deleted)
                    tr = ekf_predict(std::move(tr), dt, cfg_.process_noise_psd);

        // 2. Associate.
        const Association assoc = associate(tracks_, points, cfg_, model_);

        // 3. Update assigned tracks.
        std::vector<char> assigned(tracks_.size(), 0);
        for (const auto& [ti, pi] : assoc.pairs) {
            Track& tr = tracks_[ti];
            if (ekf_update(tr, points[pi], model_, cfg_)) {
                assigned[ti] = 1;
                ++tr.hits;
                tr.misses = 0;
                push_outcome(tr, true);
            }
        }

        // 4. Coast / age / delete.
        for (size_t ti = 0; ti < tracks_.size(); ++ti) {
            Track& tr = tracks_[ti];
            if (tr.status == TrackStatus::deleted) continue;
            ++tr.age;
            if (!assigned[ti]) {
                ++tr.misses;
                push_outcome(tr, false);
            }
            const int hits_in_window =
                static_cast<int>(std::count(tr.recent.begin(), tr.recent.end(), true));
            if (tr.status == TrackStatus::tentative && hits_in_window >= cfg_.confirm_m)
                tr.status = TrackStatus::confirmed;
            if (tr.misses >= cfg_.max_misses)
                tr.status = TrackStatus::deleted;
            else if (tr.status == TrackStatus::tentative && tr.age >= cfg_.confirm_n &&
                     hits_in_window < cfg_.confirm_m)
                tr.status = TrackStatus::deleted;
            tr.history.push_back({timestamp, tr.state, tr.status});
        }

        // 5. Spawn from unassigned points (multi-window SNR-weighted clusters).
        std::vector<PendingPoint> fresh;
        for (int pi : assoc.unassigned_points) {
            PendingPoint pp;
            pp.point = points[pi];
            try {
                pp.position = model_.to_cartesian(points[pi]);
            } catch (const Error&) {
                ++result.dropped_degenerate_points;  // on-baseline: no position
                continue;
            }
            fresh.push_back(pp);
        }
        result.spawned = spawn_tracks(fresh, timestamp);
        pending_.push_back(std::move(fresh));
        while (static_cast<int>(pending_.size()) > cfg_.init_windows) pending_.pop_front();

        for (const auto& tr : tracks_)
            if (tr.status != TrackStatus::deleted) result.motion_presence = true;
        motion_history_.emplace_back(timestamp, result.motion_presence);
        return result;
    }

    const std::vector<Track>& tracks() const { return tracks_; }
    const std::vector<std::pair<double, bool>>& motion_history() const {
        return motion_history_;
    }

  private:
    struct PendingPoint {
        DetectionPoint point;
        Vec2 position;
        bool consumed = false;
    };

    void push_outcome(Track& tr, bool hit) {
        tr.recent.push_back(hit);
        while (static_cast<int>(tr.recent.size()) > cfg_.confirm_n) tr.recent.pop_front();
    }

    int spawn_tracks(std::vector<PendingPoint>& fresh, double timestamp) {
        // Candidate pool: current window plus the retained recent windows.
        std::vector<PendingPoint*> pool;
        for (auto& w : pending_)
            for (auto& pp : w)
                if (!pp.consumed) pool.push_back(&pp);
        for (auto& pp : fresh) pool.push_back(&pp);

        // Seeds are current-window points, strongest SNR first.
        std::vector<PendingPoint*> seeds;
        for (auto& pp : fresh) seeds.push_back(&pp);
        std::sort(seeds.begin(), seeds.end(), [](const PendingPoint* a, const PendingPoint* b) {
            return a->point.snr_db > b->point.snr_db;
        });

        int spawned = 0;
        for (PendingPoint* seed : seeds) {
            if (seed->consumed) continue;
            std::vector<PendingPoint*> members;
            for (PendingPoint* pp : pool)
                if (!pp->consumed &&
                    (pp->position - seed->position).norm() <= cfg_.init_cluster_radius)
                    members.push_back(pp);
            // SNR-weighted position and Doppler.
            double wsum = 0.0, fd = 0.0;
            Vec2 pos{0.0, 0.0};
            for (PendingPoint* pp : members) {
                const double w = power_from_db(pp->point.snr_db);
                wsum += w;
                pos += pp->position * w;
                fd += pp->point.doppler * w;
            }
            if (wsum <= 0.0) continue;
            pos = pos * (1.0 / wsum);
            fd /= wsum;
            for (PendingPoint* pp : members) pp->consumed = true;

            Track tr;
            tr.id = next_id_++;
            tr.state.setZero();
            tr.state(0) = pos.x;
            tr.state(1) = pos.y;
            // Velocity from the signed Doppler projected on the bistatic
            // range-sum gradient; acceleration starts at zero.
            const Vec2 g = (pos - model_.geom.tx).normalized() +
                           (pos - model_.geom.rx).normalized();
            const double g2 = g.dot(g);
            if (g2 > 1e-12) {
                const Vec2 v = g * (-model_.wavelength * fd / g2);
                tr.state(2) = v.x;
                tr.state(3) = v.y;
            }
            tr.covariance = Mat6::Zero();
            tr.covariance(0, 0) = tr.covariance(1, 1) = cfg_.init_pos_var;
            tr.covariance(2, 2) = tr.covariance(3, 3) = cfg_.init_vel_var;
            tr.covariance(4, 4) = tr.covariance(5, 5) = cfg_.init_acc_var;
            tr.status = TrackStatus::tentative;
            tr.hits = 1;
            tr.age = 1;
            tr.recent.push_back(true);
            tr.history.push_back({timestamp, tr.state, tr.status});
            tracks_.push_back(std::move(tr));
            ++spawned;
        }
        return spawned;
    }

    TrackerConfig cfg_;
    MeasurementModel model_;
    std::vector<Track> tracks_;
    std::deque<std::vector<PendingPoint>> pending_;
    std::vector<std::pair<double, bool>> motion_history_;
    std::optional<double> last_timestamp_;
    int next_id_ = 1;
};

/// One lifecycle step over a fresh tracker-owned state; spec-level convenience
/// mirroring Tracker::step.
inline Tracker::StepResult step_tracker(Tracker& tracker,
                                        const std::vector<DetectionPoint>& points,
                                        double timestamp) {
    return tracker.step(points, timestamp);
}

}  // namespace bisense
