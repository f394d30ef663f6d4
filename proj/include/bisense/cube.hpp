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

#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "clean.hpp"
#include "common.hpp"
#include "fft.hpp"

namespace bisense {

struct DelayGrid {
    double min = 0.0;     // s
    double max = 2e-6;    // s
    int count = 256;

    double at(int i) const { return min + (max - min) * i / (count - 1); }
    double step() const { return (max - min) / (count - 1); }
    std::vector<double> values() const {
        std::vector<double> v(count);
        for (int i = 0; i < count; ++i) v[i] = at(i);
        return v;
    }
    void validate() const {
        require(count >= 2 && max > min && min >= 0.0, errc::invalid_config,
                "invalid delay grid");
    }
};

/// Sliding-window configuration of the feature extractor. The Doppler
/// resolution is 1/length; the cube keeps `doppler_bins` bins centered on DC.
struct WindowConfig {
    double length = 2.0;  // s
    double step = 0.1;    // s
    int doppler_bins = 64;
    DelayGrid delay_grid;
    int aoa_bins = 64;
    // Loading factor (x trace(R)/dim). The channel snapshots are coherent, so
    // light loading lets the beamformer null its own off-grid signal; an
    // order-10 load keeps the residual extraction robust while the constraint
    // w^H a = 1 stays exact for any positive load.
    double diagonal_loading = 10.0;
    bool check_distortionless = true;

    void validate() const {
        require(length > 0 && step > 0 && step <= length, errc::invalid_config,
                "window step must satisfy 0 < step <= length");
        require(doppler_bins >= 1 && aoa_bins >= 2, errc::invalid_config,
                "doppler_bins/aoa_bins must be positive");
        delay_grid.validate();
    }
};

/**
 * @brief One window's Doppler-Delay-AoA feature cube.
 *
 * `residual` holds the beamformed complex output per bin; `power` is its
 * squared magnitude. Axis vectors carry physical scales (Hz, s, rad).
 */
struct FeatureCube {
    int nd = 0, nt = 0, na = 0;
    std::vector<double> power;      // (doppler, delay, aoa), aoa fastest
    std::vector<cplx> residual;
    std::vector<double> doppler_axis;  // Hz
    std::vector<double> delay_axis;    // s
    std::vector<double> aoa_axis;      // rad
    double window_timestamp = 0.0;     // s, window start
    double max_constraint_error = 0.0; // max |w^H a - 1| seen while building

    size_t index(int d, int t, int a) const {
        return (static_cast<size_t>(d) * nt + t) * na + a;
    }
    double power_at(int d, int t, int a) const { return power[index(d, t, a)]; }
    const cplx& residual_at(int d, int t, int a) const { return residual[index(d, t, a)]; }

    /// Doppler-AoA heatmap: maximum power over the delay axis.
    Eigen::MatrixXd doppler_aoa_heatmap() const {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nd, na);
        for (int d = 0; d < nd; ++d)
            for (int t = 0; t < nt; ++t)
                for (int a = 0; a < na; ++a)
                    h(d, a) = std::max(h(d, a), power[index(d, t, a)]);
        return h;
    }

    /// Argmax over all bins; returns (d, t, a).
    std::array<int, 3> argmax() const {
        size_t best = 0;
        for (size_t i = 1; i < power.size(); ++i)
            if (power[i] > power[best]) best = i;
        const int a = static_cast<int>(best % na);
        const int t = static_cast<int>((best / na) % nt);
        const int d = static_cast<int>(best / (static_cast<size_t>(na) * nt));
        return {d, t, a};
    }
};

/// Contiguous copy of one processing window: (channel, subcarrier, symbol).
struct WindowData {
    int num_channels = 0;
    int num_subcarriers = 0;
    int num_symbols = 0;
    double frame_interval = 0.0;  // s between symbols
    double t0 = 0.0;
    std::vector<cplx> data;

    size_t index(int ch, int j, int k) const {
        return (static_cast<size_t>(ch) * num_subcarriers + j) * num_symbols + k;
    }
    cplx& at(int ch, int j, int k) { return data[index(ch, j, k)]; }
    const cplx& at(int ch, int j, int k) const { return data[index(ch, j, k)]; }

    static WindowData slice(const CleanedSeries& s, int k0, int nk) {
        require(k0 >= 0 && k0 + nk <= s.num_symbols, errc::invalid_argument,
                "window outside series");
        WindowData w;
        w.num_channels = s.num_channels;
        w.num_subcarriers = s.num_subcarriers;
        w.num_symbols = nk;
        w.frame_interval = s.waveform.symbol_interval;
        w.t0 = k0 * s.waveform.symbol_interval;
        w.data.resize(static_cast<size_t>(nk) * s.num_channels * s.num_subcarriers);
        for (int ch = 0; ch < s.num_channels; ++ch)
            for (int j = 0; j < s.num_subcarriers; ++j) {
                const cplx* src = &s.data[s.index(ch, j, k0)];
                std::copy(src, src + nk, &w.data[w.index(ch, j, 0)]);
            }
        return w;
    }
};

/// Subtract the temporal mean per (channel, subcarrier) to suppress static
/// clutter. Requires at least two symbols.
inline void remove_static(WindowData& w) {
    require(w.num_symbols >= 2, errc::invalid_argument, "window needs >= 2 symbols");
    for (int ch = 0; ch < w.num_channels; ++ch)
        for (int j = 0; j < w.num_subcarriers; ++j) {
            cplx* row = &w.data[w.index(ch, j, 0)];
            cplx mean{0.0, 0.0};
            for (int k = 0; k < w.num_symbols; ++k) mean += row[k];
            mean /= static_cast<double>(w.num_symbols);
            for (int k = 0; k < w.num_symbols; ++k) row[k] -= mean;
        }
}

/// Doppler-resolved window: (channel, subcarrier, doppler bin), bin fastest,
/// zero bin centered at index num_symbols/2.
struct DopplerData {
    int num_channels = 0;
    int num_subcarriers = 0;
    int num_bins = 0;
    std::vector<cplx> data;
    std::vector<double> axis;  // Hz

    size_t index(int ch, int j, int m) const {
        return (static_cast<size_t>(ch) * num_subcarriers + j) * num_bins + m;
    }
    const cplx& at(int ch, int j, int m) const { return data[index(ch, j, m)]; }

    /// Power summed over channels and subcarriers per Doppler bin.
    std::vector<double> power_spectrum() const {
        std::vector<double> p(num_bins, 0.0);
        for (int ch = 0; ch < num_channels; ++ch)
            for (int j = 0; j < num_subcarriers; ++j)
                for (int m = 0; m < num_bins; ++m) p[m] += std::norm(at(ch, j, m));
        return p;
    }
};

/// Reject non-uniform sampling before transforming (resampling is out of scope
/// for the transform itself).
inline void check_uniform_timestamps(const std::vector<double>& ts, double tol = 1e-9) {
    for (size_t i = 2; i < ts.size(); ++i)
        require(std::abs((ts[i] - ts[i - 1]) - (ts[1] - ts[0])) < tol, errc::resample_required,
                "non-uniform symbol timestamps; resample before the Doppler transform");
}

/**
 * @brief Doppler transform of a window with a Hann taper.
 *
 * Correlates against the channel model's Doppler template exp(-j*2*pi*f*k*Ts),
 * so a path with Doppler +f peaks at +f on the axis. Output is scaled by
 * 1/sqrt(sum w^2): total output power equals N * sum|w x|^2 / sum(w^2)
 * (taper-compensated Parseval).
 */
inline DopplerData doppler_transform(const WindowData& w) {
    require(w.num_symbols >= 2, errc::invalid_argument, "window needs >= 2 symbols");
    const int n = w.num_symbols;
    const std::vector<double> taper = hann_window(n);
    double sum_w2 = 0.0;
    for (double v : taper) sum_w2 += v * v;
    const double scale = 1.0 / std::sqrt(sum_w2);

    DopplerData d;
    d.num_channels = w.num_channels;
    d.num_subcarriers = w.num_subcarriers;
    d.num_bins = n;
    d.data.resize(w.data.size());
    d.axis.resize(n);
    const double binw = 1.0 / (n * w.frame_interval);
    for (int m = 0; m < n; ++m) d.axis[m] = (m - n / 2) * binw;

    std::vector<cplx> in(n), out(n);
    for (int ch = 0; ch < w.num_channels; ++ch)
        for (int j = 0; j < w.num_subcarriers; ++j) {
            const cplx* row = &w.data[w.index(ch, j, 0)];
            for (int k = 0; k < n; ++k) in[k] = row[k] * taper[k];
            Fft::backward(in.data(), out.data(), n);
            cplx* dst = &d.data[d.index(ch, j, 0)];
            const int half = n / 2;
            for (int m = 0; m < n; ++m) dst[m] = out[(m + half) % n] * scale;
        }
    return d;
}

/// Delay steering matrix a_j(tau) = exp(-j*2*pi*df_j*tau), J x NT.
inline Eigen::MatrixXcd delay_steering(const WaveformConfig& wf,
                                       const std::vector<double>& delay_grid) {
    Eigen::MatrixXcd a(wf.num_subcarriers, static_cast<int>(delay_grid.size()));
    for (int j = 0; j < wf.num_subcarriers; ++j) {
        const double dfj = wf.subcarrier_offset(j);
        for (size_t t = 0; t < delay_grid.size(); ++t)
            a(j, static_cast<int>(t)) = std::polar(1.0, -kTwoPi * dfj * delay_grid[t]);
    }
    return a;
}

/// Spatial steering matrix e_i(theta) matching the channel model's AoA factor,
/// K x NA over a uniform sin(theta) grid covering [-1, 1).
inline Eigen::MatrixXcd aoa_steering(int num_channels, double spacing, double wavelength,
                                     int aoa_bins) {
    Eigen::MatrixXcd e(num_channels, aoa_bins);
    for (int a = 0; a < aoa_bins; ++a) {
        const double s = -1.0 + 2.0 * a / aoa_bins;
        for (int i = 0; i < num_channels; ++i)
            e(i, a) = std::polar(1.0, -kTwoPi * (spacing / wavelength) * i * s);
    }
    return e;
}

inline std::vector<double> aoa_axis_radians(int aoa_bins) {
    std::vector<double> axis(aoa_bins);
    for (int a = 0; a < aoa_bins; ++a) axis[a] = std::asin(-1.0 + 2.0 * a / aoa_bins);
    return axis;
}

/**
 * @brief Delay-domain MVDR over one Doppler slice.
 *
 * The subcarrier axis is the signal dimension, channels are snapshots:
 * R = X X^H / K + delta I with delta = loading * trace(X X^H / K) / J.
 * For each candidate delay, w = R^-1 a / (a^H R^-1 a), spectrum = 1/(a^H R^-1 a),
 * and the beamformed per-channel outputs y = w^H X feed the AoA stage. Uses the
 * Woodbury identity so the cost stays linear in J.
 */
struct MvdrResult {
    std::vector<double> spectrum;   // NT
    Eigen::MatrixXcd beamformed;    // K x NT, column t = w(tau_t)^H X per channel
    Eigen::MatrixXcd weights;       // J x NT (optional; empty unless requested)
    double max_constraint_error = 0.0;
};

inline MvdrResult delay_mvdr(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& steering,
                             double loading = 1e-3, bool check_distortionless = true,
                             bool store_weights = false) {
    const int nj = static_cast<int>(x.rows());
    const int nk = static_cast<int>(x.cols());
    const int nt = static_cast<int>(steering.cols());
    require(nk >= 2, errc::unsupported_method, "delay MVDR needs >= 2 channel snapshots");
    require(steering.rows() == nj, errc::invalid_argument, "steering/subcarrier mismatch");

    MvdrResult r;
    r.spectrum.assign(nt, 0.0);
    r.beamformed = Eigen::MatrixXcd::Zero(nk, nt);
    if (store_weights) r.weights = Eigen::MatrixXcd::Zero(nj, nt);

    const double tr = x.squaredNorm() / nk;  // trace(X X^H / K)
    if (tr <= 0.0) {
        // Degenerate all-zero slice: keep the distortionless convention with a
        // matched filter; the spectrum and beamformed outputs are zero.
        for (int t = 0; t < nt; ++t) {
            if (store_weights) r.weights.col(t) = steering.col(t) / static_cast<double>(nj);
        }
        return r;
    }
    const double delta = loading * tr / nj;
    Eigen::LDLT<Eigen::MatrixXcd> woodbury;
    Eigen::FullPivLU<Eigen::MatrixXcd> direct;
    if (delta > 0.0) {
        // Woodbury for R = delta I + X X^H / K:
        //   R^-1 v = (1/delta) [ v - X (K delta I + G)^-1 X^H v ],  G = X^H X
        Eigen::MatrixXcd kern = x.adjoint() * x;
        for (int i = 0; i < nk; ++i) kern(i, i) += nk * delta;
        woodbury.compute(kern);
        require(woodbury.info() == Eigen::Success, errc::singular_matrix,
                "rank-deficient covariance; increase diagonal loading");
    } else {
        direct.compute(x * x.adjoint() / static_cast<double>(nk));
        require(direct.isInvertible(), errc::singular_matrix,
                "rank-deficient covariance without diagonal loading");
    }

    const Eigen::MatrixXcd xa = x.adjoint() * steering;  // K x NT
    for (int t = 0; t < nt; ++t) {
        const Eigen::VectorXcd a = steering.col(t);
        Eigen::VectorXcd rinv_a;
        if (delta > 0.0) {
            const Eigen::VectorXcd q = woodbury.solve(xa.col(t));
            rinv_a = (a - x * q) / delta;
        } else {
            rinv_a = direct.solve(a);
        }
        const double denom = a.dot(rinv_a).real();  // a^H R^-1 a, real positive
        require(denom > 0.0 && std::isfinite(denom), errc::singular_matrix,
                "MVDR denominator collapsed");
        r.spectrum[t] = 1.0 / denom;
        const Eigen::VectorXcd w = rinv_a / denom;
        r.beamformed.col(t) = (x.adjoint() * w).conjugate();  // y_k = w^H x_k
        if (store_weights) r.weights.col(t) = w;
        if (check_distortionless) {
            const cplx c = w.dot(a);  // w^H a
            const double err = std::abs(c - cplx{1.0, 0.0});
            if (err > r.max_constraint_error) r.max_constraint_error = err;
        }
    }
    return r;
}

namespace detail {

template <typename Fn>
inline void parallel_for(int n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int nthreads = std::min(workers, n);
    std::vector<std::exception_ptr> errors(nthreads);
    for (int t = 0; t < nthreads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/**
 * @brief Build one feature cube from a prepared window.
 *
 * Composition (fixed order): static removal -> Doppler FFT -> per-Doppler delay
 * MVDR -> per-(Doppler, delay) AoA steering transform.
 */
inline FeatureCube build_cube_window(WindowData w, const WindowConfig& cfg,
                                     const WaveformConfig& wf, double rx_spacing) {
    cfg.validate();
    require(cfg.doppler_bins <= w.num_symbols, errc::invalid_config,
            "doppler_bins exceeds symbols per window");
    remove_static(w);
    const DopplerData dop = doppler_transform(w);

    FeatureCube cube;
    cube.nd = cfg.doppler_bins;
    cube.nt = cfg.delay_grid.count;
    cube.na = cfg.aoa_bins;
    cube.window_timestamp = w.t0;
    cube.power.assign(static_cast<size_t>(cube.nd) * cube.nt * cube.na, 0.0);
    cube.residual.assign(cube.power.size(), cplx{0.0, 0.0});
    const int m0 = w.num_symbols / 2 - cfg.doppler_bins / 2;
    cube.doppler_axis.assign(dop.axis.begin() + m0, dop.axis.begin() + m0 + cfg.doppler_bins);
    cube.delay_axis = cfg.delay_grid.values();
    cube.aoa_axis = aoa_axis_radians(cfg.aoa_bins);

    const Eigen::MatrixXcd a_delay = delay_steering(wf, cube.delay_axis);
    const Eigen::MatrixXcd e_aoa =
        aoa_steering(w.num_channels, rx_spacing, wf.wavelength(), cfg.aoa_bins);

    Eigen::MatrixXcd x(w.num_subcarriers, w.num_channels);
    for (int d = 0; d < cube.nd; ++d) {
        const int m = m0 + d;
        for (int ch = 0; ch < w.num_channels; ++ch)
            for (int j = 0; j < w.num_subcarriers; ++j) x(j, ch) = dop.at(ch, j, m);
        MvdrResult mv = delay_mvdr(x, a_delay, cfg.diagonal_loading, cfg.check_distortionless);
        cube.max_constraint_error = std::max(cube.max_constraint_error, mv.max_constraint_error);
        if (cfg.check_distortionless)
            require(mv.max_constraint_error < 1e-9, errc::numerical_conditioning,
                    "MVDR distortionless constraint violated");
        const Eigen::MatrixXcd spec = e_aoa.adjoint() * mv.beamformed;  // NA x NT
        for (int t = 0; t < cube.nt; ++t)
            for (int a = 0; a < cube.na; ++a) {
                const cplx v = spec(a, t);
                const size_t idx = cube.index(d, t, a);
                cube.residual[idx] = v;
                cube.power[idx] = std::norm(v);
            }
    }
    return cube;
}

/// Number of sliding windows available in a series under a config.
inline int window_count(const CleanedSeries& s, const WindowConfig& cfg) {
    const double fps = 1.0 / s.waveform.symbol_interval;
    const int wlen = static_cast<int>(std::lround(cfg.length * fps));
    const int wstep = std::max(1, static_cast<int>(std::lround(cfg.step * fps)));
    if (s.num_symbols < wlen) return 0;
    return (s.num_symbols - wlen) / wstep + 1;
}

/**
 * @brief Slide the window over the cleaned series and build all cubes.
 *
 * Refuses series whose cleaning method broke linearity (CASR) or spatial
 * coherence, and series with fewer than two channels. Windows are independent
 * and processed in parallel when workers > 1; ordering is deterministic.
 */
inline std::vector<FeatureCube> build_cube(const CleanedSeries& s, const WindowConfig& cfg,
                                           int workers = 1) {
    cfg.validate();
    require(s.linear_in_paths, errc::unsupported_method,
            "cleaning method is non-linear in path components; delay/AoA extraction refused");
    require(s.spatially_coherent && s.num_channels >= 2, errc::unsupported_method,
            "feature cube needs >= 2 spatially coherent channels");
    const double fps = 1.0 / s.waveform.symbol_interval;
    const int wlen = static_cast<int>(std::lround(cfg.length * fps));
    const int wstep = std::max(1, static_cast<int>(std::lround(cfg.step * fps)));
    const int n = window_count(s, cfg);
    require(n >= 1, errc::invalid_argument, "series shorter than one window");
    const double rx_spacing = s.array.effective_rx_spacing(s.waveform);

    std::vector<FeatureCube> cubes(n);
    detail::parallel_for(n, workers, [&](int i) {
        cubes[i] = build_cube_window(WindowData::slice(s, i * wstep, wlen), cfg, s.waveform,
                                     rx_spacing);
    });
    return cubes;
}

/// Doppler-profile spectrogram aggregated across windows at selected bins.
struct MicroDopplerGram {
    int num_windows = 0;
    int num_doppler = 0;
    std::vector<double> values;  // (window, doppler), doppler fastest
    std::vector<double> doppler_axis;
    std::vector<double> timestamps;
    std::vector<std::pair<int, int>> bin_provenance;  // (delay idx, aoa idx) per column

    double at(int w, int d) const { return values[static_cast<size_t>(w) * num_doppler + d]; }
};

using BinSelector = std::function<std::pair<int, int>(const FeatureCube&, int)>;

inline BinSelector fixed_bin_selector(int delay_idx, int aoa_idx) {
    return [=](const FeatureCube&, int) { return std::make_pair(delay_idx, aoa_idx); };
}

/// Selects the (delay, aoa) of the strongest bin per cube.
inline BinSelector strongest_bin_selector() {
    return [](const FeatureCube& c, int) {
        const auto idx = c.argmax();
        return std::make_pair(idx[1], idx[2]);
    };
}

inline MicroDopplerGram micro_doppler(const std::vector<FeatureCube>& cubes,
                                      const BinSelector& selector) {
    require(!cubes.empty(), errc::invalid_argument, "micro_doppler needs >= 1 cube");
    MicroDopplerGram g;
    g.num_windows = static_cast<int>(cubes.size());
    g.num_doppler = cubes.front().nd;
    g.doppler_axis = cubes.front().doppler_axis;
    g.values.assign(static_cast<size_t>(g.num_windows) * g.num_doppler, 0.0);
    for (int w = 0; w < g.num_windows; ++w) {
        const FeatureCube& c = cubes[w];
        auto [t, a] = selector(c, w);
        require(t >= 0 && t < c.nt && a >= 0 && a < c.na, errc::invalid_argument,
                "bin selector out of range");
        for (int d = 0; d < g.num_doppler; ++d)
            g.values[static_cast<size_t>(w) * g.num_doppler + d] = c.power_at(d, t, a);
        g.timestamps.push_back(c.window_timestamp);
        g.bin_provenance.emplace_back(t, a);
    }
    return g;
}

}  // namespace bisense
