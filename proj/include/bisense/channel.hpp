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

#include <algorithm>
#include <random>
#include <vector>

#include "common.hpp"
#include "scene.hpp"

namespace bisense {

/**
 * @brief Clock-asynchronism and gain impairments applied as the per-symbol
 *        multiplicative prefactor of the channel model.
 *
 * - AGC gain beta_k: first-order random walk, 1% step std, clamped to [0.5, 2].
 * - Timing offset: i.i.d. uniform over +/- 0.5/(N*spacing) per symbol
 *   (post-sync residual regime).
 * - CFO: constant per run.
 * - Hardware phase: one constant draw per (tx, rx) antenna pair.
 */
struct ImpairmentConfig {
    bool agc = true;
    double agc_step_std = 0.01;
    double agc_min = 0.5;
    double agc_max = 2.0;
    bool timing_offset = true;
    double cfo_hz = 50.0;
    bool hw_phase = true;
    uint64_t seed = 1;

    static ImpairmentConfig disabled(uint64_t seed = 0) {
        ImpairmentConfig c;
        c.agc = false;
        c.timing_offset = false;
        c.cfo_hz = 0.0;
        c.hw_phase = false;
        c.seed = seed;
        return c;
    }
};

/// Concrete impairment sequences drawn from a seed; kept so tests can verify
/// the synthesized tensor factor by factor.
struct ImpairmentRealization {
    std::vector<double> agc_gain;       // beta_k per symbol
    std::vector<double> timing_offset;  // seconds, per symbol
    double cfo_hz = 0.0;
    std::vector<double> hw_phase;       // rad, per (it * num_rx + ir)
    uint64_t seed = 0;
};

inline ImpairmentRealization draw_impairments(const ImpairmentConfig& cfg,
                                              const WaveformConfig& wf, const ArrayConfig& array,
                                              int num_symbols) {
    ImpairmentRealization r;
    r.seed = cfg.seed;
    r.cfo_hz = cfg.cfo_hz;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uphase(0.0, kTwoPi);
    // One draw per tx chain, shared across rx antennas: pair-wise cleaning then
    // cancels the hardware phase exactly (rx-side phase-calibrated array).
    r.hw_phase.resize(static_cast<size_t>(array.num_tx) * array.num_rx, 0.0);
    if (cfg.hw_phase)
        for (int it = 0; it < array.num_tx; ++it) {
            const double p = uphase(rng);
            for (int ir = 0; ir < array.num_rx; ++ir)
                r.hw_phase[static_cast<size_t>(it) * array.num_rx + ir] = p;
        }

    const double to_max = 0.5 / (wf.num_subcarriers * wf.subcarrier_spacing);
    std::uniform_real_distribution<double> uto(-to_max, to_max);
    std::normal_distribution<double> step(0.0, cfg.agc_step_std);

    r.agc_gain.resize(num_symbols, 1.0);
    r.timing_offset.resize(num_symbols, 0.0);
    double beta = 1.0;
    for (int k = 0; k < num_symbols; ++k) {
        if (cfg.agc) {
            beta = std::clamp(beta + step(rng), cfg.agc_min, cfg.agc_max);
            r.agc_gain[k] = beta;
        }
        if (cfg.timing_offset) r.timing_offset[k] = uto(rng);
    }
    return r;
}

/**
 * @brief Complex channel frequency response indexed (tx, rx, subcarrier, symbol),
 *        symbol index fastest. This matches the on-disk export layout exactly.
 */
struct CfrTensor {
    int num_tx = 0;
    int num_rx = 0;
    int num_subcarriers = 0;
    int num_symbols = 0;
    WaveformConfig waveform;
    ArrayConfig array;
    uint64_t seed = 0;
    std::vector<cplx> data;

    size_t index(int it, int ir, int j, int k) const {
        return ((static_cast<size_t>(it) * num_rx + ir) * num_subcarriers + j) *
                   num_symbols + k;
    }
    cplx& at(int it, int ir, int j, int k) { return data[index(it, ir, j, k)]; }
    const cplx& at(int it, int ir, int j, int k) const { return data[index(it, ir, j, k)]; }
    size_t size() const { return data.size(); }
};

namespace detail {

/// Per-path coefficients that do not vary with subcarrier: gain x AoA x AoD.
inline cplx spatial_factor(const PathComponent& p, const WaveformConfig& wf,
                           const ArrayConfig& array, int it, int ir) {
    const double fc_over_c = wf.carrier_frequency / wf.propagation_speed;
    const double aoa_phase = -kTwoPi * fc_over_c * ir * array.effective_rx_spacing(wf) *
                             std::sin(p.aoa);
    const double aod_phase = -kTwoPi * fc_over_c * it * array.effective_tx_spacing(wf) *
                             std::sin(p.aod);
    return std::polar(1.0, aoa_phase + aod_phase);
}

}  // namespace detail

/**
 * @brief Synthesize the impaired CFR tensor for a fixed list of path components.
 *
 * Implements the full product-sum channel model: per (tx, rx, subcarrier j,
 * symbol k),
 *
 *   H = beta_k * exp(-j[2pi(df_j*TO_k + CFO*k*Ts) + phi_(it,ir)])
 *       * sum_l gain_l * exp(-j*2pi*df_j*tau_l) * exp(-j*2pi*fD_l*k*Ts)
 *              * exp(-j*2pi*(fc/c)*ir*dr*sin(aoa_l)) * exp(-j*2pi*(fc/c)*it*dt*sin(aod_l))
 *
 * Deterministic for a given realization.
 */
inline CfrTensor synthesize_cfr(const std::vector<PathComponent>& paths,
                                const WaveformConfig& wf, const ArrayConfig& array,
                                const ImpairmentRealization& imp, int num_symbols) {
    wf.validate();
    array.validate();
    require(!paths.empty(), errc::invalid_argument, "path list is empty");
    require(num_symbols >= 1, errc::invalid_argument, "num_symbols must be >= 1");
    require(static_cast<int>(imp.agc_gain.size()) >= num_symbols &&
                static_cast<int>(imp.timing_offset.size()) >= num_symbols &&
                imp.hw_phase.size() >= static_cast<size_t>(array.num_tx) * array.num_rx,
            errc::invalid_argument, "impairment realization shorter than tensor");
    for (const auto& p : paths)
        require(std::isfinite(p.delay) && std::isfinite(p.doppler) && std::isfinite(p.aoa) &&
                    std::isfinite(p.aod) && std::isfinite(p.gain.real()) &&
                    std::isfinite(p.gain.imag()) && p.delay >= 0.0,
                errc::invalid_argument, "non-finite or negative-delay path parameter");

    CfrTensor t;
    t.num_tx = array.num_tx;
    t.num_rx = array.num_rx;
    t.num_subcarriers = wf.num_subcarriers;
    t.num_symbols = num_symbols;
    t.waveform = wf;
    t.array = array;
    t.seed = imp.seed;
    t.data.assign(static_cast<size_t>(array.num_tx) * array.num_rx * wf.num_subcarriers *
                      num_symbols, cplx{0.0, 0.0});

    const size_t np = paths.size();
    const double ts = wf.symbol_interval;

    // Doppler factor per (path, symbol).
    std::vector<cplx> dop(np * num_symbols);
    for (size_t l = 0; l < np; ++l)
        for (int k = 0; k < num_symbols; ++k)
            dop[l * num_symbols + k] = std::polar(1.0, -kTwoPi * paths[l].doppler * k * ts);

    // Common phase-offset prefactor per (j, k); the per-pair hardware phase and
    // AGC gain are applied in the antenna loop below.
    std::vector<cplx> pref(static_cast<size_t>(wf.num_subcarriers) * num_symbols);
    for (int j = 0; j < wf.num_subcarriers; ++j) {
        const double dfj = wf.subcarrier_offset(j);
        for (int k = 0; k < num_symbols; ++k)
            pref[static_cast<size_t>(j) * num_symbols + k] = std::polar(
                imp.agc_gain[k],
                -kTwoPi * (dfj * imp.timing_offset[k] + imp.cfo_hz * k * ts));
    }

    std::vector<cplx> delay_fac(np);
    for (int it = 0; it < array.num_tx; ++it) {
        for (int ir = 0; ir < array.num_rx; ++ir) {
            const cplx hw = std::polar(1.0, -imp.hw_phase[static_cast<size_t>(it) * array.num_rx + ir]);
            std::vector<cplx> coeff(np);
            for (size_t l = 0; l < np; ++l)
                coeff[l] = paths[l].gain * detail::spatial_factor(paths[l], wf, array, it, ir);
            for (int j = 0; j < wf.num_subcarriers; ++j) {
                const double dfj = wf.subcarrier_offset(j);
                for (size_t l = 0; l < np; ++l)
                    delay_fac[l] = coeff[l] * std::polar(1.0, -kTwoPi * dfj * paths[l].delay);
                cplx* out = &t.data[t.index(it, ir, j, 0)];
                const cplx* pjk = &pref[static_cast<size_t>(j) * num_symbols];
                for (int k = 0; k < num_symbols; ++k) {
                    cplx sum{0.0, 0.0};
                    for (size_t l = 0; l < np; ++l) sum += delay_fac[l] * dop[l * num_symbols + k];
                    out[k] = hw * pjk[k] * sum;
                }
            }
        }
    }
    return t;
}

inline CfrTensor synthesize_cfr(const std::vector<PathComponent>& paths,
                                const WaveformConfig& wf, const ArrayConfig& array,
                                const ImpairmentConfig& cfg, int num_symbols) {
    return synthesize_cfr(paths, wf, array, draw_impairments(cfg, wf, array, num_symbols),
                          num_symbols);
}

/**
 * @brief Synthesize a full time-varying scene, re-evaluating the geometry every
 *        symbol.
 *
 * Motion enters through (a) the instantaneous excess delay / angles and (b) the
 * accumulated carrier phase 2pi*(PL(t_k) - PL(0))/lambda, which reduces exactly
 * to the constant-Doppler factor of the channel model when the path Doppler is
 * constant.
 */
inline CfrTensor simulate_scene(const Scene& scene, const WaveformConfig& wf,
                                const ArrayConfig& array, const ImpairmentConfig& cfg) {
    wf.validate();
    array.validate();
    scene.validate();
    const int num_symbols = static_cast<int>(std::floor(scene.duration / wf.symbol_interval));
    require(num_symbols >= 1, errc::invalid_config, "scene shorter than one symbol");
    const ImpairmentRealization imp = draw_impairments(cfg, wf, array, num_symbols);
    const BistaticGeometry geom = scene.geometry();
    const double lambda = wf.wavelength();
    const double ts = wf.symbol_interval;

    CfrTensor t;
    t.num_tx = array.num_tx;
    t.num_rx = array.num_rx;
    t.num_subcarriers = wf.num_subcarriers;
    t.num_symbols = num_symbols;
    t.waveform = wf;
    t.array = array;
    t.seed = imp.seed;
    t.data.assign(static_cast<size_t>(array.num_tx) * array.num_rx * wf.num_subcarriers *
                      num_symbols, cplx{0.0, 0.0});

    // Reference path lengths at t = 0 (targets only; statics never accumulate phase).
    std::vector<double> pl0(scene.targets.size());
    for (size_t i = 0; i < scene.targets.size(); ++i)
        pl0[i] = geom.path_length(apply_vitals(scene.targets[i], geom, 0.0));

    const int nj = wf.num_subcarriers;
    std::vector<PathComponent> paths;
    std::vector<cplx> dly;     // (path, subcarrier) delay factors at this symbol
    std::vector<cplx> to_fac;  // per-subcarrier timing-offset factor at this symbol
    std::vector<cplx> coeff;
    for (int k = 0; k < num_symbols; ++k) {
        const double tk = k * ts;
        paths = scene_to_paths(scene, wf, tk);
        const size_t np = paths.size();
        // Replace the per-path Doppler factor by the accumulated carrier phase.
        std::vector<cplx> carrier(np, cplx{1.0, 0.0});
        for (size_t i = 0; i < scene.targets.size(); ++i) {
            const double pl = geom.path_length(apply_vitals(scene.targets[i], geom, tk));
            carrier[1 + i] = std::polar(1.0, kTwoPi * (pl - pl0[i]) / lambda);
        }
        dly.assign(np * nj, cplx{});
        to_fac.assign(nj, cplx{});
        for (int j = 0; j < nj; ++j) {
            const double dfj = wf.subcarrier_offset(j);
            to_fac[j] = std::polar(1.0, -kTwoPi * dfj * imp.timing_offset[k]);
            for (size_t l = 0; l < np; ++l)
                dly[l * nj + j] = std::polar(1.0, -kTwoPi * dfj * paths[l].delay);
        }
        for (int it = 0; it < array.num_tx; ++it) {
            for (int ir = 0; ir < array.num_rx; ++ir) {
                const cplx hw =
                    std::polar(imp.agc_gain[k],
                               -(kTwoPi * imp.cfo_hz * k * ts +
                                 imp.hw_phase[static_cast<size_t>(it) * array.num_rx + ir]));
                coeff.assign(np, cplx{});
                for (size_t l = 0; l < np; ++l)
                    coeff[l] = paths[l].gain * carrier[l] *
                               detail::spatial_factor(paths[l], wf, array, it, ir);
                for (int j = 0; j < nj; ++j) {
                    cplx sum{0.0, 0.0};
                    for (size_t l = 0; l < np; ++l) sum += coeff[l] * dly[l * nj + j];
                    t.at(it, ir, j, k) = hw * to_fac[j] * sum;
                }
            }
        }
    }
    return t;
}

/// Add complex white Gaussian noise at the given SNR relative to the tensor's
/// mean sample power. Deterministic for a given seed.
inline void add_noise(CfrTensor& t, double snr_db, uint64_t seed) {
    require(!t.data.empty(), errc::invalid_argument, "empty tensor");
    double power = 0.0;
    for (const auto& v : t.data) power += std::norm(v);
    power /= static_cast<double>(t.data.size());
    if (power <= 0.0) return;  // nothing to scale noise against
    const double nvar = power / power_from_db(snr_db);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> n(0.0, std::sqrt(nvar / 2.0));
    for (auto& v : t.data) v += cplx{n(rng), n(rng)};
}

}  // namespace bisense
