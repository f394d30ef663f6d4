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
#include <string>
#include <vector>

#include "channel.hpp"
#include "common.hpp"
#include "fft.hpp"

namespace bisense {

/// Measured CSI for one transmit antenna: (rx channel, subcarrier, symbol),
/// symbol index fastest.
struct CsiSeries {
    int num_channels = 0;
    int num_subcarriers = 0;
    int num_symbols = 0;
    WaveformConfig waveform;
    ArrayConfig array;
    std::vector<cplx> data;

    size_t index(int ch, int j, int k) const {
        return (static_cast<size_t>(ch) * num_subcarriers + j) * num_symbols + k;
    }
    cplx& at(int ch, int j, int k) { return data[index(ch, j, k)]; }
    const cplx& at(int ch, int j, int k) const { return data[index(ch, j, k)]; }

    static CsiSeries from_tensor(const CfrTensor& t, int tx_index = 0) {
        require(tx_index >= 0 && tx_index < t.num_tx, errc::invalid_argument,
                "tx_index out of range");
        CsiSeries s;
        s.num_channels = t.num_rx;
        s.num_subcarriers = t.num_subcarriers;
        s.num_symbols = t.num_symbols;
        s.waveform = t.waveform;
        s.array = t.array;
        const size_t block = static_cast<size_t>(t.num_rx) * t.num_subcarriers * t.num_symbols;
        s.data.assign(t.data.begin() + tx_index * block,
                      t.data.begin() + (tx_index + 1) * block);
        return s;
    }
};

enum class CleanMethod { cacc_raw, cacc_variant, casr, single_antenna };

inline const char* to_string(CleanMethod m) {
    switch (m) {
        case CleanMethod::cacc_raw: return "cacc_raw";
        case CleanMethod::cacc_variant: return "cacc_variant";
        case CleanMethod::casr: return "casr";
        case CleanMethod::single_antenna: return "single_antenna";
    }
    return "?";
}

inline CleanMethod clean_method_from_string(const std::string& s) {
    if (s == "cacc_raw") return CleanMethod::cacc_raw;
    if (s == "cacc_variant") return CleanMethod::cacc_variant;
    if (s == "casr") return CleanMethod::casr;
    if (s == "single_antenna") return CleanMethod::single_antenna;
    fail(errc::invalid_config, "unknown cleaning method '" + s + "'");
}

/**
 * @brief Phase-cleaned CSI. Channels are antenna indices (conjugate-product
 *        methods) or a single virtual channel (CASR, single-antenna).
 *
 * `linear_in_paths` marks whether the values remain a linear superposition of
 * path components; the delay/AoA extractors refuse nonlinear series.
 */
struct CleanedSeries {
    CleanMethod method = CleanMethod::cacc_raw;
    int reference = 0;         // reference antenna (or denominator/tap descriptor)
    int num_channels = 0;
    int num_subcarriers = 0;
    int num_symbols = 0;
    WaveformConfig waveform;
    ArrayConfig array;
    bool linear_in_paths = true;
    bool spatially_coherent = true;  // channels follow the rx array phase progression
    int masked_samples = 0;          // CASR denominator-guard interpolations
    std::vector<cplx> data;          // (channel, subcarrier, symbol), symbol fastest

    size_t index(int ch, int j, int k) const {
        return (static_cast<size_t>(ch) * num_subcarriers + j) * num_symbols + k;
    }
    cplx& at(int ch, int j, int k) { return data[index(ch, j, k)]; }
    const cplx& at(int ch, int j, int k) const { return data[index(ch, j, k)]; }
};

namespace detail {

inline CleanedSeries make_cleaned(const CsiSeries& csi, CleanMethod method, int channels) {
    CleanedSeries out;
    out.method = method;
    out.num_channels = channels;
    out.num_subcarriers = csi.num_subcarriers;
    out.num_symbols = csi.num_symbols;
    out.waveform = csi.waveform;
    out.array = csi.array;
    out.data.assign(static_cast<size_t>(channels) * csi.num_subcarriers * csi.num_symbols,
                    cplx{0.0, 0.0});
    return out;
}

}  // namespace detail

/**
 * @brief Raw cross-antenna cross-correlation: channel i = H_i .* conj(H_ref).
 *
 * The common random-phase prefactor cancels exactly. Because the conjugated
 * static components of the reference also beat against the moving paths, the
 * output carries mirror Doppler components at -f_D; downstream consumers must
 * expect them.
 */
inline CleanedSeries cacc_raw(const CsiSeries& csi, int ref_antenna = 0) {
    require(csi.num_channels >= 2, errc::unsupported_method, "cacc_raw needs >= 2 rx antennas");
    require(ref_antenna >= 0 && ref_antenna < csi.num_channels, errc::invalid_argument,
            "reference antenna out of range");
    CleanedSeries out = detail::make_cleaned(csi, CleanMethod::cacc_raw, csi.num_channels);
    out.reference = ref_antenna;
    for (int ch = 0; ch < csi.num_channels; ++ch)
        for (int j = 0; j < csi.num_subcarriers; ++j) {
            const cplx* a = &csi.data[csi.index(ch, j, 0)];
            const cplx* r = &csi.data[csi.index(ref_antenna, j, 0)];
            cplx* o = &out.data[out.index(ch, j, 0)];
            for (int k = 0; k < csi.num_symbols; ++k) o[k] = a[k] * std::conj(r[k]);
        }
    return out;
}

/**
 * @brief Mirror-suppressing CACC variant (requires >= 3 rx antennas).
 *
 * Per subcarrier: form conjugate products against a reference antenna, remove
 * the temporal mean (static estimate), then project the per-symbol vector
 * across antennas onto the orthogonal complement of the estimated static
 * cross-term vector. The mirror term static_i * conj(dyn_ref) lies exactly
 * along that vector, so the projection removes it while keeping the transform
 * linear in the remaining path components.
 */
inline CleanedSeries cacc_variant(const CsiSeries& csi, int ref_antenna = 0,
                                  double min_static_ratio = 1e-2) {
    require(csi.num_channels >= 3, errc::unsupported_method,
            "cacc_variant needs >= 3 rx antennas");
    require(ref_antenna >= 0 && ref_antenna < csi.num_channels, errc::invalid_argument,
            "reference antenna out of range");
    const int nc = csi.num_channels, nj = csi.num_subcarriers, nk = csi.num_symbols;
    CleanedSeries out = detail::make_cleaned(csi, CleanMethod::cacc_variant, nc);
    out.reference = ref_antenna;

    std::vector<cplx> stat(nc);  // per-subcarrier static cross-term estimate
    std::vector<const cplx*> rows(nc);
    std::vector<cplx*> orows(nc);
    double cross_static = 0.0;   // static power on channels other than ref
    double cross_residual = 0.0;
    for (int j = 0; j < nj; ++j) {
        const cplx* ref = &csi.data[csi.index(ref_antenna, j, 0)];
        for (int ch = 0; ch < nc; ++ch) {
            rows[ch] = &csi.data[csi.index(ch, j, 0)];
            orows[ch] = &out.data[out.index(ch, j, 0)];
            cplx m{0.0, 0.0};
            for (int k = 0; k < nk; ++k) {
                const cplx c = rows[ch][k] * std::conj(ref[k]);
                orows[ch][k] = c;
                m += c;
            }
            stat[ch] = m / static_cast<double>(nk);
        }
        double s2 = 0.0;
        for (int ch = 0; ch < nc; ++ch) s2 += std::norm(stat[ch]);
        for (int ch = 0; ch < nc; ++ch)
            for (int k = 0; k < nk; ++k) orows[ch][k] -= stat[ch];
        for (int ch = 0; ch < nc; ++ch) {
            if (ch == ref_antenna) continue;
            cross_static += std::norm(stat[ch]);
            for (int k = 0; k < nk; ++k) cross_residual += std::norm(orows[ch][k]);
        }
        if (s2 <= 0.0) continue;  // nothing static on this subcarrier
        for (int k = 0; k < nk; ++k) {
            cplx g{0.0, 0.0};
            for (int ch = 0; ch < nc; ++ch) g += std::conj(stat[ch]) * orows[ch][k];
            g /= s2;
            for (int ch = 0; ch < nc; ++ch) orows[ch][k] -= stat[ch] * g;
        }
    }
    // Degraded reference: the conjugate-product domain is prefactor-free, so a
    // healthy static (LOS) component must dominate there; if the estimated
    // statics on the non-reference channels are buried under the residual, the
    // projection direction is noise.
    cross_static /= static_cast<double>(nc - 1) * nj;
    cross_residual /= static_cast<double>(nc - 1) * nj * nk;
    require(cross_static > min_static_ratio * (cross_residual + 1e-300),
            errc::degraded_reference,
            "vanishing static component; cacc_variant reference unusable");
    return out;
}

/**
 * @brief Cross-antenna signal ratio: H_a ./ H_b per (subcarrier, symbol).
 *
 * Cancels the full prefactor including AGC, but the output is a Moebius-type
 * function of the path components, so it is flagged non-linear and refused by
 * the delay/AoA extractors. Samples whose denominator magnitude falls below
 * 1e-8 x median are masked and linearly interpolated over time.
 */
inline CleanedSeries casr(const CsiSeries& csi, int antenna_a = 1, int antenna_b = 0) {
    require(csi.num_channels >= 2, errc::unsupported_method, "casr needs >= 2 rx antennas");
    require(antenna_a != antenna_b && antenna_a >= 0 && antenna_b >= 0 &&
                antenna_a < csi.num_channels && antenna_b < csi.num_channels,
            errc::invalid_argument, "invalid antenna pair");
    const int nj = csi.num_subcarriers, nk = csi.num_symbols;
    CleanedSeries out = detail::make_cleaned(csi, CleanMethod::casr, 1);
    out.reference = antenna_b;
    out.linear_in_paths = false;
    out.spatially_coherent = false;

    // Median denominator magnitude over the window sets the guard.
    std::vector<double> mags;
    mags.reserve(static_cast<size_t>(nj) * nk);
    for (int j = 0; j < nj; ++j) {
        const cplx* b = &csi.data[csi.index(antenna_b, j, 0)];
        for (int k = 0; k < nk; ++k) mags.push_back(std::abs(b[k]));
    }
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    const double eps_div = 1e-8 * mags[mags.size() / 2];

    std::vector<char> masked(nk);
    for (int j = 0; j < nj; ++j) {
        const cplx* a = &csi.data[csi.index(antenna_a, j, 0)];
        const cplx* b = &csi.data[csi.index(antenna_b, j, 0)];
        cplx* o = &out.data[out.index(0, j, 0)];
        std::fill(masked.begin(), masked.end(), 0);
        int nmask = 0;
        for (int k = 0; k < nk; ++k) {
            if (std::abs(b[k]) < eps_div) {
                masked[k] = 1;
                ++nmask;
                o[k] = cplx{0.0, 0.0};
            } else {
                o[k] = a[k] / b[k];
            }
        }
        if (nmask == 0) continue;
        require(nmask < nk, errc::degraded_reference, "casr denominator vanished everywhere");
        out.masked_samples += nmask;
        // Linear interpolation in time across masked runs.
        int k = 0;
        while (k < nk) {
            if (!masked[k]) { ++k; continue; }
            int end = k;
            while (end < nk && masked[end]) ++end;
            const int lo = k - 1, hi = end;
            for (int m = k; m < end; ++m) {
                if (lo < 0) o[m] = o[hi];
                else if (hi >= nk) o[m] = o[lo];
                else {
                    const double w = static_cast<double>(m - lo) / (hi - lo);
                    o[m] = o[lo] * (1.0 - w) + o[hi] * w;
                }
            }
            k = end;
        }
    }
    return out;
}

/**
 * @brief Single-antenna reference cleaning from the delay domain.
 *
 * Per symbol, an IDFT across subcarriers yields a delay profile; the dominant
 * tap (strongest mean power over the first 10 symbols) provides a unit phasor
 * tracking the common TO/CFO phase, which is conjugated away:
 * out = H .* conj(r_k). Removes the random phase up to a constant.
 */
inline CleanedSeries single_antenna_clean(const CsiSeries& csi, int antenna = 0,
                                          double min_tap_dominance_db = 6.0) {
    require(csi.num_subcarriers >= 16, errc::unsupported_method,
            "single_antenna_clean needs >= 16 subcarriers to resolve the reference tap");
    require(antenna >= 0 && antenna < csi.num_channels, errc::invalid_argument,
            "antenna out of range");
    const int nj = csi.num_subcarriers, nk = csi.num_symbols;
    CleanedSeries out = detail::make_cleaned(csi, CleanMethod::single_antenna, 1);
    out.reference = antenna;
    out.spatially_coherent = false;

    // Delay profiles for all symbols of the chosen antenna.
    std::vector<cplx> spectrum(nj), profile(nj);
    std::vector<std::vector<cplx>> profiles(nk);
    std::vector<double> tap_power(nj, 0.0);
    const int avg_symbols = std::min(10, nk);
    for (int k = 0; k < nk; ++k) {
        for (int j = 0; j < nj; ++j) spectrum[j] = csi.at(antenna, j, k);
        Fft::backward(spectrum.data(), profile.data(), nj);
        profiles[k] = profile;
        if (k < avg_symbols)
            for (int j = 0; j < nj; ++j) tap_power[j] += std::norm(profile[j]);
    }
    int tap = 0;
    for (int j = 1; j < nj; ++j)
        if (tap_power[j] > tap_power[tap]) tap = j;
    double rest = 0.0;
    for (int j = 0; j < nj; ++j)
        if (j != tap) rest += tap_power[j];
    rest /= std::max(1, nj - 1);
    require(rest <= 0.0 || tap_power[tap] > power_from_db(min_tap_dominance_db) * rest,
            errc::unreliable_reference, "dominant delay tap below SNR threshold");

    for (int k = 0; k < nk; ++k) {
        const cplx tap_val = profiles[k][tap];
        require(std::abs(tap_val) > 0.0, errc::unreliable_reference,
                "reference tap vanished on a symbol");
        const cplx phasor = std::conj(tap_val / std::abs(tap_val));
        for (int j = 0; j < nj; ++j) out.at(0, j, k) = csi.at(antenna, j, k) * phasor;
    }
    return out;
}

/// Dispatch helper used by the pipeline.
inline CleanedSeries clean(const CsiSeries& csi, CleanMethod method, int reference = 0) {
    switch (method) {
        case CleanMethod::cacc_raw: return cacc_raw(csi, reference);
        case CleanMethod::cacc_variant: return cacc_variant(csi, reference);
        case CleanMethod::casr: return casr(csi, reference == 0 ? 1 : 0, reference);
        case CleanMethod::single_antenna: return single_antenna_clean(csi, reference);
    }
    fail(errc::unsupported_method, "unknown cleaning method");
}

}  // namespace bisense
