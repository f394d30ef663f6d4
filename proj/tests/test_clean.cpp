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

#include "bisense/clean.hpp"
#include "bisense/cube.hpp"

using namespace bisense;

namespace {

WaveformConfig test_waveform(int subcarriers = 64, double fps = 200.0) {
    WaveformConfig wf;
    wf.carrier_frequency = 3.1e9;
    wf.num_subcarriers = subcarriers;
    wf.subcarrier_spacing = 20e6 / subcarriers;
    wf.symbol_interval = 1.0 / fps;
    wf.frames_per_second = fps;
    return wf;
}

Scene mover_scene(double vx = 0.6, double vy = 0.0) {
    Scene scene;
    scene.tx_position = {0.0, 0.0};
    scene.rx_position = {2.2, 0.0};
    scene.duration = 4.0;
    TargetState t;
    t.position = {0.5, 3.0};
    t.velocity = {vx, vy};
    t.reflect_gain = cplx{0.3, 0.0};
    scene.targets.push_back(t);
    return scene;
}

// Doppler power spectrum summed over channels/subcarriers after static removal.
std::vector<double> doppler_power(const CleanedSeries& s) {
    WindowData w = WindowData::slice(s, 0, s.num_symbols);
    remove_static(w);
    return doppler_transform(w).power_spectrum();
}

int axis_bin(const CleanedSeries& s, double freq) {
    const int n = s.num_symbols;
    const double binw = 1.0 / (n * s.waveform.symbol_interval);
    return n / 2 + static_cast<int>(std::lround(freq / binw));
}

int spectrum_argmax(const std::vector<double>& p, int exclude_center, int n) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
        if (std::abs(i - n / 2) <= exclude_center) continue;
        if (best < 0 || p[i] > p[best]) best = i;
    }
    return best;
}

}  // namespace

TEST_CASE("cacc_raw: static-only scene gives a time-constant phase") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 3;
    Scene scene = mover_scene();
    scene.targets.clear();  // static only
    scene.static_scatterers.push_back({{1.5, 2.0}, cplx{0.4, 0.2}});
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig{});
    auto cleaned = cacc_raw(CsiSeries::from_tensor(tensor), 0);
    for (int ch = 0; ch < cleaned.num_channels; ++ch)
        for (int j = 0; j < cleaned.num_subcarriers; j += 9) {
            const double ref = std::arg(cleaned.at(ch, j, 0));
            for (int k = 1; k < cleaned.num_symbols; k += 37)
                CHECK(std::abs(wrap_pi(std::arg(cleaned.at(ch, j, k)) - ref)) < 1e-9);
        }
}

TEST_CASE("cacc_raw: prefactor cancellation against the impairment-free oracle") {
    // Oracle: the same scene synthesized with phase impairments disabled. AGC is
    // held at 1 here because conjugate products keep the (real) beta_k^2 scale.
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 2;
    const Scene scene = mover_scene();
    ImpairmentConfig on;
    on.agc = false;
    on.timing_offset = true;
    on.cfo_hz = 50.0;
    on.hw_phase = true;
    on.seed = 7;
    auto dirty = simulate_scene(scene, wf, ar, on);
    auto clean_t = simulate_scene(scene, wf, ar, ImpairmentConfig::disabled(7));
    auto a = cacc_raw(CsiSeries::from_tensor(dirty), 0);
    auto b = cacc_raw(CsiSeries::from_tensor(clean_t), 0);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        num += std::norm(a.data[i] - b.data[i]);
        den += std::norm(b.data[i]);
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("cacc_raw: moving target shows mirror peaks at +fD and -fD") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 2;
    const Scene scene = mover_scene();
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig{});
    auto cleaned = cacc_raw(CsiSeries::from_tensor(tensor), 0);
    const auto paths = scene_to_paths(scene, wf, scene.duration / 2);
    const auto p = doppler_power(cleaned);
    const int bp = axis_bin(cleaned, paths[1].doppler);
    const int bm = axis_bin(cleaned, -paths[1].doppler);
    auto peak_near = [&](int bin) {
        double best = 0.0;
        for (int i = std::max(0, bin - 1); i <= std::min((int)p.size() - 1, bin + 1); ++i)
            best = std::max(best, p[i]);
        return best;
    };
    const double pp = peak_near(bp), pm = peak_near(bm);
    CHECK(pp > 0.0);
    CHECK(std::abs(db_from_power(pp / pm)) < 3.0);  // mirror within 3 dB
}

TEST_CASE("cacc_raw requires two antennas") {
    const WaveformConfig wf = test_waveform(16);
    ArrayConfig ar;
    ar.num_rx = 1;
    auto tensor = simulate_scene(mover_scene(), wf, ar, ImpairmentConfig{});
    CHECK_THROWS_AS(cacc_raw(CsiSeries::from_tensor(tensor), 0), Error);
}

TEST_CASE("cacc_variant: static-only scene gives near-zero output") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 3;
    Scene scene = mover_scene();
    scene.targets.clear();
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig::disabled(3));
    auto cleaned = cacc_variant(CsiSeries::from_tensor(tensor));
    double out_power = 0.0, in_power = 0.0;
    for (const auto& v : cleaned.data) out_power += std::norm(v);
    for (const auto& v : tensor.data) in_power += std::norm(v);
    CHECK(out_power < 1e-18 * in_power);
}

TEST_CASE("cacc_variant: mirror bin suppressed by >= 10 dB") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 3;
    const Scene scene = mover_scene();
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig{});
    auto cleaned = cacc_variant(CsiSeries::from_tensor(tensor));
    const auto paths = scene_to_paths(scene, wf, scene.duration / 2);
    const auto p = doppler_power(cleaned);
    const int bp = axis_bin(cleaned, paths[1].doppler);
    const int bm = axis_bin(cleaned, -paths[1].doppler);
    CHECK(db_from_power(p[bp] / p[bm]) >= 10.0);
    // Signed argmax lands on the true side.
    const int am = spectrum_argmax(p, 1, cleaned.num_symbols);
    CHECK(std::abs(am - bp) <= 1);
}

TEST_CASE("cacc_variant: identical Doppler argmax across impairment seeds") {
    // Constant-Doppler path list so the spectral line is bin-stable by design.
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 3;
    PathComponent los;
    PathComponent mover;
    mover.delay = 30e-9;
    mover.doppler = 11.5;
    mover.aoa = -0.5;
    mover.gain = cplx{0.3, 0.0};
    int argmax[2];
    for (int s = 0; s < 2; ++s) {
        ImpairmentConfig cfg;
        cfg.seed = 1000 + s;
        auto tensor = synthesize_cfr({los, mover}, wf, ar, cfg, 800);
        auto cleaned = cacc_variant(CsiSeries::from_tensor(tensor));
        argmax[s] = spectrum_argmax(doppler_power(cleaned), 1, cleaned.num_symbols);
    }
    CHECK(argmax[0] == argmax[1]);
}

TEST_CASE("cacc_variant preconditions and degraded reference") {
    const WaveformConfig wf = test_waveform(16);
    ArrayConfig two;
    two.num_rx = 2;
    auto tensor = simulate_scene(mover_scene(), wf, two, ImpairmentConfig{});
    CHECK_THROWS_AS(cacc_variant(CsiSeries::from_tensor(tensor)), Error);

    // Pure zero-mean noise: the static estimate vanishes relative to the
    // dynamics and the projection direction is meaningless.
    CsiSeries noise;
    noise.num_channels = 3;
    noise.num_subcarriers = 16;
    noise.num_symbols = 512;
    noise.waveform = wf;
    noise.array.num_rx = 3;
    noise.data.resize(3u * 16u * 512u);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : noise.data) v = cplx{n(rng), n(rng)};
    CHECK_THROWS_AS(cacc_variant(CsiSeries(noise)), Error);
}

TEST_CASE("casr: identical antennas give an all-ones output") {
    const WaveformConfig wf = test_waveform(16);
    ArrayConfig ar;
    ar.num_rx = 2;
    Scene scene = mover_scene();
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig{});
    // Duplicate antenna 0 onto antenna 1 to force identical signals.
    CsiSeries csi = CsiSeries::from_tensor(tensor);
    for (int j = 0; j < csi.num_subcarriers; ++j)
        for (int k = 0; k < csi.num_symbols; ++k) csi.at(1, j, k) = csi.at(0, j, k);
    auto r = casr(csi, 1, 0);
    for (const auto& v : r.data) CHECK(std::abs(v - cplx{1.0, 0.0}) < 1e-12);
}

TEST_CASE("casr: true Doppler without an equal-power mirror") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 2;
    const Scene scene = mover_scene();
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig{});
    auto cleaned = casr(CsiSeries::from_tensor(tensor), 1, 0);
    CHECK_FALSE(cleaned.linear_in_paths);
    const auto paths = scene_to_paths(scene, wf, scene.duration / 2);
    const auto p = doppler_power(cleaned);
    const int bp = axis_bin(cleaned, paths[1].doppler);
    const int am = spectrum_argmax(p, 1, cleaned.num_symbols);
    CHECK(std::abs(am - bp) <= 1);
    const int bm = axis_bin(cleaned, -paths[1].doppler);
    CHECK(db_from_power(p[bp] / p[bm]) > 3.0);  // clearly not a symmetric mirror
}

TEST_CASE("casr: denominator gain scaling leaves the ratio unchanged") {
    const WaveformConfig wf = test_waveform(16);
    ArrayConfig ar;
    ar.num_rx = 2;
    auto tensor = simulate_scene(mover_scene(), wf, ar, ImpairmentConfig{});
    CsiSeries csi = CsiSeries::from_tensor(tensor);
    auto base = casr(csi, 1, 0);
    for (int j = 0; j < csi.num_subcarriers; ++j)
        for (int k = 0; k < csi.num_symbols; ++k) {
            csi.at(0, j, k) *= 3.0;
            csi.at(1, j, k) *= 3.0;
        }
    auto scaled = casr(csi, 1, 0);
    for (size_t i = 0; i < base.data.size(); ++i)
        CHECK(std::abs(base.data[i] - scaled.data[i]) < 1e-12);
}

TEST_CASE("single_antenna_clean: no impairments means identity up to constant phase") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 1;
    Scene scene = mover_scene();
    scene.targets.clear();  // static scene: the reference tap phasor is constant
    scene.static_scatterers.push_back({{1.0, 2.5}, cplx{0.3, 0.1}});
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig::disabled());
    CsiSeries csi = CsiSeries::from_tensor(tensor);
    auto cleaned = single_antenna_clean(csi, 0);
    const cplx c0 = cleaned.at(0, 3, 0) / csi.at(0, 3, 0);
    for (int j = 0; j < csi.num_subcarriers; j += 11)
        for (int k = 0; k < csi.num_symbols; k += 53) {
            const cplx c = cleaned.at(0, j, k) / csi.at(0, j, k);
            CHECK(std::abs(c - c0) < 1e-9);
        }
}

TEST_CASE("single_antenna_clean: mover argmax at the ground-truth signed bin") {
    // The mover must sit outside the reference delay tap; with 20 MHz that
    // means several hundred ns of excess delay (narrowband in-tap movers
    // mirror, as the method's bandwidth constraint implies).
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 1;
    PathComponent los;
    PathComponent mover;
    mover.delay = 400e-9;
    mover.doppler = 11.5;
    mover.gain = cplx{0.3, 0.0};
    auto tensor = synthesize_cfr({los, mover}, wf, ar, ImpairmentConfig{}, 800);
    auto cleaned = single_antenna_clean(CsiSeries::from_tensor(tensor), 0);
    const auto p = doppler_power(cleaned);
    const int bp = axis_bin(cleaned, mover.doppler);
    const int am = spectrum_argmax(p, 1, cleaned.num_symbols);
    CHECK(std::abs(am - bp) <= 1);
}

TEST_CASE("single_antenna_clean: 50 Hz CFO residual drift below 1%") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 1;
    Scene scene = mover_scene();
    scene.targets.clear();  // static scene isolates the common drift
    ImpairmentConfig cfg = ImpairmentConfig::disabled(5);
    cfg.cfo_hz = 50.0;
    auto tensor = simulate_scene(scene, wf, ar, cfg);
    auto cleaned = single_antenna_clean(CsiSeries::from_tensor(tensor), 0);
    // Mean inter-symbol phase step over subcarriers and symbols.
    cplx acc{0.0, 0.0};
    for (int j = 0; j < cleaned.num_subcarriers; ++j)
        for (int k = 1; k < cleaned.num_symbols; ++k)
            acc += cleaned.at(0, j, k) * std::conj(cleaned.at(0, j, k - 1));
    const double drift = std::abs(std::arg(acc));
    CHECK(drift < 0.01 * kTwoPi * 50.0 * wf.symbol_interval);
}

TEST_CASE("AGC invariance: scaling beta leaves every method's argmax unchanged") {
    const WaveformConfig wf = test_waveform();
    ArrayConfig ar;
    ar.num_rx = 3;
    const Scene scene = mover_scene();
    auto tensor = simulate_scene(scene, wf, ar, ImpairmentConfig{});
    auto scaled = tensor;
    for (auto& v : scaled.data) v *= 2.7;  // constant positive AGC rescale

    auto check_same_argmax = [&](auto&& method) {
        auto a = method(CsiSeries::from_tensor(tensor));
        auto b = method(CsiSeries::from_tensor(scaled));
        CHECK(spectrum_argmax(doppler_power(a), 1, a.num_symbols) ==
              spectrum_argmax(doppler_power(b), 1, b.num_symbols));
    };
    check_same_argmax([](const CsiSeries& c) { return cacc_raw(c, 0); });
    check_same_argmax([](const CsiSeries& c) { return cacc_variant(c); });
    check_same_argmax([](const CsiSeries& c) { return casr(c, 1, 0); });
    check_same_argmax([](const CsiSeries& c) { return single_antenna_clean(c, 0); });
}
