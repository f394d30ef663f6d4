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

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "channel.hpp"
#include "clean.hpp"
#include "common.hpp"

namespace bisense {

static_assert(std::endian::native == std::endian::little,
              "binary exports assume a little-endian host");

using json = nlohmann::json;

/// Deterministic float formatting shared by every CSV writer (shortest
/// round-trippable form).
inline std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), errc::io, "cannot open " + path.string() + " for writing");
    f << text;
    require(f.good(), errc::io, "write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), errc::io, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

namespace detail {

inline void write_raw_complex(const std::filesystem::path& path, const std::vector<cplx>& data) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), errc::io, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(cplx)));
    require(f.good(), errc::io, "write failed: " + path.string());
}

inline std::vector<cplx> read_raw_complex(const std::filesystem::path& path, size_t count) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), errc::io, "cannot open " + path.string());
    std::vector<cplx> data(count);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(count * sizeof(cplx)));
    require(static_cast<size_t>(f.gcount()) == count * sizeof(cplx), errc::io,
            "short read: " + path.string());
    return data;
}

inline json waveform_to_json(const WaveformConfig& wf) {
    return {{"carrier_frequency_hz", wf.carrier_frequency},
            {"num_subcarriers", wf.num_subcarriers},
            {"subcarrier_spacing_hz", wf.subcarrier_spacing},
            {"symbol_interval_s", wf.symbol_interval},
            {"frames_per_second", wf.frames_per_second},
            {"propagation_speed", wf.propagation_speed}};
}

inline WaveformConfig waveform_from_json(const json& j) {
    WaveformConfig wf;
    wf.carrier_frequency = j.at("carrier_frequency_hz").get<double>();
    wf.num_subcarriers = j.at("num_subcarriers").get<int>();
    wf.subcarrier_spacing = j.at("subcarrier_spacing_hz").get<double>();
    wf.symbol_interval = j.at("symbol_interval_s").get<double>();
    wf.frames_per_second = j.value("frames_per_second", 1.0 / wf.symbol_interval);
    wf.propagation_speed = j.value("propagation_speed", kSpeedOfLight);
    return wf;
}

inline json array_to_json(const ArrayConfig& a) {
    return {{"num_tx", a.num_tx},
            {"num_rx", a.num_rx},
            {"tx_spacing_m", a.tx_spacing},
            {"rx_spacing_m", a.rx_spacing}};
}

inline ArrayConfig array_from_json(const json& j) {
    ArrayConfig a;
    a.num_tx = j.at("num_tx").get<int>();
    a.num_rx = j.at("num_rx").get<int>();
    a.tx_spacing = j.value("tx_spacing_m", 0.0);
    a.rx_spacing = j.value("rx_spacing_m", 0.0);
    return a;
}

}  // namespace detail

/**
 * @brief Persist a CFR tensor as raw interleaved complex float64 (little
 *        endian, dims tx/rx/subcarrier/symbol, symbol fastest) plus a JSON
 *        sidecar carrying dims, axis scales and the seed.
 *
 * `prefix` becomes prefix.bin / prefix.json.
 */
inline void save_tensor(const CfrTensor& t, const std::filesystem::path& prefix) {
    detail::write_raw_complex(prefix.string() + ".bin", t.data);
    json side{{"schema", "bisense-cfr/1"},
              {"dtype", "complex128_le"},
              {"dims", {t.num_tx, t.num_rx, t.num_subcarriers, t.num_symbols}},
              {"order", {"tx", "rx", "subcarrier", "symbol"}},
              {"seed", t.seed},
              {"waveform", detail::waveform_to_json(t.waveform)},
              {"array", detail::array_to_json(t.array)}};
    write_text_file(prefix.string() + ".json", side.dump(2) + "\n");
}

inline CfrTensor load_tensor(const std::filesystem::path& prefix) {
    json side = json::parse(read_text_file(prefix.string() + ".json"));
    require(side.value("schema", "") == "bisense-cfr/1", errc::schema,
            "not a bisense CFR sidecar: " + prefix.string() + ".json");
    CfrTensor t;
    const auto dims = side.at("dims");
    t.num_tx = dims.at(0).get<int>();
    t.num_rx = dims.at(1).get<int>();
    t.num_subcarriers = dims.at(2).get<int>();
    t.num_symbols = dims.at(3).get<int>();
    t.seed = side.value("seed", 0ull);
    t.waveform = detail::waveform_from_json(side.at("waveform"));
    t.array = detail::array_from_json(side.at("array"));
    const size_t n = static_cast<size_t>(t.num_tx) * t.num_rx * t.num_subcarriers *
                     t.num_symbols;
    t.data = detail::read_raw_complex(prefix.string() + ".bin", n);
    return t;
}

/// CleanedSeries uses the same binary layout with the method recorded in the
/// sidecar.
inline void save_cleaned(const CleanedSeries& s, const std::filesystem::path& prefix) {
    detail::write_raw_complex(prefix.string() + ".bin", s.data);
    json side{{"schema", "bisense-cleaned/1"},
              {"dtype", "complex128_le"},
              {"dims", {s.num_channels, s.num_subcarriers, s.num_symbols}},
              {"order", {"channel", "subcarrier", "symbol"}},
              {"method_tag", to_string(s.method)},
              {"reference", s.reference},
              {"linear_in_paths", s.linear_in_paths},
              {"spatially_coherent", s.spatially_coherent},
              {"masked_samples", s.masked_samples},
              {"waveform", detail::waveform_to_json(s.waveform)},
              {"array", detail::array_to_json(s.array)}};
    write_text_file(prefix.string() + ".json", side.dump(2) + "\n");
}

inline CleanedSeries load_cleaned(const std::filesystem::path& prefix) {
    json side = json::parse(read_text_file(prefix.string() + ".json"));
    require(side.value("schema", "") == "bisense-cleaned/1", errc::schema,
            "not a bisense cleaned-series sidecar: " + prefix.string() + ".json");
    CleanedSeries s;
    const auto dims = side.at("dims");
    s.num_channels = dims.at(0).get<int>();
    s.num_subcarriers = dims.at(1).get<int>();
    s.num_symbols = dims.at(2).get<int>();
    s.method = clean_method_from_string(side.at("method_tag").get<std::string>());
    s.reference = side.value("reference", 0);
    s.linear_in_paths = side.value("linear_in_paths", true);
    s.spatially_coherent = side.value("spatially_coherent", true);
    s.masked_samples = side.value("masked_samples", 0);
    s.waveform = detail::waveform_from_json(side.at("waveform"));
    s.array = detail::array_from_json(side.at("array"));
    const size_t n = static_cast<size_t>(s.num_channels) * s.num_subcarriers * s.num_symbols;
    s.data = detail::read_raw_complex(prefix.string() + ".bin", n);
    return s;
}

/// Write a dense row-major matrix as CSV (no header).
inline void write_csv_matrix(const std::filesystem::path& path, const double* values, int rows,
                             int cols) {
    std::string out;
    out.reserve(static_cast<size_t>(rows) * cols * 12);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c) out += ',';
            out += fmt_g17(values[static_cast<size_t>(r) * cols + c]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

/// 8-bit binary PGM (P5) of a matrix, dB-scaled between its min and max.
inline void write_pgm(const std::filesystem::path& path, const double* values, int rows,
                      int cols, double floor_db = -60.0) {
    double peak = 0.0;
    for (int i = 0; i < rows * cols; ++i) peak = std::max(peak, values[i]);
    std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    out.reserve(out.size() + static_cast<size_t>(rows) * cols);
    for (int i = 0; i < rows * cols; ++i) {
        double db = peak > 0.0 ? db_from_power(values[i] / peak + 1e-300) : floor_db;
        db = std::clamp(db, floor_db, 0.0);
        out += static_cast<char>(std::lround(255.0 * (db - floor_db) / (-floor_db)));
    }
    write_text_file(path, out);
}

}  // namespace bisense
