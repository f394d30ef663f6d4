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

#include <cmath>
#include <vector>

#include "common.hpp"

namespace bisense {

/// Cell-averaging 2D CFAR parameters. Guard/training extents are per side.
struct CfarConfig {
    int guard_doppler = 1;
    int guard_aoa = 1;
    int train_doppler = 4;
    int train_aoa = 4;
    double design_pfa = 1e-2;

    void validate() const {
        require(design_pfa > 0.0 && design_pfa < 1.0, errc::invalid_config,
                "design_pfa must lie in (0, 1)");
        require(guard_doppler >= 0 && guard_aoa >= 0 && train_doppler >= 1 && train_aoa >= 1,
                errc::invalid_config, "invalid CFAR window extents");
        const int full = (2 * (guard_doppler + train_doppler) + 1) *
                             (2 * (guard_aoa + train_aoa) + 1) -
                         (2 * guard_doppler + 1) * (2 * guard_aoa + 1);
        require(full >= 4, errc::invalid_config, "CFAR needs >= 4 training cells");
    }
};

struct CfarHit {
    int row = 0;  // Doppler index
    int col = 0;  // AoA index
    double power = 0.0;
    double noise = 0.0;  // training-mean estimate at the cell
    double snr_db() const { return db_from_power(power / noise); }
};

/**
 * @brief Cell-averaging CFAR over a Doppler-AoA power heatmap.
 *
 * threshold = alpha * mean(training cells) with
 * alpha = N_t (pfa^(-1/N_t) - 1), exact for exponentially distributed noise
 * power. Border cells shrink their training window (alpha recomputed for the
 * actual N_t). The detection set is invariant to any positive scaling of the
 * heatmap; an all-zero map yields no detections.
 */
inline std::vector<CfarHit> cfar_2d(const Eigen::MatrixXd& heatmap, const CfarConfig& cfg) {
    cfg.validate();
    const int rows = static_cast<int>(heatmap.rows());
    const int cols = static_cast<int>(heatmap.cols());
    const int rg = cfg.guard_doppler, cg = cfg.guard_aoa;
    const int rt = cfg.guard_doppler + cfg.train_doppler;
    const int ct = cfg.guard_aoa + cfg.train_aoa;
    require(rows >= 2 * rt + 1 && cols >= 2 * ct + 1, errc::invalid_argument,
            "heatmap smaller than the CFAR window");

    std::vector<CfarHit> hits;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int r0 = std::max(0, r - rt), r1 = std::min(rows - 1, r + rt);
            const int c0 = std::max(0, c - ct), c1 = std::min(cols - 1, c + ct);
            double sum = 0.0;
            int count = 0;
            for (int i = r0; i <= r1; ++i)
                for (int j = c0; j <= c1; ++j) {
                    if (std::abs(i - r) <= rg && std::abs(j - c) <= cg) continue;  // guard
                    sum += heatmap(i, j);
                    ++count;
                }
            if (count < 4) continue;  // degenerate corner
            const double mean = sum / count;
            const double alpha = count * (std::pow(cfg.design_pfa, -1.0 / count) - 1.0);
            if (heatmap(r, c) > alpha * mean && heatmap(r, c) > 0.0) {
                CfarHit h;
                h.row = r;
                h.col = c;
                h.power = heatmap(r, c);
                h.noise = mean;
                hits.push_back(h);
            }
        }
    }
    return hits;
}

}  // namespace bisense
