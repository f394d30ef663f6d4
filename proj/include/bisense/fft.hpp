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

#include <fftw3.h>

#include <mutex>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace bisense {

/**
 * @brief Thin RAII cache around FFTW double-precision c2c plans.
 *
 * Plans are created once per (size, direction) with FFTW_ESTIMATE|FFTW_UNALIGNED
 * and reused via the new-array execute interface, which is thread-safe; only
 * planning itself is serialized. Transforms are unnormalized, matching FFTW.
 */
class Fft {
  public:
    /// out[m] = sum_k in[k] * exp(-j*2*pi*m*k/n)
    static void forward(const cplx* in, cplx* out, int n) { exec(in, out, n, FFTW_FORWARD); }
    /// out[m] = sum_k in[k] * exp(+j*2*pi*m*k/n)
    static void backward(const cplx* in, cplx* out, int n) { exec(in, out, n, FFTW_BACKWARD); }

    static void forward(const std::vector<cplx>& in, std::vector<cplx>& out) {
        out.resize(in.size());
        forward(in.data(), out.data(), static_cast<int>(in.size()));
    }
    static void backward(const std::vector<cplx>& in, std::vector<cplx>& out) {
        out.resize(in.size());
        backward(in.data(), out.data(), static_cast<int>(in.size()));
    }

  private:
    struct PlanCache {
        std::mutex mtx;
        std::unordered_map<int64_t, fftw_plan> plans;
        ~PlanCache() {
            for (auto& [k, p] : plans) fftw_destroy_plan(p);
        }
    };

    static void exec(const cplx* in, cplx* out, int n, int sign) {
        require(n >= 1, errc::invalid_argument, "FFT size must be >= 1");
        static PlanCache cache;
        const int64_t key = static_cast<int64_t>(n) * 4 + (sign == FFTW_FORWARD ? 0 : 1);
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(cache.mtx);
            auto it = cache.plans.find(key);
            if (it == cache.plans.end()) {
                std::vector<cplx> a(n), b(n);
                plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                        reinterpret_cast<fftw_complex*>(b.data()), sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
                require(plan != nullptr, errc::singular_matrix, "FFTW planning failed");
                cache.plans.emplace(key, plan);
            } else {
                plan = it->second;
            }
        }
        // Plans are created out-of-place; route in-place calls through a copy.
        if (in == out) {
            std::vector<cplx> tmp(in, in + n);
            fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()),
                             reinterpret_cast<fftw_complex*>(out));
            return;
        }
        // The execute interface does not write through `in`, but FFTW's API is
        // not const-qualified.
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }
};

/// Periodic Hann window, w(n) = 0.5 (1 - cos(2*pi*n/N)).
inline std::vector<double> hann_window(int n) {
    std::vector<double> w(n, 1.0);
    if (n <= 1) return w;
    for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(kTwoPi * i / n));
    return w;
}

/// Move the zero-frequency bin to the center (index n/2).
template <typename T>
inline std::vector<T> fftshift(const std::vector<T>& v) {
    const size_t n = v.size();
    std::vector<T> out(n);
    const size_t half = n / 2;
    for (size_t i = 0; i < n; ++i) out[i] = v[(i + half) % n];
    return out;
}

}  // namespace bisense
