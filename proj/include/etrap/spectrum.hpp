// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "etrap/error.hpp"
#include "etrap/units.hpp"

namespace etrap {

class NoSecularMotion : public DomainError {
  public:
    using DomainError::DomainError;
};

struct SpectralPeak {
    double frequency = 0.0;  // Hz, interpolated
    double height = 0.0;     // interpolated Hann-window magnitude
    double bin_width = 0.0;  // Hz
};

namespace detail {

// The FFTW planner is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

/// Hann-windowed magnitude spectrum |X_k| for k = 0 .. n/2 of a mean-removed series.
inline std::vector<double> magnitude_spectrum(std::span<const double> samples)
{
    const std::size_t n = samples.size();
    detail::require(n >= 4, "spectrum needs at least 4 samples");

    double mean = 0.0;
    for (double s : samples) {
        mean += s;
    }
    mean /= static_cast<double>(n);

    // fftw_malloc keeps alignment, and therefore the codelet choice, fixed
    // from run to run.
    std::unique_ptr<double, detail::FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, detail::FftwFree> out(fftw_alloc_complex(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double w = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(j) / static_cast<double>(n - 1));
        in.get()[j] = (samples[j] - mean) * w;
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    std::vector<double> mag(n / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k) {
        mag[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    }
    return mag;
}

/// Tallest spectral line below f_max with three-point parabolic refinement.
///
/// Throws NoSecularMotion when nothing stands clear of the median floor
/// (constant or featureless input).
inline SpectralPeak dominant_frequency(std::span<const double> samples, double sample_interval, double f_max,
                                       double floor_ratio = 10.0)
{
    detail::require(sample_interval > 0.0, "sample interval must be positive");
    const std::vector<double> mag = magnitude_spectrum(samples);
    const double df = 1.0 / (static_cast<double>(samples.size()) * sample_interval);
    const std::size_t k_end = std::min(mag.size(), static_cast<std::size_t>(std::ceil(f_max / df)));
    if (k_end < 3) {
        throw NoSecularMotion("frequency band too narrow for the trajectory length");
    }

    std::size_t best = 1;
    for (std::size_t k = 2; k < k_end; ++k) {
        if (mag[k] > mag[best]) {
            best = k;
        }
    }
    std::vector<double> band(mag.begin() + 1, mag.begin() + static_cast<std::ptrdiff_t>(k_end));
    std::nth_element(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(band.size() / 2), band.end());
    const double median = band[band.size() / 2];
    double scale = 0.0;
    for (double v : samples) {
        scale = std::max(scale, std::fabs(v));
    }
    const bool roundoff_only = mag[best] <= 1e-9 * scale * static_cast<double>(samples.size());
    if (!(mag[best] > 0.0) || mag[best] < floor_ratio * median || roundoff_only) {
        throw NoSecularMotion("no secular motion detected: spectrum is flat below the band limit");
    }

    SpectralPeak peak;
    peak.bin_width = df;
    double offset = 0.0;
    double height = mag[best];
    if (best + 1 < mag.size()) {
        const double a = mag[best - 1];
        const double b = mag[best];
        const double c = mag[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) {
            offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
            height = b - 0.25 * (a - c) * offset;
        }
    }
    peak.frequency = (static_cast<double>(best) + offset) * df;
    peak.height = height;
    return peak;
}

}  // namespace etrap
