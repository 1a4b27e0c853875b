#pragma once

#include "spearmm/checkpoint_io.hpp"

#include <vector>

namespace spearmm {

// Shared guard for every metric denominator.
inline constexpr double kEpsilon = 1e-8;

struct Spectrum {
    std::vector<double> singular_values; // non-increasing
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct SnrEstimate {
    double snr = 0.0;
    double noise_scale = 0.0;     // per-entry noise standard deviation estimate
    double noise_threshold = 0.0; // tau: largest singular value attributed to noise
    double signal_energy = 0.0;   // sum of sigma^2 above tau
    double noise_energy = 0.0;    // sum of sigma^2 at or below tau
};

// Throws ValidationError naming the first non-finite entry.
Spectrum singular_values(const MatrixView & w);

SnrEstimate estimate_snr(const MatrixView & w);
SnrEstimate estimate_snr(const Spectrum & s);

// Mean of lambda over the lowest `fraction` quantile of the Marchenko-Pastur law
// with aspect ratio `ratio` = min/max dimension and unit variance.
double marchenko_pastur_lower_mean(double ratio, double fraction);

} // namespace spearmm
