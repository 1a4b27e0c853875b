#include "spearmm/spectral.hpp"

#include "spearmm/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spearmm {

Spectrum singular_values(const MatrixView & w) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(w.rows), static_cast<Eigen::Index>(w.cols));
    for (std::size_t r = 0; r < w.rows; ++r) {
        for (std::size_t c = 0; c < w.cols; ++c) {
            const float v = w(r, c);
            if (!std::isfinite(v)) {
                throw ValidationError("non-finite entry at row " + std::to_string(r) + ", col " + std::to_string(c));
            }
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }

    Spectrum s;
    s.rows = w.rows;
    s.cols = w.cols;
    if (w.rows == 1 || w.cols == 1) {
        s.singular_values = {m.norm()};
        return s;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const auto & sv = svd.singularValues();
    s.singular_values.assign(sv.data(), sv.data() + sv.size());
    std::sort(s.singular_values.begin(), s.singular_values.end(), std::greater<>());
    return s;
}

double marchenko_pastur_lower_mean(double ratio, double fraction) {
    if (fraction >= 1.0) {
        return 1.0; // the law has unit mean
    }
    const double a = std::pow(1.0 - std::sqrt(ratio), 2);
    const double b = std::pow(1.0 + std::sqrt(ratio), 2);
    const double half_width = 0.5 * (b - a);

    // x = a + (b - a)(1 - cos th)/2 removes the square-root edge singularities:
    // density dx = half_width^2 sin^2(th) / (2 pi ratio x) dth.
    constexpr int kCells = 20000;
    const double h = std::numbers::pi / kCells;
    std::vector<double> mass(kCells);
    std::vector<double> moment(kCells);
    double total = 0.0;
    for (int i = 0; i < kCells; ++i) {
        const double th = (i + 0.5) * h;
        const double x = a + half_width * (1.0 - std::cos(th));
        const double g = half_width * half_width * std::sin(th) * std::sin(th) / (2.0 * std::numbers::pi * ratio * x);
        mass[i] = g * h;
        moment[i] = g * x * h;
        total += mass[i];
    }

    const double target = fraction * total;
    double cum = 0.0;
    double first = 0.0;
    for (int i = 0; i < kCells; ++i) {
        if (cum + mass[i] >= target) {
            const double part = (target - cum) / mass[i];
            first += part * moment[i];
            break;
        }
        cum += mass[i];
        first += moment[i];
    }
    return first / target;
}

SnrEstimate estimate_snr(const Spectrum & s) {
    const auto & sv = s.singular_values;
    const std::size_t k = sv.size();
    const std::size_t big = std::max(s.rows, s.cols);
    SnrEstimate est;
    if (k == 0) {
        return est;
    }

    // Noise scale from the smallest ceil(k/2) values, matched against the
    // Marchenko-Pastur expectation of that same lower quantile.
    const std::size_t lower = (k + 1) / 2;
    double sq = 0.0;
    for (std::size_t i = k - lower; i < k; ++i) {
        sq += sv[i] * sv[i];
    }
    const double ratio = static_cast<double>(k) / static_cast<double>(big);
    const double fraction = static_cast<double>(lower) / static_cast<double>(k);
    const double expected = marchenko_pastur_lower_mean(ratio, fraction);
    est.noise_scale = std::sqrt(sq / static_cast<double>(lower) / (static_cast<double>(big) * expected));
    est.noise_threshold = est.noise_scale * (std::sqrt(static_cast<double>(s.rows)) + std::sqrt(static_cast<double>(s.cols)));

    for (double v : sv) {
        (v > est.noise_threshold ? est.signal_energy : est.noise_energy) += v * v;
    }
    est.snr = est.signal_energy / (est.noise_energy + kEpsilon);
    return est;
}

SnrEstimate estimate_snr(const MatrixView & w) {
    return estimate_snr(singular_values(w));
}

} // namespace spearmm
