#pragma once

// Reference implementations used only by tests. They deliberately share no
// code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

// Eigenvalues of a symmetric n x n matrix (row-major) by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, std::size_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i * n + i];
    return ev;
}

// sqrt of the eigenvalues of the smaller Gram matrix, descending.
inline std::vector<double> gram_singular_values(const std::vector<float> & w, std::size_t rows, std::size_t cols) {
    const bool use_cols = cols <= rows;
    const std::size_t n = use_cols ? cols : rows;
    std::vector<double> g(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            if (use_cols) {
                for (std::size_t r = 0; r < rows; ++r) acc += double(w[r * cols + i]) * double(w[r * cols + j]);
            } else {
                for (std::size_t c = 0; c < cols; ++c) acc += double(w[i * cols + c]) * double(w[j * cols + c]);
            }
            g[i * n + j] = acc;
        }
    }
    auto ev = jacobi_eigenvalues(g, n);
    for (auto & v : ev) v = std::sqrt(std::max(v, 0.0));
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

// Element-by-element great-circle interpolation written from the textbook formula.
inline std::vector<double> scalar_slerp(const std::vector<float> & a, const std::vector<float> & b, double t) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * b[i];
        na += double(a[i]) * a[i];
        nb += double(b[i]) * b[i];
    }
    double c = dot / std::sqrt(na * nb);
    c = std::max(-1.0, std::min(1.0, c));
    const double om = std::acos(c);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = (std::sin((1 - t) * om) * a[i] + std::sin(t * om) * b[i]) / std::sin(om);
    }
    return out;
}

inline std::vector<float> gaussian(std::size_t n, std::uint64_t seed, double stdev = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, stdev);
    std::vector<float> v(n);
    for (auto & x : v) x = static_cast<float>(nd(rng));
    return v;
}

inline std::vector<float> unit_vector(std::size_t n, std::uint64_t seed) {
    auto v = gaussian(n, seed);
    double s = 0;
    for (float x : v) s += double(x) * x;
    s = std::sqrt(s);
    for (auto & x : v) x = static_cast<float>(x / s);
    return v;
}

// Random orthogonal matrix via Gram-Schmidt on Gaussian columns (row-major n x n).
inline std::vector<double> random_orthogonal(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> q(n * n);
    for (auto & x : q) x = nd(rng);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double d = 0;
            for (std::size_t i = 0; i < n; ++i) d += q[i * n + j] * q[i * n + k];
            for (std::size_t i = 0; i < n; ++i) q[i * n + j] -= d * q[i * n + k];
        }
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += q[i * n + j] * q[i * n + j];
        s = std::sqrt(s);
        for (std::size_t i = 0; i < n; ++i) q[i * n + j] /= s;
    }
    return q;
}

// Composite Simpson integration.
template <typename F>
double simpson(F f, double a, double b, int n = 20000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

} // namespace oracle
