#ifndef QNOISE_TESTS_ORACLES_HPP
#define QNOISE_TESTS_ORACLES_HPP

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "qnoise/linalg.hpp"
#include "qnoise/random.hpp"

namespace oracle {

/// Cyclic Jacobi eigenvalues of a symmetric row-major matrix, ascending.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, std::size_t n, int max_sweeps = 100) {
    auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (at(p, q) == 0.0) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Dense inverse BFGS update written directly from the product form
/// (I - rho s y^T) H (I - rho y s^T) + rho s s^T.
inline std::vector<double> dense_bfgs(const std::vector<double>& h, const qnoise::CurvaturePair& pr, std::size_t n) {
    const double rho = 1.0 / pr.sy;
    std::vector<double> v(n * n), tmp(n * n, 0.0), out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = (i == j ? 1.0 : 0.0) - rho * pr.y[i] * pr.s[j];
    // tmp = V^T H, out = tmp V
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) tmp[i * n + j] += v[k * n + i] * h[k * n + j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += tmp[i * n + k] * v[k * n + j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rho * pr.s[i] * pr.s[j];
    return out;
}

inline std::vector<double> dense_matvec(const std::vector<double>& a, const qnoise::DenseVector& x, std::size_t n) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += a[i * n + j] * x[j];
    return out;
}

inline qnoise::DenseVector random_vector(qnoise::rng::SplitMix64& gen, std::size_t n) {
    qnoise::DenseVector v(n);
    for (auto& e : v) e = gen.normal();
    return v;
}

/// Random SPD matrix B B^T + n I, row-major.
inline std::vector<double> random_spd(qnoise::rng::SplitMix64& gen, std::size_t n) {
    std::vector<double> b(n * n), a(n * n, 0.0);
    for (auto& e : b) e = gen.normal();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) a[i * n + j] += b[i * n + k] * b[j * n + k];
            if (i == j) a[i * n + j] += static_cast<double>(n);
        }
    return a;
}

/// Random pair with s.y > 0: y = A s for an SPD A.
inline qnoise::CurvaturePair random_pair(qnoise::rng::SplitMix64& gen, const std::vector<double>& spd, std::size_t n) {
    qnoise::DenseVector s = random_vector(gen, n);
    qnoise::DenseVector y(dense_matvec(spd, s, n));
    return qnoise::CurvaturePair::make(std::move(s), std::move(y));
}

inline double rel_diff(const qnoise::DenseVector& a, const qnoise::DenseVector& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace oracle

#endif  // QNOISE_TESTS_ORACLES_HPP
