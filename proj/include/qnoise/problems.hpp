#ifndef QNOISE_PROBLEMS_HPP
#define QNOISE_PROBLEMS_HPP

// Smooth unconstrained test problems with analytic gradients. The CUTEst
// problems follow their SIF definitions at the standard starting points.
// Reference optimal values come from noiseless BFGS runs to stagnation
// (`qnoise reference --problem NAME`).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "qnoise/linalg.hpp"
#include "qnoise/random.hpp"

namespace qnoise {

/// Strong-convexity and gradient-Lipschitz constants, known only for the
/// synthetic quadratics.
struct ConvexityBounds {
    double m = 0.0;
    double M = 0.0;
};

struct Problem {
    std::string name;
    std::size_t dim = 0;
    std::function<double(const DenseVector&)> objective;
    std::function<DenseVector(const DenseVector&)> gradient;
    DenseVector x0;
    double phi_star = 0.0;
    std::optional<ConvexityBounds> bounds;

    double eval_f(const DenseVector& x) const { return objective(x); }
    DenseVector eval_g(const DenseVector& x) const { return gradient(x); }
};

/// Largest coordinate-wise relative deviation between the analytic gradient
/// and a central difference with step h. Relative error is
/// |a - b| / max(1, |a|, |b|).
inline double check_gradient(const Problem& p, const DenseVector& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("check_gradient: h must be positive");
    const DenseVector g = p.eval_g(x);
    DenseVector probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        probe[i] = xi + h;
        const double fp = p.eval_f(probe);
        probe[i] = xi - h;
        const double fm = p.eval_f(probe);
        probe[i] = xi;
        const double fd = (fp - fm) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(g[i]), std::abs(fd)});
        worst = std::max(worst, std::abs(g[i] - fd) / scale);
    }
    return worst;
}

namespace cutest {

inline double arwhead_f(const DenseVector& x) {
    const std::size_t n = x.size();
    const double xn2 = x[n - 1] * x[n - 1];
    double f = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double t = x[i] * x[i] + xn2;
        f += t * t - 4.0 * x[i] + 3.0;
    }
    return f;
}

inline DenseVector arwhead_g(const DenseVector& x) {
    const std::size_t n = x.size();
    const double xn2 = x[n - 1] * x[n - 1];
    DenseVector g(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double t = x[i] * x[i] + xn2;
        g[i] += 4.0 * t * x[i] - 4.0;
        g[n - 1] += 4.0 * t * x[n - 1];
    }
    return g;
}

inline double engval1_f(const DenseVector& x) {
    double f = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double t = x[i] * x[i] + x[i + 1] * x[i + 1];
        f += t * t - 4.0 * x[i] + 3.0;
    }
    return f;
}

inline DenseVector engval1_g(const DenseVector& x) {
    DenseVector g(x.size());
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double t = x[i] * x[i] + x[i + 1] * x[i + 1];
        g[i] += 4.0 * t * x[i] - 4.0;
        g[i + 1] += 4.0 * t * x[i + 1];
    }
    return g;
}

// Chained Cragg-Levy; groups of four overlapping by two.
inline double cragglvy_f(const DenseVector& x) {
    double f = 0.0;
    for (std::size_t a = 0; a + 3 < x.size(); a += 2) {
        const double t1 = std::exp(x[a]) - x[a + 1];
        const double t2 = x[a + 1] - x[a + 2];
        const double u = x[a + 2] - x[a + 3];
        const double t3 = std::tan(u) + u;
        const double t5 = x[a + 3] - 1.0;
        f += std::pow(t1, 4) + 100.0 * std::pow(t2, 6) + std::pow(t3, 4) + std::pow(x[a], 8) + t5 * t5;
    }
    return f;
}

inline DenseVector cragglvy_g(const DenseVector& x) {
    DenseVector g(x.size());
    for (std::size_t a = 0; a + 3 < x.size(); a += 2) {
        const double ea = std::exp(x[a]);
        const double t1 = ea - x[a + 1];
        const double t2 = x[a + 1] - x[a + 2];
        const double u = x[a + 2] - x[a + 3];
        const double tu = std::tan(u);
        const double t3 = tu + u;
        const double t5 = x[a + 3] - 1.0;
        const double d1 = 4.0 * t1 * t1 * t1;
        const double d2 = 600.0 * std::pow(t2, 5);
        const double d3 = 4.0 * t3 * t3 * t3 * (tu * tu + 2.0);  // d/du (tan u + u) = sec^2 u + 1
        g[a] += d1 * ea + 8.0 * std::pow(x[a], 7);
        g[a + 1] += -d1 + d2;
        g[a + 2] += -d2 + d3;
        g[a + 3] += -d3 + 2.0 * t5;
    }
    return g;
}

inline double tridia_f(const DenseVector& x) {
    double f = (x[0] - 1.0) * (x[0] - 1.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double r = 2.0 * x[i] - x[i - 1];
        f += static_cast<double>(i + 1) * r * r;
    }
    return f;
}

inline DenseVector tridia_g(const DenseVector& x) {
    DenseVector g(x.size());
    g[0] = 2.0 * (x[0] - 1.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double w = static_cast<double>(i + 1);
        const double r = 2.0 * x[i] - x[i - 1];
        g[i] += 4.0 * w * r;
        g[i - 1] -= 2.0 * w * r;
    }
    return g;
}

inline double dqdrtic_f(const DenseVector& x) {
    double f = 0.0;
    for (std::size_t i = 0; i + 2 < x.size(); ++i)
        f += x[i] * x[i] + 100.0 * x[i + 1] * x[i + 1] + 100.0 * x[i + 2] * x[i + 2];
    return f;
}

inline DenseVector dqdrtic_g(const DenseVector& x) {
    DenseVector g(x.size());
    for (std::size_t i = 0; i + 2 < x.size(); ++i) {
        g[i] += 2.0 * x[i];
        g[i + 1] += 200.0 * x[i + 1];
        g[i + 2] += 200.0 * x[i + 2];
    }
    return g;
}

inline double woods_f(const DenseVector& x) {
    double f = 0.0;
    for (std::size_t a = 0; a + 3 < x.size(); a += 4) {
        const double t = x[a + 1] - x[a] * x[a];
        const double u = x[a + 3] - x[a + 2] * x[a + 2];
        const double v = x[a + 1] + x[a + 3] - 2.0;
        const double w = x[a + 1] - x[a + 3];
        f += 100.0 * t * t + (1.0 - x[a]) * (1.0 - x[a]) + 90.0 * u * u + (1.0 - x[a + 2]) * (1.0 - x[a + 2]) +
             10.0 * v * v + 0.1 * w * w;
    }
    return f;
}

inline DenseVector woods_g(const DenseVector& x) {
    DenseVector g(x.size());
    for (std::size_t a = 0; a + 3 < x.size(); a += 4) {
        const double t = x[a + 1] - x[a] * x[a];
        const double u = x[a + 3] - x[a + 2] * x[a + 2];
        const double v = x[a + 1] + x[a + 3] - 2.0;
        const double w = x[a + 1] - x[a + 3];
        g[a] += -400.0 * t * x[a] - 2.0 * (1.0 - x[a]);
        g[a + 1] += 200.0 * t + 20.0 * v + 0.2 * w;
        g[a + 2] += -360.0 * u * x[a + 2] - 2.0 * (1.0 - x[a + 2]);
        g[a + 3] += 180.0 * u + 20.0 * v - 0.2 * w;
    }
    return g;
}

inline double nondia_f(const DenseVector& x) {
    double f = (x[0] - 1.0) * (x[0] - 1.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double t = x[0] - x[i - 1] * x[i - 1];
        f += 100.0 * t * t;
    }
    return f;
}

inline DenseVector nondia_g(const DenseVector& x) {
    DenseVector g(x.size());
    g[0] = 2.0 * (x[0] - 1.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double t = x[0] - x[i - 1] * x[i - 1];
        g[0] += 200.0 * t;
        g[i - 1] += -400.0 * t * x[i - 1];
    }
    return g;
}

inline double genrose_f(const DenseVector& x) {
    double f = 1.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double t = x[i] - x[i - 1] * x[i - 1];
        f += 100.0 * t * t + (x[i] - 1.0) * (x[i] - 1.0);
    }
    return f;
}

inline DenseVector genrose_g(const DenseVector& x) {
    DenseVector g(x.size());
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double t = x[i] - x[i - 1] * x[i - 1];
        g[i] += 200.0 * t + 2.0 * (x[i] - 1.0);
        g[i - 1] += -400.0 * t * x[i - 1];
    }
    return g;
}

}  // namespace cutest

/// phi(x) = 1/2 x^T A x with A = Q^T diag(lambda) Q, lambda log-spaced on
/// [m, M] and Q a seeded random orthogonal matrix.
inline Problem make_quadratic(std::size_t d, double m, double M, std::uint64_t seed) {
    if (d == 0) throw std::invalid_argument("make_quadratic: dimension must be positive");
    if (!(m > 0.0) || !(M >= m)) throw std::invalid_argument("make_quadratic: need 0 < m <= M");

    rng::SplitMix64 gen(seed);
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd z(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) z(i, j) = gen.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);

    Eigen::VectorXd lambda(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(d - 1);
        lambda(i) = m * std::pow(M / m, t);
    }
    lambda(0) = m;
    lambda(n - 1) = M;
    const Eigen::MatrixXd a_full = q.transpose() * lambda.asDiagonal() * q;

    auto a = std::make_shared<std::vector<double>>(d * d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            (*a)[static_cast<std::size_t>(i * n + j)] = 0.5 * (a_full(i, j) + a_full(j, i));

    auto apply = [a, d](const DenseVector& x) {
        DenseVector out(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double* row = a->data() + i * d;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
            out[i] = acc;
        }
        return out;
    };

    DenseVector x0(d);
    for (std::size_t i = 0; i < d; ++i) x0[i] = gen.normal();
    x0 *= 10.0 / norm2(x0);

    std::ostringstream name;
    name << "QUAD-" << d << "-" << m << "-" << M;
    Problem p;
    p.name = name.str();
    p.dim = d;
    p.objective = [apply](const DenseVector& x) { return 0.5 * dot(x, apply(x)); };
    p.gradient = apply;
    p.x0 = std::move(x0);
    p.phi_star = 0.0;
    p.bounds = ConvexityBounds{m, M};
    return p;
}

class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Name -> problem factory. Synthetic quadratics are addressed as
/// QUAD-<d>-<m>-<M>[-<seed>].
class ProblemRegistry {
public:
    using Factory = std::function<Problem()>;

    void add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

    bool contains(const std::string& name) const {
        return factories_.contains(name) || parse_quad(name).has_value();
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : factories_) out.push_back(k);
        return out;
    }

    Problem lookup(const std::string& name) const {
        if (auto it = factories_.find(name); it != factories_.end()) return it->second();
        if (auto q = parse_quad(name)) {
            Problem p = make_quadratic(q->d, q->m, q->M, q->seed);
            p.name = name;
            return p;
        }
        std::string msg = "unknown problem '" + name + "'; registered: ";
        for (const auto& n : names()) msg += n + " ";
        msg += "QUAD-<d>-<m>-<M>[-<seed>]";
        throw LookupError(msg);
    }

private:
    struct QuadSpec {
        std::size_t d;
        double m;
        double M;
        std::uint64_t seed;
    };

    static std::optional<QuadSpec> parse_quad(const std::string& name) {
        if (name.rfind("QUAD-", 0) != 0) return std::nullopt;
        std::vector<std::string> parts;
        std::stringstream ss(name.substr(5));
        for (std::string item; std::getline(ss, item, '-');) parts.push_back(item);
        if (parts.size() != 3 && parts.size() != 4) return std::nullopt;
        try {
            std::size_t used = 0;
            QuadSpec q{};
            q.d = std::stoul(parts[0], &used);
            if (used != parts[0].size() || q.d == 0) return std::nullopt;
            q.m = std::stod(parts[1], &used);
            if (used != parts[1].size()) return std::nullopt;
            q.M = std::stod(parts[2], &used);
            if (used != parts[2].size()) return std::nullopt;
            q.seed = parts.size() == 4 ? std::stoull(parts[3]) : 0;
            if (!(q.m > 0.0) || !(q.M >= q.m)) return std::nullopt;
            return q;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    std::map<std::string, Factory> factories_;
};

namespace detail {
inline Problem make_cutest(std::string name, std::size_t d, double (*f)(const DenseVector&),
                           DenseVector (*g)(const DenseVector&), DenseVector x0, double phi_star) {
    Problem p;
    p.name = std::move(name);
    p.dim = d;
    p.objective = f;
    p.gradient = g;
    p.x0 = std::move(x0);
    p.phi_star = phi_star;
    return p;
}
}  // namespace detail

/// Reference optimal values at the registered dimensions.
namespace phi_star {
inline constexpr double arwhead = 0.0;
inline constexpr double engval1 = 109.088136143092;
inline constexpr double cragglvy = 32.26991145858176;  // lower of the two basins BFGS and L-BFGS reach
inline constexpr double tridia = 0.0;
inline constexpr double dqdrtic = 0.0;
inline constexpr double woods = 0.0;
inline constexpr double nondia = 0.0;
inline constexpr double genrose = 1.0;
}  // namespace phi_star

inline ProblemRegistry make_default_registry() {
    using detail::make_cutest;
    ProblemRegistry r;
    constexpr std::size_t n = 100;
    r.add("ARWHEAD", [] { return make_cutest("ARWHEAD", n, cutest::arwhead_f, cutest::arwhead_g, DenseVector(n, 1.0), phi_star::arwhead); });
    r.add("ENGVAL1", [] { return make_cutest("ENGVAL1", n, cutest::engval1_f, cutest::engval1_g, DenseVector(n, 2.0), phi_star::engval1); });
    r.add("CRAGGLVY", [] {
        DenseVector x0(n, 2.0);
        x0[0] = 1.0;
        return make_cutest("CRAGGLVY", n, cutest::cragglvy_f, cutest::cragglvy_g, std::move(x0), phi_star::cragglvy);
    });
    r.add("TRIDIA", [] { return make_cutest("TRIDIA", n, cutest::tridia_f, cutest::tridia_g, DenseVector(n, 1.0), phi_star::tridia); });
    r.add("DQDRTIC", [] { return make_cutest("DQDRTIC", n, cutest::dqdrtic_f, cutest::dqdrtic_g, DenseVector(n, 3.0), phi_star::dqdrtic); });
    r.add("WOODS", [] {
        DenseVector x0(n);
        for (std::size_t i = 0; i < n; ++i) x0[i] = i % 2 == 0 ? -3.0 : -1.0;
        return make_cutest("WOODS", n, cutest::woods_f, cutest::woods_g, std::move(x0), phi_star::woods);
    });
    r.add("NONDIA", [] { return make_cutest("NONDIA", n, cutest::nondia_f, cutest::nondia_g, DenseVector(n, -1.0), phi_star::nondia); });
    r.add("GENROSE", [] {
        DenseVector x0(n);
        for (std::size_t i = 0; i < n; ++i) x0[i] = static_cast<double>(i + 1) / static_cast<double>(n + 1);
        return make_cutest("GENROSE", n, cutest::genrose_f, cutest::genrose_g, std::move(x0), phi_star::genrose);
    });
    return r;
}

inline const ProblemRegistry& default_registry() {
    static const ProblemRegistry registry = make_default_registry();
    return registry;
}

inline Problem registry_lookup(const std::string& name) { return default_registry().lookup(name); }

}  // namespace qnoise

#endif  // QNOISE_PROBLEMS_HPP
