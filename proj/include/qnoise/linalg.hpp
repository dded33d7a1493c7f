#ifndef QNOISE_LINALG_HPP
#define QNOISE_LINALG_HPP

/*
 * Dense kernels for the quasi-Newton solvers: vectors, packed symmetric
 * matrices, the BFGS inverse update, the L-BFGS two-loop recursion and the
 * extreme eigenvalues used by the conditioning diagnostics.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

namespace qnoise {

class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::size_t n, double value = 0.0) : v_(n, value) {}
    DenseVector(std::initializer_list<double> values) : v_(values) {}
    explicit DenseVector(std::vector<double> values) : v_(std::move(values)) {}

    std::size_t size() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    double* data() noexcept { return v_.data(); }
    const double* data() const noexcept { return v_.data(); }
    auto begin() noexcept { return v_.begin(); }
    auto end() noexcept { return v_.end(); }
    auto begin() const noexcept { return v_.begin(); }
    auto end() const noexcept { return v_.end(); }

    std::span<const double> view() const noexcept { return v_; }
    std::span<double> view() noexcept { return v_; }
    const std::vector<double>& values() const noexcept { return v_; }

    bool all_finite() const noexcept {
        return std::all_of(v_.begin(), v_.end(), [](double a) { return std::isfinite(a); });
    }

    DenseVector& operator+=(const DenseVector& o);
    DenseVector& operator-=(const DenseVector& o);
    DenseVector& operator*=(double a) {
        for (auto& e : v_) e *= a;
        return *this;
    }

    friend bool operator==(const DenseVector&, const DenseVector&) = default;

private:
    std::vector<double> v_;
};

namespace detail {
inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
}
}  // namespace detail

inline DenseVector& DenseVector::operator+=(const DenseVector& o) {
    detail::require_same_size(size(), o.size(), "DenseVector::operator+=");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
}

inline DenseVector& DenseVector::operator-=(const DenseVector& o) {
    detail::require_same_size(size(), o.size(), "DenseVector::operator-=");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
}

inline DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
inline DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
inline DenseVector operator*(double s, DenseVector a) { return a *= s; }
inline DenseVector operator-(DenseVector a) { return a *= -1.0; }

inline double dot(const DenseVector& a, const DenseVector& b) {
    detail::require_same_size(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(const DenseVector& a) { return std::sqrt(dot(a, a)); }

// y += a * x
inline void axpy(double a, const DenseVector& x, DenseVector& y) {
    detail::require_same_size(x.size(), y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

/// x + t * p, the point probed by every line-search trial.
inline DenseVector along(const DenseVector& x, double t, const DenseVector& p) {
    DenseVector out = x;
    axpy(t, p, out);
    return out;
}

/// Symmetric matrix in packed upper-triangular (column) storage. Only one
/// copy of each off-diagonal entry exists, so symmetry holds structurally.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(std::size_t order) : n_(order), a_(order * (order + 1) / 2, 0.0) {}

    static SymmetricMatrix identity(std::size_t order, double scale = 1.0) {
        SymmetricMatrix m(order);
        for (std::size_t i = 0; i < order; ++i) m.ref(i, i) = scale;
        return m;
    }

    static SymmetricMatrix diagonal(const DenseVector& d) {
        SymmetricMatrix m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m.ref(i, i) = d[i];
        return m;
    }

    /// Builds from a row-major dense array, averaging the two triangles.
    static SymmetricMatrix from_dense(std::size_t order, std::span<const double> rows) {
        detail::require_same_size(order * order, rows.size(), "SymmetricMatrix::from_dense");
        SymmetricMatrix m(order);
        for (std::size_t j = 0; j < order; ++j)
            for (std::size_t i = 0; i <= j; ++i)
                m.ref(i, j) = 0.5 * (rows[i * order + j] + rows[j * order + i]);
        return m;
    }

    std::size_t order() const noexcept { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return a_[index(i, j)]; }
    double& ref(std::size_t i, std::size_t j) { return a_[index(i, j)]; }

    std::span<const double> packed() const noexcept { return a_; }

    DenseVector multiply(const DenseVector& v) const {
        detail::require_same_size(n_, v.size(), "SymmetricMatrix::multiply");
        DenseVector out(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double* col = a_.data() + j * (j + 1) / 2;
            const double vj = v[j];
            double acc = 0.0;
            for (std::size_t i = 0; i < j; ++i) {
                out[i] += col[i] * vj;
                acc += col[i] * v[i];
            }
            out[j] += acc + col[j] * vj;
        }
        return out;
    }

    std::vector<double> to_dense() const {
        std::vector<double> rows(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) rows[i * n_ + j] = (*this)(i, j);
        return rows;
    }

    bool all_finite() const noexcept {
        return std::all_of(a_.begin(), a_.end(), [](double a) { return std::isfinite(a); });
    }

private:
    static std::size_t index(std::size_t i, std::size_t j) noexcept {
        if (i > j) std::swap(i, j);
        return j * (j + 1) / 2 + i;
    }

    std::size_t n_ = 0;
    std::vector<double> a_;
};

inline DenseVector operator*(const SymmetricMatrix& m, const DenseVector& v) { return m.multiply(v); }

/// Step / gradient-difference pair with its inner product cached.
struct CurvaturePair {
    DenseVector s;
    DenseVector y;
    double sy = 0.0;

    static CurvaturePair make(DenseVector s, DenseVector y) {
        detail::require_same_size(s.size(), y.size(), "CurvaturePair");
        const double sy = dot(s, y);
        return {std::move(s), std::move(y), sy};
    }
};

class CurvatureContractError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T, applied in place.
///
/// Expanded as H - rho (s Hy^T + Hy s^T) + (rho^2 y^T H y + rho) s s^T, which
/// touches each packed entry once.
inline void apply_bfgs_inverse_update(SymmetricMatrix& h, const CurvaturePair& pair) {
    detail::require_same_size(h.order(), pair.s.size(), "bfgs_inverse_update");
    detail::require_same_size(h.order(), pair.y.size(), "bfgs_inverse_update");
    if (!(pair.sy > 0.0))
        throw CurvatureContractError("bfgs_inverse_update: curvature pair has s.y <= 0");

    const double rho = 1.0 / pair.sy;
    const DenseVector hy = h.multiply(pair.y);
    const double yhy = dot(pair.y, hy);
    const double ss_coef = rho * rho * yhy + rho;
    const std::size_t n = h.order();
    for (std::size_t j = 0; j < n; ++j) {
        const double sj = pair.s[j];
        const double hyj = hy[j];
        for (std::size_t i = 0; i <= j; ++i) {
            h.ref(i, j) += -rho * (pair.s[i] * hyj + hy[i] * sj) + ss_coef * pair.s[i] * sj;
        }
    }
}

inline SymmetricMatrix bfgs_inverse_update(SymmetricMatrix h, const CurvaturePair& pair) {
    apply_bfgs_inverse_update(h, pair);
    return h;
}

/// Ring of the most recent curvature pairs plus the scaling gamma of the
/// initial matrix gamma * I (s.y / y.y of the newest pair, 1 when empty).
class LimitedMemory {
public:
    explicit LimitedMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("LimitedMemory: capacity must be positive");
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }
    double gamma() const noexcept { return gamma_; }
    const std::deque<CurvaturePair>& pairs() const noexcept { return pairs_; }

    void push(CurvaturePair pair) {
        if (!(pair.sy > 0.0)) throw CurvatureContractError("LimitedMemory::push: curvature pair has s.y <= 0");
        if (!pairs_.empty()) detail::require_same_size(pairs_.front().s.size(), pair.s.size(), "LimitedMemory::push");
        const double yy = dot(pair.y, pair.y);
        gamma_ = pair.sy / yy;
        if (pairs_.size() == capacity_) pairs_.pop_front();
        pairs_.push_back(std::move(pair));
    }

    /// Overrides gamma; used to match an explicit dense initial matrix.
    void set_gamma(double gamma) {
        if (!(gamma > 0.0)) throw std::invalid_argument("LimitedMemory::set_gamma: gamma must be positive");
        gamma_ = gamma;
    }

private:
    std::size_t capacity_;
    std::deque<CurvaturePair> pairs_;
    double gamma_ = 1.0;
};

/// H g through the two-loop recursion; the initial matrix is gamma * I.
inline DenseVector two_loop_direction(const LimitedMemory& mem, const DenseVector& g) {
    const auto& pairs = mem.pairs();
    const std::size_t k = pairs.size();
    DenseVector q = g;
    std::vector<double> a(k);
    for (std::size_t j = k; j-- > 0;) {
        const CurvaturePair& pr = pairs[j];
        a[j] = dot(pr.s, q) / pr.sy;
        axpy(-a[j], pr.y, q);
    }
    q *= mem.gamma();
    for (std::size_t j = 0; j < k; ++j) {
        const CurvaturePair& pr = pairs[j];
        const double b = dot(pr.y, q) / pr.sy;
        axpy(a[j] - b, pr.s, q);
    }
    return q;
}

/// Materializes the limited-memory matrix column by column. O(d^2 t);
/// diagnostics only.
inline SymmetricMatrix to_dense(const LimitedMemory& mem, std::size_t order) {
    std::vector<double> rows(order * order);
    DenseVector e(order);
    for (std::size_t j = 0; j < order; ++j) {
        e[j] = 1.0;
        const DenseVector col = two_loop_direction(mem, e);
        for (std::size_t i = 0; i < order; ++i) rows[i * order + j] = col[i];
        e[j] = 0.0;
    }
    return SymmetricMatrix::from_dense(order, rows);
}

struct EigenExtremes {
    double lambda_min = 0.0;
    double lambda_max = 0.0;

    /// lambda_max / lambda_min, or empty when the matrix is not positive definite.
    std::optional<double> condition_number() const {
        if (!(lambda_min > 0.0)) return std::nullopt;
        return lambda_max / lambda_min;
    }
};

/// Smallest and largest eigenvalue of a symmetric matrix. Returns empty when
/// the entries are not finite or the eigen-iteration does not converge.
inline std::optional<EigenExtremes> eigen_extremes(const SymmetricMatrix& a) {
    const std::size_t n = a.order();
    if (n == 0 || !a.all_finite()) return std::nullopt;
    Eigen::MatrixXd dense(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i <= j; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            dense(ii, jj) = dense(jj, ii) = a(i, j);
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) return std::nullopt;
    const auto& ev = solver.eigenvalues();  // ascending
    return EigenExtremes{ev(0), ev(static_cast<Eigen::Index>(n) - 1)};
}

}  // namespace qnoise

#endif  // QNOISE_LINALG_HPP
