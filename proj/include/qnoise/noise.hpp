#ifndef QNOISE_NOISE_HPP
#define QNOISE_NOISE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "qnoise/linalg.hpp"
#include "qnoise/problems.hpp"
#include "qnoise/random.hpp"

namespace qnoise {

enum class NoiseSchedule { Constant, Intermittent };

/// Which state an intermittent schedule starts in.
enum class NoisePhase { Noisy, Clean };

struct NoiseSpec {
    double xi_f = 0.0;  ///< half-width of the uniform function noise
    double xi_g = 0.0;  ///< per-coordinate half-width of the uniform gradient noise
    NoiseSchedule schedule = NoiseSchedule::Constant;
    std::uint64_t period = 1;  ///< iterations per block for the intermittent schedule
    NoisePhase phase = NoisePhase::Noisy;
    std::uint64_t seed = 0;
    double omega = 1.0;  ///< misestimation factor applied to the reported gradient bound

    void validate() const {
        if (!std::isfinite(xi_f) || xi_f < 0.0) throw std::invalid_argument("NoiseSpec: xi_f must be finite and >= 0");
        if (!std::isfinite(xi_g) || xi_g < 0.0) throw std::invalid_argument("NoiseSpec: xi_g must be finite and >= 0");
        if (!(omega > 0.0) || !std::isfinite(omega)) throw std::invalid_argument("NoiseSpec: omega must be positive");
        if (schedule == NoiseSchedule::Intermittent && period == 0)
            throw std::invalid_argument("NoiseSpec: intermittent period must be positive");
    }
};

struct NoiseBounds {
    double eps_f = 0.0;
    double eps_g = 0.0;
};

/// A problem observed through bounded uniform noise,
///   f(x) = phi(x) + eps,  eps ~ U(-xi_f, xi_f)
///   g(x) = grad phi(x) + e,  e_i ~ U(-xi_g, xi_g) i.i.d.
/// Noise is drawn fresh on every call from a counter-based stream keyed by
/// (seed, stream, call index, coordinate), so a run's noise depends only on
/// its seed and call sequence.
class NoisyOracle {
public:
    NoisyOracle(Problem problem, NoiseSpec spec) : problem_(std::move(problem)), spec_(spec) {
        spec_.validate();
        g_bound_ = std::sqrt(static_cast<double>(problem_.dim)) * spec_.xi_g;
    }

    const Problem& problem() const noexcept { return problem_; }
    const NoiseSpec& spec() const noexcept { return spec_; }
    std::size_t dim() const noexcept { return problem_.dim; }

    /// Current solver iteration; drives the intermittent schedule.
    void set_iteration(std::uint64_t k) noexcept { iteration_ = k; }
    std::uint64_t iteration() const noexcept { return iteration_; }

    bool noise_active() const noexcept {
        if (spec_.schedule == NoiseSchedule::Constant) return true;
        const bool even_block = (iteration_ / spec_.period) % 2 == 0;
        return spec_.phase == NoisePhase::Noisy ? even_block : !even_block;
    }

    double eval_f(const DenseVector& x) {
        const std::uint64_t idx = f_evals_++;
        double value = problem_.eval_f(x);
        if (noise_active() && spec_.xi_f > 0.0) {
            const double eps = spec_.xi_f * rng::to_symmetric(rng::keyed(spec_.seed, kFunctionStream, idx, 0));
            if (!(std::abs(eps) <= spec_.xi_f)) ++violations_;
            value += eps;
        }
        return value;
    }

    DenseVector eval_g(const DenseVector& x) {
        const std::uint64_t idx = g_evals_++;
        DenseVector g = problem_.eval_g(x);
        if (noise_active() && spec_.xi_g > 0.0) {
            double sq = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double e = spec_.xi_g * rng::to_symmetric(rng::keyed(spec_.seed, kGradientStream, idx, i));
                sq += e * e;
                g[i] += e;
            }
            if (!(std::sqrt(sq) <= g_bound_)) ++violations_;
        }
        return g;
    }

    /// Bounds handed to the algorithm: eps_f = xi_f, eps_g = omega sqrt(d) xi_g.
    NoiseBounds reported_bounds() const noexcept { return {spec_.xi_f, spec_.omega * g_bound_}; }

    /// Bounds that actually hold for the injected noise (omega not applied).
    NoiseBounds true_bounds() const noexcept { return {spec_.xi_f, g_bound_}; }

    std::uint64_t f_evals() const noexcept { return f_evals_; }
    std::uint64_t g_evals() const noexcept { return g_evals_; }

    /// Number of draws that broke |eps| <= xi_f or ||e|| <= sqrt(d) xi_g.
    std::uint64_t bound_violations() const noexcept { return violations_; }

private:
    static constexpr std::uint64_t kFunctionStream = 1;
    static constexpr std::uint64_t kGradientStream = 2;

    Problem problem_;
    NoiseSpec spec_;
    double g_bound_ = 0.0;
    std::uint64_t iteration_ = 0;
    std::uint64_t f_evals_ = 0;
    std::uint64_t g_evals_ = 0;
    std::uint64_t violations_ = 0;
};

}  // namespace qnoise

#endif  // QNOISE_NOISE_HPP
