#ifndef QNOISE_LINESEARCH_HPP
#define QNOISE_LINESEARCH_HPP

/*
 * Line searches for noisy function and gradient oracles.
 *
 * The noise-tolerant search runs in two phases. The initial phase is a
 * bisection Armijo-Wolfe search on a single parameter alpha = beta that also
 * checks the symmetric noise-control condition
 *
 *     |(g(x + a p) - g(x))^T p| >= 2 (1 + c3) eps_g ||p||
 *
 * between the Armijo and Wolfe tests. When that check fails, or after
 * n_split trials, the split phase adapts the steplength alpha (Armijo
 * backtracking by a factor of 10, or reuse of the best Armijo trial seen so
 * far) and the lengthening parameter beta (doubling, seeded from a local
 * curvature estimate) independently until beta satisfies the signed
 * noise-control condition.
 *
 * The Armijo test is the relaxed four-case form: simple decrease replaces
 * sufficient decrease when g^T p >= -eps_g ||p||, and every trial after the
 * first gets 2 eps_f of slack.
 *
 * The classical bisection Armijo-Wolfe search used by the baseline methods
 * lives here as well.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include "qnoise/linalg.hpp"

namespace qnoise {

template <class O>
concept GradientOracle = requires(O& o, const DenseVector& x) {
    { o.eval_f(x) } -> std::convertible_to<double>;
    { o.eval_g(x) } -> std::same_as<DenseVector>;
};

struct LineSearchParams {
    double c1 = 1e-4;
    double c2 = 0.9;
    double c3 = 0.5;
    int n_split = 30;
    int max_ls_iters = 60;     ///< function trials across both phases
    int max_lengthening = 30;  ///< gradient trials in the lengthening loop
    std::size_t history = 10;  ///< curvature estimates kept by the tracker

    void validate() const {
        if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw std::invalid_argument("LineSearchParams: need 0 < c1 < c2 < 1");
        if (!(c3 > 0.0)) throw std::invalid_argument("LineSearchParams: c3 must be positive");
        if (n_split <= 0 || max_ls_iters <= 0 || max_lengthening <= 0 || history == 0)
            throw std::invalid_argument("LineSearchParams: budgets must be positive");
    }
};

/// Everything a search needs to know about the current iterate.
struct LineSearchContext {
    const DenseVector& x;
    const DenseVector& p;
    double f_x;
    const DenseVector& g_x;
    double gtp;
    double p_norm;
    double eps_f;
    double eps_g;

    static LineSearchContext make(const DenseVector& x, const DenseVector& p, double f_x, const DenseVector& g_x,
                                  double eps_f, double eps_g) {
        return {x, p, f_x, g_x, dot(g_x, p), norm2(p), eps_f, eps_g};
    }
};

/// Noise-control test. `symmetric` compares the absolute directional
/// derivative difference (initial phase); otherwise the signed value.
inline bool noise_control_holds(double dgp, double p_norm, double eps_g, double c3, bool symmetric) {
    const double threshold = 2.0 * (1.0 + c3) * eps_g * p_norm;
    return (symmetric ? std::abs(dgp) : dgp) >= threshold;
}

inline bool noise_control_holds(const DenseVector& g_new, const DenseVector& g_old, const DenseVector& p,
                                double eps_g, double c3, bool symmetric) {
    return noise_control_holds(dot(g_new - g_old, p), norm2(p), eps_g, c3, symmetric);
}

/// Relaxed Armijo test for the i-th function trial of a search.
inline bool relaxed_armijo(int i, double f_new, double f_old, double gtp, double alpha, double eps_f, double eps_g,
                           double p_norm, double c1) {
    const double slack = i >= 1 ? 2.0 * eps_f : 0.0;
    const bool reliable = gtp < -eps_g * p_norm;
    if (reliable) return f_new <= f_old + c1 * alpha * gtp + slack;
    return f_new < f_old + slack;
}

/// Rolling minimum of the last `history` curvature estimates
/// mu_j = (g(x_j + beta_j p_j) - g(x_j))^T p_j / (beta_j ||p_j||^2).
class CurvatureTracker {
public:
    explicit CurvatureTracker(std::size_t history = 10) : history_(history) {
        if (history == 0) throw std::invalid_argument("CurvatureTracker: history must be positive");
    }

    std::size_t capacity() const noexcept { return history_; }
    const std::deque<double>& values() const noexcept { return ring_; }

    std::optional<double> estimate() const {
        if (ring_.empty()) return std::nullopt;
        return *std::min_element(ring_.begin(), ring_.end());
    }

    /// Records mu for a lengthening parameter only when it satisfied both the
    /// Wolfe and the noise-control conditions.
    void update(double beta, double dgp, double p_norm_sq, bool wolfe_held, bool noise_held) {
        if (!(wolfe_held && noise_held)) return;
        const double mu = dgp / (beta * p_norm_sq);
        if (!(mu > 0.0) || !std::isfinite(mu)) return;
        push(mu);
    }

    void update(double beta, const DenseVector& p, const DenseVector& g_new, const DenseVector& g_old,
                bool wolfe_held, bool noise_held) {
        update(beta, dot(g_new - g_old, p), dot(p, p), wolfe_held, noise_held);
    }

    void push(double mu) {
        if (!(mu > 0.0)) throw std::invalid_argument("CurvatureTracker: estimates must be positive");
        if (ring_.size() == history_) ring_.pop_front();
        ring_.push_back(mu);
    }

private:
    std::size_t history_;
    std::deque<double> ring_;
};

/// One probed point along the search direction.
struct Trial {
    double alpha = 0.0;
    double f = 0.0;
    std::optional<DenseVector> g;
};

/// State handed from the initial phase to the split phase.
struct SplitTrigger {
    double alpha = 1.0;                  ///< last alpha tried
    double beta = 1.0;                   ///< starting lengthening parameter
    std::optional<DenseVector> g_beta;   ///< gradient at x + beta p when already known
    std::optional<Trial> best;           ///< best Armijo-satisfying trial so far
    int trials_used = 0;                 ///< function trials consumed before the split
    bool noise_control_failed = false;   ///< false when the n_split budget ran out
};

struct InitialResult {
    std::optional<Trial> accepted;  ///< alpha = beta satisfying all three conditions
    SplitTrigger trigger;           ///< meaningful only when `accepted` is empty
    int f_trials = 0;
    int g_trials = 0;
};

enum class SearchPhase { InitialAccepted, SplitCompleted, AlphaFailed, BetaFailed };

inline const char* to_string(SearchPhase p) {
    switch (p) {
        case SearchPhase::InitialAccepted: return "initial";
        case SearchPhase::SplitCompleted: return "split";
        case SearchPhase::AlphaFailed: return "alpha_failed";
        case SearchPhase::BetaFailed: return "beta_failed";
    }
    return "?";
}

/// Result of the two-phase search. AlphaFailed wins over a missing beta;
/// `beta` is still reported for AlphaFailed when lengthening succeeded.
struct LineSearchOutcome {
    double alpha = 0.0;
    double f_alpha = 0.0;
    std::optional<DenseVector> g_alpha;
    std::optional<double> beta;
    std::optional<DenseVector> g_beta;
    SearchPhase phase = SearchPhase::InitialAccepted;
    int f_trials = 0;
    int g_trials = 0;
    bool split = false;
    bool alpha_was_best_reuse = false;
};

/// Initial phase: bisection on alpha = beta, starting from alpha0.
template <GradientOracle O>
InitialResult initial_phase(O& oracle, const LineSearchContext& ctx, const LineSearchParams& params,
                            double alpha0 = 1.0) {
    InitialResult out;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double alpha = alpha0;
    std::optional<Trial> best;

    for (int i = 0; i < params.n_split; ++i) {
        const DenseVector xt = along(ctx.x, alpha, ctx.p);
        const double ft = oracle.eval_f(xt);
        ++out.f_trials;
        out.trigger.alpha = alpha;
        out.trigger.g_beta.reset();

        if (!relaxed_armijo(i, ft, ctx.f_x, ctx.gtp, alpha, ctx.eps_f, ctx.eps_g, ctx.p_norm, params.c1)) {
            hi = alpha;
            alpha = 0.5 * (hi + lo);
            continue;
        }

        DenseVector gt = oracle.eval_g(xt);
        ++out.g_trials;
        const double gtp_new = dot(gt, ctx.p);
        const double dgp = gtp_new - ctx.gtp;
        if (!best || ft < best->f) best = Trial{alpha, ft, gt};

        if (!noise_control_holds(dgp, ctx.p_norm, ctx.eps_g, params.c3, true)) {
            out.trigger.g_beta = std::move(gt);
            out.trigger.noise_control_failed = true;
            break;
        }
        if (gtp_new < params.c2 * ctx.gtp) {
            lo = alpha;
            alpha = std::isinf(hi) ? 2.0 * alpha : 0.5 * (hi + lo);
            out.trigger.g_beta = std::move(gt);
            continue;
        }
        out.accepted = Trial{alpha, ft, std::move(gt)};
        return out;
    }

    out.trigger.beta = out.trigger.alpha;
    out.trigger.best = std::move(best);
    out.trigger.trials_used = out.f_trials;
    return out;
}

/// Split phase: independent alpha and beta adaptation.
template <GradientOracle O>
LineSearchOutcome split_phase(O& oracle, const LineSearchContext& ctx, const LineSearchParams& params,
                              const CurvatureTracker& tracker, SplitTrigger start) {
    LineSearchOutcome out;
    out.split = true;

    // Steplength.
    bool alpha_ok = false;
    if (start.best) {
        out.alpha = start.best->alpha;
        out.f_alpha = start.best->f;
        out.g_alpha = std::move(start.best->g);
        out.alpha_was_best_reuse = true;
        alpha_ok = true;
    } else {
        double alpha = start.alpha;
        for (int i = std::max(start.trials_used, 1); i < params.max_ls_iters; ++i) {
            alpha /= 10.0;
            const double ft = oracle.eval_f(along(ctx.x, alpha, ctx.p));
            ++out.f_trials;
            if (relaxed_armijo(i, ft, ctx.f_x, ctx.gtp, alpha, ctx.eps_f, ctx.eps_g, ctx.p_norm, params.c1)) {
                out.alpha = alpha;
                out.f_alpha = ft;
                alpha_ok = true;
                break;
            }
        }
        if (!alpha_ok) {
            out.alpha = 0.0;
            out.f_alpha = ctx.f_x;
        }
    }

    // Lengthening.
    const auto signed_holds = [&](const DenseVector& gb) {
        return noise_control_holds(dot(gb, ctx.p) - ctx.gtp, ctx.p_norm, ctx.eps_g, params.c3, false);
    };
    const std::optional<double> mu = tracker.estimate();
    const double beta_bar =
        mu ? 2.0 * (1.0 + params.c3) * ctx.eps_g / (*mu * ctx.p_norm) : 0.0;

    double beta = start.beta;
    std::optional<DenseVector> g_beta;
    if (start.g_beta && signed_holds(*start.g_beta)) {
        g_beta = std::move(start.g_beta);
    } else {
        // The starting beta is probed only when nothing is known about it;
        // with a curvature estimate the first probe is max(2 beta, beta_bar).
        bool probe_start = !start.g_beta && !mu;
        for (int j = 0; j < params.max_lengthening; ++j) {
            if (!probe_start) beta = std::max(2.0 * beta, beta_bar);
            probe_start = false;
            DenseVector gb = oracle.eval_g(along(ctx.x, beta, ctx.p));
            ++out.g_trials;
            if (signed_holds(gb)) {
                g_beta = std::move(gb);
                break;
            }
        }
    }

    if (g_beta) {
        out.beta = beta;
        out.g_beta = std::move(g_beta);
    }
    if (!alpha_ok)
        out.phase = SearchPhase::AlphaFailed;
    else if (!out.beta)
        out.phase = SearchPhase::BetaFailed;
    else
        out.phase = SearchPhase::SplitCompleted;
    return out;
}

/// Full noise-tolerant search. Feeds the tracker with every returned beta
/// that also satisfies the Wolfe condition.
template <GradientOracle O>
LineSearchOutcome two_phase_search(O& oracle, const LineSearchContext& ctx, const LineSearchParams& params,
                                   CurvatureTracker& tracker) {
    InitialResult init = initial_phase(oracle, ctx, params);
    LineSearchOutcome out;
    if (init.accepted) {
        out.alpha = init.accepted->alpha;
        out.f_alpha = init.accepted->f;
        out.g_alpha = std::move(init.accepted->g);
        out.beta = out.alpha;
        out.g_beta = out.g_alpha;
        out.phase = SearchPhase::InitialAccepted;
    } else {
        out = split_phase(oracle, ctx, params, tracker, std::move(init.trigger));
    }
    out.f_trials += init.f_trials;
    out.g_trials += init.g_trials;

    if (out.beta) {
        const double gtp_beta = dot(*out.g_beta, ctx.p);
        const double dgp = gtp_beta - ctx.gtp;
        const bool wolfe = gtp_beta >= params.c2 * ctx.gtp;
        const bool noise = noise_control_holds(dgp, ctx.p_norm, ctx.eps_g, params.c3, true);
        tracker.update(*out.beta, dgp, ctx.p_norm * ctx.p_norm, wolfe, noise);
    }
    return out;
}

struct BisectionOutcome {
    bool success = false;
    Trial accepted;                 ///< Armijo-Wolfe point, gradient included
    std::optional<Trial> fallback;  ///< lowest f with f <= f(x) when the search failed
    int f_trials = 0;
    int g_trials = 0;
};

/// Classical bisection Armijo-Wolfe search on the observed values, with no
/// interpolation.
template <GradientOracle O>
BisectionOutcome armijo_wolfe_bisection(O& oracle, const LineSearchContext& ctx, const LineSearchParams& params,
                                        double alpha0 = 1.0) {
    BisectionOutcome out;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double alpha = alpha0;
    for (int i = 0; i < params.max_ls_iters; ++i) {
        const DenseVector xt = along(ctx.x, alpha, ctx.p);
        const double ft = oracle.eval_f(xt);
        ++out.f_trials;
        if (ft <= ctx.f_x && (!out.fallback || ft < out.fallback->f)) out.fallback = Trial{alpha, ft, std::nullopt};

        if (ft > ctx.f_x + params.c1 * alpha * ctx.gtp) {
            hi = alpha;
            alpha = 0.5 * (hi + lo);
            continue;
        }
        DenseVector gt = oracle.eval_g(xt);
        ++out.g_trials;
        if (out.fallback && out.fallback->alpha == alpha) out.fallback->g = gt;
        if (dot(gt, ctx.p) < params.c2 * ctx.gtp) {
            lo = alpha;
            alpha = std::isinf(hi) ? 2.0 * alpha : 0.5 * (hi + lo);
            continue;
        }
        out.success = true;
        out.accepted = Trial{alpha, ft, std::move(gt)};
        out.fallback.reset();
        return out;
    }
    return out;
}

}  // namespace qnoise

#endif  // QNOISE_LINESEARCH_HPP
