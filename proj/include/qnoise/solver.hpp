#ifndef QNOISE_SOLVER_HPP
#define QNOISE_SOLVER_HPP

/*
 * BFGS and L-BFGS drivers for noisy oracles.
 *
 * Six methods share one loop:
 *   BFGS, LBFGS            classical updates after a bisection Armijo-Wolfe search
 *   BFGS_SKIP, LBFGS_SKIP  same, but the update is dropped when
 *                          (g(x + a p) - g(x))^T p < 2 eps_g ||p||
 *   BFGS_E, LBFGS_E        two-phase search; the step uses alpha, the
 *                          curvature pair (beta p, g(x + beta p) - g(x)) uses
 *                          the lengthening parameter beta
 *
 * The trace records true objective and gradient values for benchmarking; the
 * iteration itself only sees the oracle.
 */

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qnoise/linalg.hpp"
#include "qnoise/linesearch.hpp"
#include "qnoise/noise.hpp"
#include "qnoise/problems.hpp"

namespace qnoise {

enum class Method { BFGS, LBFGS, BFGS_SKIP, LBFGS_SKIP, BFGS_E, LBFGS_E };

inline constexpr bool is_limited_memory(Method m) {
    return m == Method::LBFGS || m == Method::LBFGS_SKIP || m == Method::LBFGS_E;
}
inline constexpr bool is_noise_tolerant(Method m) { return m == Method::BFGS_E || m == Method::LBFGS_E; }
inline constexpr bool is_skipping(Method m) { return m == Method::BFGS_SKIP || m == Method::LBFGS_SKIP; }

inline const char* to_string(Method m) {
    switch (m) {
        case Method::BFGS: return "BFGS";
        case Method::LBFGS: return "LBFGS";
        case Method::BFGS_SKIP: return "BFGS_SKIP";
        case Method::LBFGS_SKIP: return "LBFGS_SKIP";
        case Method::BFGS_E: return "BFGS_E";
        case Method::LBFGS_E: return "LBFGS_E";
    }
    return "?";
}

/// Accepts the canonical names and the hyphenated spellings (L-BFGS-E, ...).
inline std::optional<Method> parse_method(std::string_view name) {
    std::string key;
    for (char c : name)
        if (c != '-' && c != '_' && c != ' ' && c != '(' && c != ')') key += static_cast<char>(std::toupper(c));
    if (key == "BFGS") return Method::BFGS;
    if (key == "LBFGS") return Method::LBFGS;
    if (key == "BFGSSKIP" || key == "BFGSSKIPS") return Method::BFGS_SKIP;
    if (key == "LBFGSSKIP" || key == "LBFGSSKIPS") return Method::LBFGS_SKIP;
    if (key == "BFGSE") return Method::BFGS_E;
    if (key == "LBFGSE") return Method::LBFGS_E;
    return std::nullopt;
}

struct Diagnostics {
    bool condition_number = false;
    bool eigen_extremes = false;
    bool any() const noexcept { return condition_number || eigen_extremes; }
};

struct Termination {
    std::uint64_t max_iters = 1000;
    std::optional<std::uint64_t> g_eval_budget;
    /// Stop once phi(x) - phi* <= eps_f or ||grad phi(x)|| <= eps_g, measured
    /// with true values and true noise bounds. Benchmarking only.
    bool noise_thresholds = false;
    /// Consecutive iterations without a step before the run stops; 0 never stops.
    int stall_limit = 2;
};

struct SolverConfig {
    Method method = Method::BFGS_E;
    std::size_t memory = 10;
    LineSearchParams ls;
    Diagnostics diagnostics;
    Termination termination;

    void validate() const {
        ls.validate();
        if (is_limited_memory(method) && memory == 0) throw std::invalid_argument("SolverConfig: memory must be positive");
        if (termination.stall_limit < 0) throw std::invalid_argument("SolverConfig: stall_limit must be >= 0");
    }
};

enum class PairAction { None, Updated, Skipped, Lengthened };

inline const char* to_string(PairAction a) {
    switch (a) {
        case PairAction::None: return "";
        case PairAction::Updated: return "updated";
        case PairAction::Skipped: return "skipped";
        case PairAction::Lengthened: return "lengthened";
    }
    return "";
}

enum class TerminationReason { MaxIterations, GradientBudget, NoiseThreshold, Stationary, Stagnation, NumericalFailure };

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::MaxIterations: return "max_iterations";
        case TerminationReason::GradientBudget: return "gradient_budget";
        case TerminationReason::NoiseThreshold: return "noise_threshold";
        case TerminationReason::Stationary: return "stationary_point";
        case TerminationReason::Stagnation: return "line_search_stagnation";
        case TerminationReason::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

/// Row k describes x_k and the step that produced it (empty for k = 0).
struct IterationRecord {
    std::uint64_t k = 0;
    double phi_true = 0.0;
    double gap = 0.0;
    double grad_norm_true = 0.0;
    double f_noisy = 0.0;
    std::optional<double> alpha;
    std::optional<double> beta;
    bool split_active = false;
    std::uint64_t cum_f_evals = 0;
    std::uint64_t cum_g_evals = 0;
    std::optional<double> kappa_h;
    std::optional<double> lambda_min_b;
    std::optional<double> lambda_max_b;
    PairAction pair_action = PairAction::None;
};

struct RunTrace {
    std::vector<IterationRecord> records;
    TerminationReason reason = TerminationReason::MaxIterations;
    std::optional<std::uint64_t> first_split_k;
    std::uint64_t bound_violations = 0;

    std::uint64_t iterations() const { return records.empty() ? 0 : records.back().k; }
    const IterationRecord& last() const { return records.back(); }
};

struct DirectionEvent {
    std::uint64_t k;
    const DenseVector& x;
    const DenseVector& g;   ///< observed gradient at x_k
    const DenseVector& hg;  ///< H_k g, so p = -hg
};

struct PairEvent {
    std::uint64_t k;
    const DenseVector& x;
    const DenseVector& p;
    const CurvaturePair& pair;
    PairAction action;
    bool from_split;
};

/// Optional hooks for tests and diagnostics.
struct SolverObserver {
    std::function<void(const DirectionEvent&)> on_direction;
    std::function<void(const PairEvent&)> on_pair;
};

/// Update-skipping test with c3 = 0; true means the update must be skipped.
inline bool skip_condition(double dgp, double p_norm, double eps_g) { return dgp < 2.0 * eps_g * p_norm; }

inline bool skip_condition(const DenseVector& g_new, const DenseVector& g_old, const DenseVector& p, double eps_g) {
    return skip_condition(dot(g_new - g_old, p), norm2(p), eps_g);
}

/// Dense inverse-Hessian approximation or its limited-memory counterpart.
class InverseHessian {
public:
    static InverseHessian dense(std::size_t d) { return InverseHessian(SymmetricMatrix::identity(d)); }
    static InverseHessian limited(std::size_t d, std::size_t memory) { return InverseHessian(LimitedMemory(memory), d); }

    bool is_dense() const noexcept { return std::holds_alternative<SymmetricMatrix>(h_); }
    const SymmetricMatrix* dense_matrix() const noexcept { return std::get_if<SymmetricMatrix>(&h_); }
    const LimitedMemory* memory() const noexcept { return std::get_if<LimitedMemory>(&h_); }

    DenseVector apply(const DenseVector& g) const {
        if (auto* m = std::get_if<SymmetricMatrix>(&h_)) return m->multiply(g);
        return two_loop_direction(std::get<LimitedMemory>(h_), g);
    }

    /// Applies the pair unless the result would not be finite (s.y underflow
    /// near a stationary point). Returns whether the update happened.
    bool update(const CurvaturePair& pair) {
        if (!(pair.sy > 0.0) || !std::isfinite(1.0 / pair.sy)) return false;
        if (auto* m = std::get_if<SymmetricMatrix>(&h_)) {
            SymmetricMatrix next = bfgs_inverse_update(*m, pair);
            if (!next.all_finite()) return false;
            *m = std::move(next);
            return true;
        }
        const double gamma = pair.sy / dot(pair.y, pair.y);
        if (!std::isfinite(gamma) || !(gamma > 0.0)) return false;
        std::get<LimitedMemory>(h_).push(pair);
        return true;
    }

    std::optional<EigenExtremes> extremes() const {
        if (auto* m = std::get_if<SymmetricMatrix>(&h_)) return eigen_extremes(*m);
        return eigen_extremes(to_dense(std::get<LimitedMemory>(h_), d_));
    }

private:
    explicit InverseHessian(SymmetricMatrix m) : d_(m.order()), h_(std::move(m)) {}
    InverseHessian(LimitedMemory mem, std::size_t d) : d_(d), h_(std::move(mem)) {}

    std::size_t d_;
    std::variant<SymmetricMatrix, LimitedMemory> h_;
};

struct SolverState {
    DenseVector x;
    double f_x = 0.0;
    DenseVector g_x;
    InverseHessian h;
    CurvatureTracker tracker;
    std::uint64_t k = 0;
    std::optional<std::uint64_t> first_split_k;
    int consecutive_stalls = 0;
    bool resample = false;
};

/// p = -H g.
inline DenseVector search_direction(const SolverState& state, const DenseVector& g) { return -state.h.apply(g); }

/// Outcome of one iteration, before true-value bookkeeping.
struct StepReport {
    std::optional<double> alpha;
    std::optional<double> beta;
    bool split = false;
    bool step_taken = false;
    PairAction action = PairAction::Skipped;
    std::optional<TerminationReason> stop;
};

class Solver {
public:
    Solver(NoisyOracle& oracle, SolverConfig config, SolverObserver observer = {})
        : oracle_(oracle), config_(std::move(config)), observer_(std::move(observer)),
          state_{oracle.problem().x0, 0.0, DenseVector{},
                 is_limited_memory(config_.method) ? InverseHessian::limited(oracle.dim(), config_.memory)
                                                   : InverseHessian::dense(oracle.dim()),
                 CurvatureTracker(config_.ls.history), 0, std::nullopt, 0, false} {
        config_.validate();
        oracle_.set_iteration(0);
        state_.f_x = oracle_.eval_f(state_.x);
        state_.g_x = oracle_.eval_g(state_.x);
    }

    const SolverState& state() const noexcept { return state_; }
    const SolverConfig& config() const noexcept { return config_; }

    /// One iteration x_k -> x_{k+1}.
    StepReport iterate() {
        oracle_.set_iteration(state_.k);
        if (state_.resample) {
            state_.f_x = oracle_.eval_f(state_.x);
            state_.g_x = oracle_.eval_g(state_.x);
            state_.resample = false;
        }

        StepReport rep;
        const DenseVector hg = state_.h.apply(state_.g_x);
        if (!hg.all_finite() || !std::isfinite(state_.f_x)) {
            rep.stop = TerminationReason::NumericalFailure;
            return rep;
        }
        const DenseVector p = -hg;
        if (std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; })) {
            rep.stop = TerminationReason::Stationary;
            return rep;
        }
        if (observer_.on_direction) observer_.on_direction(DirectionEvent{state_.k, state_.x, state_.g_x, hg});

        const NoiseBounds eps = oracle_.reported_bounds();
        const auto ctx = LineSearchContext::make(state_.x, p, state_.f_x, state_.g_x, eps.eps_f, eps.eps_g);

        if (is_noise_tolerant(config_.method))
            iterate_noise_tolerant(ctx, rep);
        else
            iterate_classical(ctx, rep);

        if (rep.split && !state_.first_split_k) state_.first_split_k = state_.k;
        ++state_.k;
        if (rep.step_taken) {
            state_.consecutive_stalls = 0;
        } else {
            ++state_.consecutive_stalls;
            state_.resample = true;
            if (config_.termination.stall_limit > 0 && state_.consecutive_stalls >= config_.termination.stall_limit)
                rep.stop = TerminationReason::Stagnation;
        }
        if (!state_.x.all_finite()) rep.stop = TerminationReason::NumericalFailure;
        return rep;
    }

private:
    void apply_pair(const LineSearchContext& ctx, CurvaturePair pair, PairAction action, bool from_split,
                    StepReport& rep) {
        if (action != PairAction::Skipped && !state_.h.update(pair)) action = PairAction::Skipped;
        rep.action = action;
        if (observer_.on_pair) observer_.on_pair(PairEvent{state_.k, state_.x, ctx.p, pair, action, from_split});
    }

    void move_to(const LineSearchContext& ctx, double alpha, double f_new, std::optional<DenseVector> g_new) {
        DenseVector x_new = along(state_.x, alpha, ctx.p);
        state_.g_x = g_new ? std::move(*g_new) : oracle_.eval_g(x_new);
        state_.x = std::move(x_new);
        state_.f_x = f_new;
    }

    void iterate_noise_tolerant(const LineSearchContext& ctx, StepReport& rep) {
        LineSearchOutcome out = two_phase_search(oracle_, ctx, config_.ls, state_.tracker);
        rep.split = out.split;
        rep.beta = out.beta;
        rep.step_taken = out.phase != SearchPhase::AlphaFailed;
        rep.alpha = rep.step_taken ? out.alpha : 0.0;

        if (out.beta) {
            CurvaturePair pair = CurvaturePair::make(*out.beta * ctx.p, *out.g_beta - ctx.g_x);
            const PairAction action =
                pair.sy > 0.0 ? (out.split ? PairAction::Lengthened : PairAction::Updated) : PairAction::Skipped;
            apply_pair(ctx, std::move(pair), action, out.split, rep);
        }
        if (rep.step_taken) move_to(ctx, out.alpha, out.f_alpha, std::move(out.g_alpha));
    }

    void iterate_classical(const LineSearchContext& ctx, StepReport& rep) {
        BisectionOutcome ls = armijo_wolfe_bisection(oracle_, ctx, config_.ls);
        std::optional<Trial> chosen;
        if (ls.success)
            chosen = std::move(ls.accepted);
        else if (ls.fallback)
            chosen = std::move(ls.fallback);
        if (!chosen) {
            rep.alpha = 0.0;
            return;
        }
        if (!chosen->g) chosen->g = oracle_.eval_g(along(ctx.x, chosen->alpha, ctx.p));

        rep.step_taken = true;
        rep.alpha = chosen->alpha;
        rep.beta = chosen->alpha;
        CurvaturePair pair = CurvaturePair::make(chosen->alpha * ctx.p, *chosen->g - ctx.g_x);
        PairAction action = PairAction::Updated;
        if (is_skipping(config_.method) && skip_condition(dot(pair.y, ctx.p), ctx.p_norm, ctx.eps_g))
            action = PairAction::Skipped;
        else if (!(pair.sy > 1e-12 * norm2(pair.s) * norm2(pair.y)))
            action = PairAction::Skipped;
        apply_pair(ctx, std::move(pair), action, false, rep);
        move_to(ctx, chosen->alpha, chosen->f, std::move(chosen->g));
    }

    NoisyOracle& oracle_;
    SolverConfig config_;
    SolverObserver observer_;
    SolverState state_;
};

namespace detail {
inline IterationRecord observe(const NoisyOracle& oracle, const SolverState& st, const Diagnostics& diag) {
    const Problem& prob = oracle.problem();
    IterationRecord r;
    r.k = st.k;
    r.phi_true = prob.eval_f(st.x);
    r.gap = r.phi_true - prob.phi_star;
    r.grad_norm_true = norm2(prob.eval_g(st.x));
    r.f_noisy = st.f_x;
    r.cum_f_evals = oracle.f_evals();
    r.cum_g_evals = oracle.g_evals();
    if (diag.any()) {
        if (auto ex = st.h.extremes()) {
            if (diag.condition_number) r.kappa_h = ex->condition_number();
            if (diag.eigen_extremes && ex->lambda_min > 0.0) {
                r.lambda_min_b = 1.0 / ex->lambda_max;
                r.lambda_max_b = 1.0 / ex->lambda_min;
            }
        }
    }
    return r;
}
}  // namespace detail

/// Runs one method on a noisy oracle until a termination rule fires.
inline RunTrace run(NoisyOracle& oracle, const SolverConfig& config, const SolverObserver& observer = {}) {
    Solver solver(oracle, config, observer);
    const Termination& term = config.termination;
    const NoiseBounds true_eps = oracle.true_bounds();

    RunTrace trace;
    trace.records.push_back(detail::observe(oracle, solver.state(), config.diagnostics));
    for (;;) {
        const IterationRecord& last = trace.records.back();
        if (last.k >= term.max_iters) {
            trace.reason = TerminationReason::MaxIterations;
            break;
        }
        if (term.g_eval_budget && last.cum_g_evals >= *term.g_eval_budget) {
            trace.reason = TerminationReason::GradientBudget;
            break;
        }
        if (term.noise_thresholds && (last.gap <= true_eps.eps_f || last.grad_norm_true <= true_eps.eps_g)) {
            trace.reason = TerminationReason::NoiseThreshold;
            break;
        }

        const StepReport rep = solver.iterate();
        if (rep.stop == TerminationReason::Stationary) {
            trace.reason = *rep.stop;
            break;
        }
        if (rep.stop == TerminationReason::NumericalFailure && solver.state().k == last.k) {
            trace.reason = *rep.stop;
            break;
        }
        IterationRecord rec = detail::observe(oracle, solver.state(), config.diagnostics);
        rec.alpha = rep.alpha;
        rec.beta = rep.beta;
        rec.split_active = rep.split;
        rec.pair_action = rep.action;
        trace.records.push_back(std::move(rec));
        if (rep.stop) {
            trace.reason = *rep.stop;
            break;
        }
    }
    trace.first_split_k = solver.state().first_split_k;
    trace.bound_violations = oracle.bound_violations();
    return trace;
}

inline RunTrace run(const Problem& problem, const NoiseSpec& noise, const SolverConfig& config,
                    const SolverObserver& observer = {}) {
    NoisyOracle oracle(problem, noise);
    return run(oracle, config, observer);
}

}  // namespace qnoise

#endif  // QNOISE_SOLVER_HPP
