#ifndef QNOISE_BENCH_HPP
#define QNOISE_BENCH_HPP

// Experiment harness: run matrices over problems, methods, noise levels and
// seeds; per-run CSV traces; a JSON summary; Morales comparison profiles.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnoise/noise.hpp"
#include "qnoise/problems.hpp"
#include "qnoise/solver.hpp"

namespace qnoise {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Trace CSV

inline constexpr std::string_view kTraceHeader =
    "k,phi_true,gap,grad_norm_true,f_noisy,alpha,beta,split_active,cum_f_evals,cum_g_evals,kappa_H,lambda_min_B,"
    "lambda_max_B,pair_action";

/// Shortest text with 17 significant digits; round-trips exactly.
inline std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
    const auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    os << kTraceHeader << '\n';
    for (const auto& r : trace.records) {
        os << r.k << ',' << format_real(r.phi_true) << ',' << format_real(r.gap) << ','
           << format_real(r.grad_norm_true) << ',' << format_real(r.f_noisy) << ',' << opt(r.alpha) << ','
           << opt(r.beta) << ',' << (r.split_active ? 1 : 0) << ',' << r.cum_f_evals << ',' << r.cum_g_evals << ','
           << opt(r.kappa_h) << ',' << opt(r.lambda_min_b) << ',' << opt(r.lambda_max_b) << ','
           << to_string(r.pair_action) << '\n';
    }
}

namespace detail {
inline double parse_real(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("trace csv: bad real '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_count(std::string_view s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("trace csv: bad integer '" + std::string(s) + "'");
    return v;
}

inline std::optional<double> parse_opt_real(std::string_view s) {
    if (s.empty()) return std::nullopt;
    return parse_real(s);
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}
}  // namespace detail

inline std::vector<IterationRecord> read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kTraceHeader) throw std::runtime_error("trace csv: unexpected header");
    std::vector<IterationRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_fields(line, ',');
        if (f.size() != 14) throw std::runtime_error("trace csv: expected 14 fields");
        IterationRecord r;
        r.k = detail::parse_count(f[0]);
        r.phi_true = detail::parse_real(f[1]);
        r.gap = detail::parse_real(f[2]);
        r.grad_norm_true = detail::parse_real(f[3]);
        r.f_noisy = detail::parse_real(f[4]);
        r.alpha = detail::parse_opt_real(f[5]);
        r.beta = detail::parse_opt_real(f[6]);
        r.split_active = f[7] == "1";
        r.cum_f_evals = detail::parse_count(f[8]);
        r.cum_g_evals = detail::parse_count(f[9]);
        r.kappa_h = detail::parse_opt_real(f[10]);
        r.lambda_min_b = detail::parse_opt_real(f[11]);
        r.lambda_max_b = detail::parse_opt_real(f[12]);
        if (f[13] == "updated") r.pair_action = PairAction::Updated;
        else if (f[13] == "skipped") r.pair_action = PairAction::Skipped;
        else if (f[13] == "lengthened") r.pair_action = PairAction::Lengthened;
        else if (f[13].empty()) r.pair_action = PairAction::None;
        else throw std::runtime_error("trace csv: bad pair_action");
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct RunKey {
    std::string problem;
    Method method = Method::BFGS_E;
    double xi_f = 0.0;
    double xi_g = 0.0;
    double omega = 1.0;
    std::uint64_t seed = 0;

    auto tie() const { return std::tie(problem, method, xi_f, xi_g, omega, seed); }
    friend bool operator<(const RunKey& a, const RunKey& b) { return a.tie() < b.tie(); }
    friend bool operator==(const RunKey& a, const RunKey& b) { return a.tie() == b.tie(); }
};

inline std::string short_real(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

/// File stem for a run, e.g. ARWHEAD__BFGS_E__xf0__xg0.001__w1__s3.
inline std::string trace_file_stem(const RunKey& key) {
    std::string stem = key.problem + "__" + to_string(key.method) + "__xf" + short_real(key.xi_f) + "__xg" +
                       short_real(key.xi_g) + "__w" + short_real(key.omega) + "__s" + std::to_string(key.seed);
    for (char& c : stem)
        if (c == '/' || c == ' ' || c == '\\') c = '_';
    return stem;
}

struct ExperimentConfig {
    std::vector<std::string> problems;
    std::vector<Method> methods;
    std::vector<double> xi_f{0.0};
    std::vector<double> xi_g{0.0};
    std::vector<double> omega{1.0};
    NoiseSchedule schedule = NoiseSchedule::Constant;
    std::uint64_t n_noise = 1;
    NoisePhase phase = NoisePhase::Noisy;
    std::vector<std::uint64_t> seeds;
    SolverConfig solver;  ///< method field is overridden per run
    std::string out_dir;  ///< empty: no files written
    unsigned threads = 0; ///< 0: hardware concurrency, capped by QN_NOISE_THREADS

    void validate(const ProblemRegistry& registry = default_registry()) const {
        if (problems.empty()) throw ConfigError("config: no problem given");
        for (const auto& p : problems)
            if (!registry.contains(p)) {
                try {
                    (void)registry.lookup(p);
                } catch (const LookupError& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
            }
        if (methods.empty()) throw ConfigError("config: no method given");
        if (seeds.empty()) throw ConfigError("config: seed list is empty");
        if (xi_f.empty() || xi_g.empty() || omega.empty()) throw ConfigError("config: empty noise list");
        for (double v : xi_f)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("config: xi-f must be finite and >= 0");
        for (double v : xi_g)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("config: xi-g must be finite and >= 0");
        for (double v : omega)
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("config: omega must be positive");
        if (schedule == NoiseSchedule::Intermittent && n_noise == 0) throw ConfigError("config: n-noise must be positive");
        if (solver.termination.max_iters == 0 && !solver.termination.g_eval_budget)
            throw ConfigError("config: need an iteration or gradient-evaluation budget");
        try {
            for (Method m : methods) {
                SolverConfig c = solver;
                c.method = m;
                c.validate();
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }

    /// Run keys in deterministic order.
    std::vector<RunKey> expand() const {
        std::vector<RunKey> keys;
        for (const auto& p : problems)
            for (Method m : methods)
                for (double f : xi_f)
                    for (double g : xi_g)
                        for (double w : omega)
                            for (std::uint64_t s : seeds) keys.push_back(RunKey{p, m, f, g, w, s});
        return keys;
    }

    NoiseSpec noise_for(const RunKey& key) const {
        NoiseSpec ns;
        ns.xi_f = key.xi_f;
        ns.xi_g = key.xi_g;
        ns.omega = key.omega;
        ns.seed = key.seed;
        ns.schedule = schedule;
        ns.period = n_noise;
        ns.phase = phase;
        return ns;
    }
};

// ---------------------------------------------------------------------------
// Running

struct RunSummary {
    RunKey key;
    bool ok = true;
    std::string error;
    std::string termination;
    std::uint64_t iterations = 0;
    double final_gap = 0.0;
    double final_grad_norm = 0.0;
    std::uint64_t cum_f_evals = 0;
    std::uint64_t cum_g_evals = 0;
    std::optional<std::uint64_t> first_split_k;
    std::optional<std::uint64_t> evals_to_threshold;  ///< gradient evaluations to reach the noise thresholds
    std::uint64_t bound_violations = 0;
    std::string trace_file;
};

/// Gradient evaluations at the first record with gap <= eps_f or
/// ||grad phi|| <= eps_g (true noise bounds).
inline std::optional<std::uint64_t> evals_to_threshold(const RunTrace& trace, const NoiseBounds& eps) {
    for (const auto& r : trace.records)
        if (r.gap <= eps.eps_f || r.grad_norm_true <= eps.eps_g) return r.cum_g_evals;
    return std::nullopt;
}

inline RunSummary summarize(const RunKey& key, const RunTrace& trace, const NoiseBounds& true_eps) {
    RunSummary s;
    s.key = key;
    s.termination = to_string(trace.reason);
    s.ok = trace.reason != TerminationReason::NumericalFailure;
    if (!s.ok) s.error = "numerical failure";
    s.iterations = trace.iterations();
    s.final_gap = trace.last().gap;
    s.final_grad_norm = trace.last().grad_norm_true;
    s.cum_f_evals = trace.last().cum_f_evals;
    s.cum_g_evals = trace.last().cum_g_evals;
    s.first_split_k = trace.first_split_k;
    s.evals_to_threshold = evals_to_threshold(trace, true_eps);
    s.bound_violations = trace.bound_violations;
    return s;
}

/// Runs a single configured experiment cell.
inline RunTrace run_single(const ExperimentConfig& cfg, const RunKey& key,
                           const ProblemRegistry& registry = default_registry()) {
    SolverConfig sc = cfg.solver;
    sc.method = key.method;
    NoisyOracle oracle(registry.lookup(key.problem), cfg.noise_for(key));
    return run(oracle, sc);
}

inline unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("QN_NOISE_THREADS")) {
        const long c = std::strtol(cap, nullptr, 10);
        if (c > 0) n = std::min<unsigned>(n, static_cast<unsigned>(c));
    }
    return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

struct GroupMedian {
    std::string problem;
    Method method;
    double xi_f;
    double xi_g;
    double omega;
    std::size_t seeds;
    double median_final_gap;
    double median_cum_g_evals;
    std::optional<double> median_evals_to_threshold;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ExperimentSummary {
    std::vector<RunSummary> runs;  ///< in run-key order
    std::vector<GroupMedian> groups;

    bool all_ok() const {
        return std::all_of(runs.begin(), runs.end(), [](const RunSummary& r) { return r.ok; });
    }
};

inline std::vector<GroupMedian> group_medians(const std::vector<RunSummary>& runs) {
    std::map<std::tuple<std::string, Method, double, double, double>, std::vector<const RunSummary*>> groups;
    for (const auto& r : runs)
        if (r.ok) groups[{r.key.problem, r.key.method, r.key.xi_f, r.key.xi_g, r.key.omega}].push_back(&r);
    std::vector<GroupMedian> out;
    for (const auto& [k, members] : groups) {
        std::vector<double> gaps, evals, thr;
        for (const auto* r : members) {
            gaps.push_back(r->final_gap);
            evals.push_back(static_cast<double>(r->cum_g_evals));
            if (r->evals_to_threshold) thr.push_back(static_cast<double>(*r->evals_to_threshold));
        }
        GroupMedian g{std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), std::get<4>(k),
                      members.size(), median(gaps), median(evals), std::nullopt};
        if (thr.size() == members.size()) g.median_evals_to_threshold = median(thr);
        out.push_back(g);
    }
    return out;
}

/// Executes every run of the matrix on a bounded worker pool. Traces are
/// written to `<out_dir>/<stem>.csv`; results are assembled in key order, so
/// output does not depend on scheduling.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                        const ProblemRegistry& registry = default_registry()) {
    cfg.validate(registry);
    const std::vector<RunKey> keys = cfg.expand();
    if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

    std::vector<RunSummary> results(keys.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < keys.size(); i = next.fetch_add(1)) {
            const RunKey& key = keys[i];
            RunSummary s;
            try {
                SolverConfig sc = cfg.solver;
                sc.method = key.method;
                NoisyOracle oracle(registry.lookup(key.problem), cfg.noise_for(key));
                const RunTrace trace = run(oracle, sc);
                s = summarize(key, trace, oracle.true_bounds());
                if (!cfg.out_dir.empty()) {
                    s.trace_file = trace_file_stem(key) + ".csv";
                    std::ofstream os(std::filesystem::path(cfg.out_dir) / s.trace_file, std::ios::binary);
                    write_trace_csv(os, trace);
                    if (!os) throw std::runtime_error("cannot write " + s.trace_file);
                }
            } catch (const std::exception& e) {
                s = RunSummary{};
                s.key = key;
                s.ok = false;
                s.error = e.what();
            }
            results[i] = std::move(s);
        }
    };

    const unsigned n = worker_count(cfg.threads, keys.size());
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    ExperimentSummary summary;
    summary.runs = std::move(results);
    summary.groups = group_medians(summary.runs);
    return summary;
}

// ---------------------------------------------------------------------------
// Summary JSON

namespace detail {
template <class T>
nlohmann::json opt_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> json_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}
}  // namespace detail

inline nlohmann::json to_json(const ExperimentSummary& s) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : s.runs) {
        runs.push_back({{"problem", r.key.problem},
                        {"method", to_string(r.key.method)},
                        {"xi_f", r.key.xi_f},
                        {"xi_g", r.key.xi_g},
                        {"omega", r.key.omega},
                        {"seed", r.key.seed},
                        {"ok", r.ok},
                        {"error", r.error},
                        {"termination", r.termination},
                        {"iterations", r.iterations},
                        {"final_gap", r.final_gap},
                        {"final_grad_norm", r.final_grad_norm},
                        {"cum_f_evals", r.cum_f_evals},
                        {"cum_g_evals", r.cum_g_evals},
                        {"first_split_k", detail::opt_json(r.first_split_k)},
                        {"evals_to_threshold", detail::opt_json(r.evals_to_threshold)},
                        {"bound_violations", r.bound_violations},
                        {"trace_file", r.trace_file}});
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : s.groups) {
        groups.push_back({{"problem", g.problem},
                          {"method", to_string(g.method)},
                          {"xi_f", g.xi_f},
                          {"xi_g", g.xi_g},
                          {"omega", g.omega},
                          {"seeds", g.seeds},
                          {"median_final_gap", g.median_final_gap},
                          {"median_cum_g_evals", g.median_cum_g_evals},
                          {"median_evals_to_threshold", detail::opt_json(g.median_evals_to_threshold)}});
    }
    return {{"runs", runs}, {"medians", groups}};
}

inline std::vector<RunSummary> runs_from_json(const nlohmann::json& j) {
    std::vector<RunSummary> out;
    for (const auto& r : j.at("runs")) {
        RunSummary s;
        s.key.problem = r.at("problem").get<std::string>();
        const auto m = parse_method(r.at("method").get<std::string>());
        if (!m) throw std::runtime_error("summary: unknown method");
        s.key.method = *m;
        s.key.xi_f = r.at("xi_f").get<double>();
        s.key.xi_g = r.at("xi_g").get<double>();
        s.key.omega = r.at("omega").get<double>();
        s.key.seed = r.at("seed").get<std::uint64_t>();
        s.ok = r.at("ok").get<bool>();
        s.error = r.value("error", "");
        s.termination = r.value("termination", "");
        s.iterations = r.value<std::uint64_t>("iterations", 0);
        s.final_gap = r.at("final_gap").get<double>();
        s.final_grad_norm = r.value("final_grad_norm", 0.0);
        s.cum_f_evals = r.value<std::uint64_t>("cum_f_evals", 0);
        s.cum_g_evals = r.value<std::uint64_t>("cum_g_evals", 0);
        s.first_split_k = detail::json_opt<std::uint64_t>(r, "first_split_k");
        s.evals_to_threshold = detail::json_opt<std::uint64_t>(r, "evals_to_threshold");
        s.bound_violations = r.value<std::uint64_t>("bound_violations", 0);
        s.trace_file = r.value("trace_file", "");
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Morales profiles

enum class ProfileMode { FinalGap, EvalsToThreshold };

struct ProfilePoint {
    std::string problem;
    double value = 0.0;
};

struct Profile {
    std::vector<ProfilePoint> points;  ///< ascending by value
    std::vector<std::string> warnings;
};

inline constexpr double kGapFloor = 1e-16;

/// Per problem, the seed-average of log2(new / old) for the final gap or the
/// evaluations needed to reach the noise thresholds. Runs spanning several
/// noise cells are profiled per (problem, cell), labelled "P xf.. xg.. w..".
/// Non-positive gaps are clamped to 1e-16. In threshold mode a run that never reached the
/// thresholds counts as infinitely many evaluations (0 when neither did).
inline Profile morales_profile(const std::vector<RunSummary>& runs_new, const std::vector<RunSummary>& runs_old,
                               ProfileMode mode) {
    using Index = std::map<std::string, std::map<std::uint64_t, const RunSummary*>>;
    std::set<std::tuple<double, double, double>> cells;
    for (const auto* runs : {&runs_new, &runs_old})
        for (const auto& r : *runs) cells.emplace(r.key.xi_f, r.key.xi_g, r.key.omega);
    auto label = [multi = cells.size() > 1](const RunKey& k) {
        if (!multi) return k.problem;
        return k.problem + " xf" + short_real(k.xi_f) + " xg" + short_real(k.xi_g) + " w" + short_real(k.omega);
    };
    auto index = [&](const std::vector<RunSummary>& runs, const char* which) {
        Index idx;
        for (const auto& r : runs) {
            const std::string name = label(r.key);
            auto [it, fresh] = idx[name].emplace(r.key.seed, &r);
            if (!fresh)
                throw std::invalid_argument(std::string("morales_profile: duplicate (problem, seed) in ") + which +
                                            " set: " + name + "/" + std::to_string(r.key.seed));
        }
        return idx;
    };
    const Index a = index(runs_new, "new");
    const Index b = index(runs_old, "old");

    std::string diff;
    for (const auto& [p, s] : a)
        if (!b.contains(p)) diff += " +" + p;
    for (const auto& [p, s] : b)
        if (!a.contains(p)) diff += " -" + p;
    if (!diff.empty()) throw std::invalid_argument("morales_profile: problem sets differ (new/old):" + diff);

    Profile prof;
    auto clamp_gap = [&](double g, const std::string& problem) {
        if (g > 0.0) return g;
        prof.warnings.push_back("non-positive gap on " + problem + " clamped to 1e-16");
        return kGapFloor;
    };
    for (const auto& [problem, seeds_new] : a) {
        const auto& seeds_old = b.at(problem);
        std::set<std::uint64_t> sa, sb;
        for (const auto& [s, r] : seeds_new) sa.insert(s);
        for (const auto& [s, r] : seeds_old) sb.insert(s);
        if (sa != sb) throw std::invalid_argument("morales_profile: seed sets differ for " + problem);

        double acc = 0.0;
        for (const auto& [seed, rn] : seeds_new) {
            const RunSummary* ro = seeds_old.at(seed);
            if (mode == ProfileMode::FinalGap) {
                acc += std::log2(clamp_gap(rn->final_gap, problem) / clamp_gap(ro->final_gap, problem));
            } else {
                const auto en = rn->evals_to_threshold;
                const auto eo = ro->evals_to_threshold;
                if (!en && !eo) continue;
                if (!en) acc += std::numeric_limits<double>::infinity();
                else if (!eo) acc -= std::numeric_limits<double>::infinity();
                else acc += std::log2(static_cast<double>(*en) / static_cast<double>(*eo));
            }
        }
        prof.points.push_back({problem, acc / static_cast<double>(seeds_new.size())});
    }
    std::stable_sort(prof.points.begin(), prof.points.end(),
                     [](const ProfilePoint& x, const ProfilePoint& y) { return x.value < y.value; });
    return prof;
}

}  // namespace qnoise

#endif  // QNOISE_BENCH_HPP
