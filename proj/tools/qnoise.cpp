// qnoise: benchmark driver for the noise-tolerant quasi-Newton solvers.
//
//   qnoise run     --problem ARWHEAD --method BFGS_E --xi-g 1e-3 --seeds 1 2 3 --out out/
//   qnoise sweep   --problem ARWHEAD TRIDIA --method BFGS BFGS_E --xi-g 1e-1 1e-3 1e-5 --seeds 1 2 3 4 5
//   qnoise profile --new out/summary.json --new-method BFGS_E --old-method BFGS --mode final-gap
//   qnoise reference --problem ENGVAL1
//   qnoise list
//
// Exit codes: 0 all runs completed, 3 some runs failed, 2 configuration error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qnoise/qnoise.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRunFailed = 3;

struct ExperimentOptions {
    std::vector<std::string> problems;
    std::vector<std::string> methods;
    std::vector<double> xi_f{0.0};
    std::vector<double> xi_g{0.0};
    std::vector<double> omega{1.0};
    std::string schedule = "constant";
    std::uint64_t n_noise = 50;
    std::string noise_phase = "noisy";
    std::vector<std::uint64_t> seeds;
    std::uint64_t max_iters = 1000;
    std::uint64_t g_eval_budget = 0;
    double c1 = 1e-4, c2 = 0.9, c3 = 0.5;
    int n_split = 30;
    std::size_t memory = 10;
    std::size_t history_h = 10;
    int stall_limit = 2;
    bool noise_thresholds = false;
    std::string diagnostics = "none";
    std::string out = "qnoise-out";
    unsigned threads = 0;
};

// Flat key = value files: keys without a section belong to the chosen subcommand.
class FlatConfig : public CLI::ConfigTOML {
public:
    std::string section;

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        for (auto& item : items)
            if (item.parents.empty() && !section.empty()) item.parents = {section};
        return items;
    }
};

void add_experiment_options(CLI::App* app, ExperimentOptions& o, bool single) {
    auto list = [&](CLI::Option* opt) { return single ? opt->expected(1) : opt; };
    list(app->add_option("--problem", o.problems, "Registry problem name(s), e.g. ARWHEAD or QUAD-50-1-100-7"))
        ->required();
    list(app->add_option("--method", o.methods, "BFGS, LBFGS, BFGS_SKIP, LBFGS_SKIP, BFGS_E, LBFGS_E"))->required();
    list(app->add_option("--xi-f", o.xi_f, "Function noise half-width(s)"));
    list(app->add_option("--xi-g", o.xi_g, "Per-coordinate gradient noise half-width(s)"));
    list(app->add_option("--omega", o.omega, "Factor applied to the reported gradient noise bound"));
    app->add_option("--schedule", o.schedule, "Noise schedule")->check(CLI::IsMember({"constant", "intermittent"}));
    app->add_option("--n-noise", o.n_noise, "Block length of the intermittent schedule");
    app->add_option("--noise-phase", o.noise_phase, "First block of the intermittent schedule")
        ->check(CLI::IsMember({"noisy", "clean"}));
    app->add_option("--seeds,--seed", o.seeds, "Noise seed(s)")->required();
    app->add_option("--max-iters", o.max_iters, "Iteration budget");
    app->add_option("--g-eval-budget", o.g_eval_budget, "Gradient evaluation budget (0: none)");
    app->add_option("--c1", o.c1, "Armijo constant");
    app->add_option("--c2", o.c2, "Wolfe constant");
    app->add_option("--c3", o.c3, "Noise-control constant");
    app->add_option("--n-split", o.n_split, "Initial-phase trials before the split");
    app->add_option("--memory", o.memory, "L-BFGS memory t");
    app->add_option("--history-h", o.history_h, "Curvature estimates kept for mu");
    app->add_option("--stall-limit", o.stall_limit, "Consecutive no-step iterations before stopping (0: never)");
    app->add_flag("--noise-thresholds", o.noise_thresholds, "Stop when the true gap or gradient reaches the noise level");
    app->add_option("--diagnostics", o.diagnostics, "Per-iteration H diagnostics")
        ->check(CLI::IsMember({"none", "kappa", "eigen", "all"}));
    app->add_option("--out", o.out, "Output directory for traces and summary.json");
    app->add_option("--threads", o.threads, "Worker threads (0: hardware; capped by QN_NOISE_THREADS)");
}

qnoise::ExperimentConfig to_config(const ExperimentOptions& o) {
    qnoise::ExperimentConfig cfg;
    for (const auto& p : o.problems) cfg.problems.push_back(qnoise::registry_lookup(p).name);
    for (const auto& m : o.methods) {
        const auto parsed = qnoise::parse_method(m);
        if (!parsed) throw qnoise::ConfigError("config: unknown method '" + m + "'");
        cfg.methods.push_back(*parsed);
    }
    cfg.xi_f = o.xi_f;
    cfg.xi_g = o.xi_g;
    cfg.omega = o.omega;
    cfg.schedule = o.schedule == "intermittent" ? qnoise::NoiseSchedule::Intermittent : qnoise::NoiseSchedule::Constant;
    cfg.n_noise = o.n_noise;
    cfg.phase = o.noise_phase == "clean" ? qnoise::NoisePhase::Clean : qnoise::NoisePhase::Noisy;
    cfg.seeds = o.seeds;
    cfg.solver.memory = o.memory;
    cfg.solver.ls.c1 = o.c1;
    cfg.solver.ls.c2 = o.c2;
    cfg.solver.ls.c3 = o.c3;
    cfg.solver.ls.n_split = o.n_split;
    cfg.solver.ls.history = o.history_h;
    cfg.solver.termination.max_iters = o.max_iters;
    if (o.g_eval_budget > 0) cfg.solver.termination.g_eval_budget = o.g_eval_budget;
    cfg.solver.termination.noise_thresholds = o.noise_thresholds;
    cfg.solver.termination.stall_limit = o.stall_limit;
    cfg.solver.diagnostics.condition_number = o.diagnostics == "kappa" || o.diagnostics == "all";
    cfg.solver.diagnostics.eigen_extremes = o.diagnostics == "eigen" || o.diagnostics == "all";
    cfg.out_dir = o.out;
    cfg.threads = o.threads;
    cfg.validate();
    return cfg;
}

int run_experiment_command(const ExperimentOptions& o) {
    qnoise::ExperimentConfig cfg;
    try {
        cfg = to_config(o);
    } catch (const qnoise::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const qnoise::LookupError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfig;
    }

    const qnoise::ExperimentSummary summary = qnoise::run_experiment(cfg);
    const auto path = std::filesystem::path(cfg.out_dir) / "summary.json";
    std::ofstream(path) << qnoise::to_json(summary).dump(2) << '\n';

    std::printf("%-22s %-10s %9s %9s %6s %5s %13s %10s\n", "problem", "method", "xi_f", "xi_g", "omega", "runs",
                "median_gap", "median_g");
    for (const auto& g : summary.groups)
        std::printf("%-22s %-10s %9.2e %9.2e %6.3g %5zu %13.6e %10.0f\n", g.problem.c_str(), qnoise::to_string(g.method),
                    g.xi_f, g.xi_g, g.omega, g.seeds, g.median_final_gap, g.median_cum_g_evals);
    int failed = 0;
    for (const auto& r : summary.runs)
        if (!r.ok) {
            ++failed;
            std::fprintf(stderr, "run failed: %s %s seed %llu: %s\n", r.key.problem.c_str(),
                         qnoise::to_string(r.key.method), static_cast<unsigned long long>(r.key.seed),
                         r.error.c_str());
        }
    std::printf("%zu runs, %d failed; summary at %s\n", summary.runs.size(), failed, path.string().c_str());
    return failed ? kExitRunFailed : kExitOk;
}

struct ProfileOptions {
    std::string new_summary;
    std::string old_summary;
    std::string new_method;
    std::string old_method;
    std::string mode = "final-gap";
    std::string out;
};

std::vector<qnoise::RunSummary> load_runs(const std::string& file, const std::string& method) {
    std::ifstream is(file);
    if (!is) throw qnoise::ConfigError("profile: cannot open " + file);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw qnoise::ConfigError("profile: " + file + ": " + e.what());
    }
    std::vector<qnoise::RunSummary> runs = qnoise::runs_from_json(j);
    std::optional<qnoise::Method> filter;
    if (!method.empty()) {
        filter = qnoise::parse_method(method);
        if (!filter) throw qnoise::ConfigError("profile: unknown method '" + method + "'");
    }
    std::vector<qnoise::RunSummary> out;
    for (auto& r : runs)
        if (!filter || r.key.method == *filter) out.push_back(std::move(r));
    return out;
}

int profile_command(const ProfileOptions& o) {
    qnoise::Profile prof;
    try {
        const std::string old_file = o.old_summary.empty() ? o.new_summary : o.old_summary;
        const auto mode = o.mode == "evals" ? qnoise::ProfileMode::EvalsToThreshold : qnoise::ProfileMode::FinalGap;
        prof = qnoise::morales_profile(load_runs(o.new_summary, o.new_method), load_runs(old_file, o.old_method), mode);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    }
    for (const auto& w : prof.warnings) std::cerr << "warning: " << w << '\n';

    std::ofstream file;
    if (!o.out.empty()) file.open(o.out);
    std::ostream& os = o.out.empty() ? std::cout : file;
    os << "problem,value\n";
    for (const auto& p : prof.points) os << p.problem << ',' << qnoise::format_real(p.value) << '\n';
    return kExitOk;
}

// Long noiseless BFGS and L-BFGS runs; the lower final value is the reference.
int reference_command(const std::vector<std::string>& problems, std::uint64_t max_iters) {
    for (const auto& name : problems) {
        qnoise::Problem prob;
        try {
            prob = qnoise::registry_lookup(name);
        } catch (const qnoise::LookupError& e) {
            std::cerr << e.what() << '\n';
            return kExitConfig;
        }
        prob.phi_star = 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (auto method : {qnoise::Method::BFGS, qnoise::Method::LBFGS}) {
            qnoise::SolverConfig cfg;
            cfg.method = method;
            cfg.termination.max_iters = max_iters;
            const auto trace = qnoise::run(prob, qnoise::NoiseSpec{}, cfg);
            best = std::min(best, trace.last().phi_true);
            std::printf("%-12s %-6s %s (%s after %llu iterations)\n", prob.name.c_str(), qnoise::to_string(method),
                        qnoise::format_real(trace.last().phi_true).c_str(), qnoise::to_string(trace.reason),
                        static_cast<unsigned long long>(trace.iterations()));
        }
        const auto stored = qnoise::registry_lookup(name).phi_star;
        std::printf("%-12s phi* %s (stored %s)\n", prob.name.c_str(), qnoise::format_real(best).c_str(),
                    qnoise::format_real(stored).c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise-tolerant quasi-Newton benchmark driver"};
    app.require_subcommand(1);
    app.fallthrough();
    auto config = std::make_shared<FlatConfig>();
    if (argc > 1) config->section = argv[1];
    app.config_formatter(config);
    app.set_config("--config", "", "Flat key = value file; keys are the long flag names of the subcommand");

    ExperimentOptions run_opts;
    auto* run = app.add_subcommand("run", "Run one problem/method/noise cell over a list of seeds");
    add_experiment_options(run, run_opts, true);

    ExperimentOptions sweep_opts;
    auto* sweep = app.add_subcommand("sweep", "Run the full cross product of problems, methods, noise levels, seeds");
    add_experiment_options(sweep, sweep_opts, false);

    ProfileOptions prof_opts;
    auto* profile = app.add_subcommand("profile", "Morales comparison profile between two sets of runs");
    profile->add_option("--new", prof_opts.new_summary, "summary.json holding the new runs")->required();
    profile->add_option("--old", prof_opts.old_summary, "summary.json holding the reference runs (default: --new)");
    profile->add_option("--new-method", prof_opts.new_method, "Only use runs of this method from --new");
    profile->add_option("--old-method", prof_opts.old_method, "Only use runs of this method from --old");
    profile->add_option("--mode", prof_opts.mode, "Compared quantity")
        ->check(CLI::IsMember({"final-gap", "evals"}));
    profile->add_option("--out", prof_opts.out, "CSV output file (default: stdout)");

    std::vector<std::string> ref_problems;
    std::uint64_t ref_iters = 5000;
    auto* reference = app.add_subcommand("reference", "Recompute optimal values with long noiseless runs");
    reference->add_option("--problem", ref_problems, "Problem name(s)")->required();
    reference->add_option("--max-iters", ref_iters, "Iterations per run");

    auto* list = app.add_subcommand("list", "List registered problems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return run_experiment_command(run_opts);
        if (*sweep) return run_experiment_command(sweep_opts);
        if (*profile) return profile_command(prof_opts);
        if (*reference) return reference_command(ref_problems, ref_iters);
        if (*list) {
            for (const auto& name : qnoise::default_registry().names()) {
                const auto& p = qnoise::registry_lookup(name);
                std::printf("%-10s d=%-4zu phi*=%s\n", name.c_str(), p.dim, qnoise::format_real(p.phi_star).c_str());
            }
            std::printf("QUAD-<d>-<m>-<M>[-<seed>]  generated strongly convex quadratic\n");
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRunFailed;
    }
    return kExitOk;
}
