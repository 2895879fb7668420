// Command-line driver for the dispersion-process toolkit: single trials,
// Monte Carlo sweeps, coupling-instrumented runs, the concentration-bound
// certification and the 2D exploratory batch.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dispersion/concentration.hpp"
#include "dispersion/experiment.hpp"
#include "dispersion/shape2d.hpp"
#include "dispersion/stats.hpp"
#include "dispersion/trial.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_violation = 2;

struct CliConfig {
    std::int64_t n = 1000;
    std::vector<std::int64_t> n_list;
    std::int64_t trials = 20;
    std::uint64_t seed = 1;
    std::uint64_t max_steps = 0; // 0: automatic cap
    std::string graph = "line";
    std::string instrument = "stats";
    std::string out;
    bool trace = false;
    int jobs = 0;

    // lemma-specific
    double C = 1.0;
    double rho = 0.5;
    std::vector<std::int64_t> m_values{10, 30, 50};
    std::vector<double> eps_values{0.25, 0.5, 1.0};
    std::string json_out;

    std::vector<std::int64_t> resolved_n() const {
        return n_list.empty() ? std::vector<std::int64_t>{n} : n_list;
    }

    dispersion::Topology topology() const {
        if (graph == "line") return dispersion::Topology::line;
        if (graph == "grid2") return dispersion::Topology::grid2;
        throw CLI::ValidationError("--graph must be line or grid2");
    }

    dispersion::Instrument level() const {
        auto l = dispersion::parse_instrument(instrument);
        if (!l) throw CLI::ValidationError("--instrument must be none, stats or coupling");
        return *l;
    }
};

std::string resolved_line(const std::string& subcommand, const CliConfig& cfg) {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["n"] = cfg.resolved_n();
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["graph"] = cfg.graph;
    j["instrument"] = cfg.instrument;
    if (cfg.max_steps) j["max_steps"] = cfg.max_steps;
    return j.dump();
}

void add_common_flags(CLI::App* cmd, CliConfig& cfg, bool with_instrument = true) {
    cmd->add_option("--n", cfg.n, "number of particles");
    cmd->add_option("--trials", cfg.trials, "trials per n");
    cmd->add_option("--seed", cfg.seed, "base seed");
    cmd->add_option("--max-steps", cfg.max_steps, "step cap (0: automatic)");
    cmd->add_option("--out", cfg.out, "output directory");
    cmd->add_option("--jobs", cfg.jobs, "parallel trial workers (0: machine parallelism)");
    if (with_instrument)
        cmd->add_option("--instrument", cfg.instrument, "none|stats|coupling");
}

std::uint64_t cap_for(const CliConfig& cfg, std::int64_t n) {
    return cfg.max_steps ? cfg.max_steps : dispersion::default_max_steps(n);
}

int cmd_run(const CliConfig& cfg) {
    using namespace dispersion;
    const std::uint64_t seed = trial_seed(cfg.seed, cfg.resolved_n().front(), 0);
    const std::int64_t n = cfg.resolved_n().front();
    std::printf("# %s\n", resolved_line("run", cfg).c_str());

    if (cfg.topology() == Topology::grid2) {
        if (cfg.trace) {
            std::fprintf(stderr, "error: --trace is only available on the line\n");
            return exit_usage;
        }
        GridConfig final_config = GridConfig::point_mass(1);
        const TrialResult r = run_grid_trial(n, seed, cap_for(cfg, n), &final_config);
        std::printf("n: %" PRId64 "\nseed: %" PRIu64 "\nT: %" PRIu64 "\n", n, seed, r.record.T);
        std::printf("r_inf range: [%" PRId64 ", %" PRId64 "]\n", r.record.min_pos,
                    r.record.max_pos);
        std::printf("capped: %s\n", r.record.capped ? "true" : "false");
        if (!r.record.capped) {
            const ShapeMetrics m = shape_metrics(final_config);
            std::printf("r_max: %.3f\ndisk_density: %.4f\nanisotropy: %.4f\n", m.r_max,
                        m.disk_density, m.anisotropy);
        }
        return exit_ok;
    }

    std::ofstream trace_file;
    TraceSink sink;
    if (cfg.trace) {
        namespace fs = std::filesystem;
        const fs::path dir = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
        fs::create_directories(dir);
        const fs::path p = dir / ("trace_n" + std::to_string(n) + "_s" +
                                  std::to_string(seed) + ".tsv");
        trace_file.open(p);
        if (!trace_file) {
            std::fprintf(stderr, "error: cannot open %s\n", p.string().c_str());
            return exit_usage;
        }
        trace_file << "# " << resolved_line("run", cfg) << "\n";
        trace_file << "t\tspan\td\tmax_gap\n";
        sink = [&trace_file](std::uint64_t t, std::int64_t sp, std::int64_t d,
                             std::int64_t gap) {
            trace_file << t << '\t' << sp << '\t' << d << '\t' << gap << "\n";
        };
        std::printf("trace: %s\n", p.string().c_str());
    }

    const Instrument level = cfg.level();
    const TrialResult r = run_line_trial(n, seed, cap_for(cfg, n), level, sink);
    std::printf("n: %" PRId64 "\nseed: %" PRIu64 "\nT: %" PRIu64 "\n", n, seed, r.record.T);
    std::printf("occupied: [%" PRId64 ", %" PRId64 "]\nspan: %" PRId64 "\n", r.record.min_pos,
                r.record.max_pos, r.record.span);
    if (n > 1 && r.record.span > 0)
        std::printf("density: %.4f\n",
                    static_cast<double>(n - 1) / static_cast<double>(r.record.span));
    if (level >= Instrument::stats) std::printf("max_d: %" PRId64 "\n", r.record.max_d);
    if (level >= Instrument::coupling) {
        std::printf("max_gap: %" PRId64 "\ndomination violations: %" PRIu64 "\n",
                    r.record.max_gap, r.record.domination_violations);
        std::printf("E events: %" PRIu64 "\n", r.record.e_events);
    }
    std::printf("capped: %s\n", r.record.capped ? "true" : "false");
    if (r.record.domination_violations > 0) return exit_violation;
    return exit_ok;
}

int cmd_mc(const CliConfig& cfg) {
    using namespace dispersion;
    ExperimentPlan plan;
    plan.n_values = cfg.resolved_n();
    plan.trials_per_n = cfg.trials;
    plan.base_seed = cfg.seed;
    plan.topology = cfg.topology();
    plan.level = cfg.level();
    if (cfg.max_steps) plan.max_steps_override = cfg.max_steps;
    plan.out_dir = cfg.out;
    plan.jobs = cfg.jobs;

    std::printf("# %s\n", resolved_line("mc", cfg).c_str());
    const ExperimentResult res = run_experiment(plan);

    std::printf("%-8s %-7s %-12s %-10s %-12s %-9s %-9s %-6s\n", "n", "trials", "mean_span",
                "span/n", "mean_T", "density", "rho_hat", "capped");
    for (const auto& [n, acc] : res.summary.per_n) {
        const SampleStats sp = summarize(acc.span);
        const SampleStats st = summarize(acc.stop_time);
        const SampleStats de = summarize(acc.density);
        const auto rho = acc.rho_fit();
        std::printf("%-8" PRId64 " %-7" PRIu64 " %-12.2f %-10.4f %-12.1f %-9.4f ", n,
                    acc.trials, sp.mean, sp.mean / static_cast<double>(n), st.mean, de.mean);
        if (rho)
            std::printf("%-9.4f ", rho->rho);
        else
            std::printf("%-9s ", "nan");
        std::printf("%-6" PRIu64 "\n", acc.capped);
    }

    if (res.summary.per_n.size() >= 3) {
        try {
            const ScalingReport rep = fit_scaling(res.summary);
            std::printf("scaling: flatness(span/n) = %.4f, span/(n ln n) %s, alpha = %.4f\n",
                        rep.flatness_ratio,
                        rep.nlogn_strictly_decreasing ? "strictly decreasing" : "NOT decreasing",
                        rep.alpha);
        } catch (const std::exception& e) {
            std::printf("scaling: %s\n", e.what());
        }
    }
    if (plan.level >= Instrument::stats && plan.topology == Topology::line) {
        if (const auto drift = drift_check(res.results)) {
            std::printf("drift: decrease freq %.4f (expected >= %.4f), lambda1 moved %" PRIu64
                        "/%" PRIu64 ", worst max_d %" PRId64 " (bound %.1f)\n",
                        drift->frequency, drift->expected_frequency, drift->lambda1_changed,
                        drift->lambda1_steps, drift->worst_max_d, drift->worst_max_d_bound);
        }
    }
    if (plan.level >= Instrument::coupling) {
        if (const auto gap = gap_tail_check(res.results)) {
            std::int64_t worst = 0;
            for (const auto& t : gap->trials) worst = std::max(worst, t.max_gap);
            std::printf("gap tail: worst max_gap %" PRId64 ", all below (ln n)^2: %s\n", worst,
                        gap->pass ? "yes" : "NO");
        }
    }
    for (const auto& f : res.files_written) std::printf("wrote %s\n", f.c_str());

    std::uint64_t violations = 0;
    for (const auto& [n, acc] : res.summary.per_n) violations += acc.violations;
    return violations == 0 ? exit_ok : exit_violation;
}

int cmd_couple(const CliConfig& cfg) {
    using namespace dispersion;
    std::printf("# %s\n", resolved_line("couple", cfg).c_str());

    CouplingDiagnostics pooled;
    std::vector<TrialResult> results;
    std::uint64_t capped = 0;
    std::int64_t worst_gap = 0;
    for (std::int64_t trial = 0; trial < cfg.trials; ++trial) {
        const std::int64_t n = cfg.resolved_n().front();
        const std::uint64_t seed = trial_seed(cfg.seed, n, trial);
        TrialResult r = run_line_trial(n, seed, cap_for(cfg, n), Instrument::coupling);
        if (r.record.capped) ++capped;
        worst_gap = std::max(worst_gap, r.record.max_gap);
        pooled.merge(r.coupling);
        results.push_back(std::move(r));
    }

    std::printf("trials: %" PRId64 "\nsteps: %" PRIu64 "\n", cfg.trials, pooled.steps);
    std::printf("violations: %" PRIu64 "\n", pooled.violations);
    std::printf("gap lipschitz violations: %" PRIu64 "\n", pooled.gap_lipschitz_violations);
    std::printf("order lipschitz violations: %" PRIu64 "\n", pooled.order_lipschitz_violations);
    std::printf("E events: %" PRIu64 "\nmax gap: %" PRId64 "\ncapped: %" PRIu64 "\n",
                pooled.e_events, worst_gap, capped);

    static const char* case_names[3] = {"s_j>=2,s_j+1>=2", "s_j>=2,s_j+1=1", "s_j=1,s_j+1>=2"};
    for (int c = 0; c < 3; ++c) {
        const DeltaCaseTally& t = pooled.case_tallies[c];
        if (t.samples == 0) continue;
        std::printf("delta_hat[%s]: samples %" PRIu64 ", mean %.4f, P(positive) %.5f "
                    "(exact %.5f), |delta|>2: %" PRIu64 "\n",
                    case_names[c], t.samples, t.mean(), t.positive_frequency(),
                    t.expected_positive / static_cast<double>(t.samples), t.abs_above_2);
    }
    if (const auto rho = estimate_rho(pooled.tail_histogram)) {
        std::printf("rho_hat: %.4f (R^2 %.4f over %" PRId64 " points)\n", rho->rho,
                    rho->r_squared, rho->points_used);
        std::printf("max Z_i/|A_i|: %.3f (diagnostic bound 3 + 2/(1-rho_hat) = %.3f)\n",
                    pooled.max_class_sum_norm, 3.0 + 2.0 / (1.0 - rho->rho));
    }
    if (const auto corr = pooled.pair_correlation())
        std::printf("delta_hat correlation at lag 3L: %.5f (%" PRIu64 " pairs)\n", *corr,
                    pooled.pair_count);

    const bool ok = pooled.violations == 0 && pooled.gap_lipschitz_violations == 0 &&
                    pooled.order_lipschitz_violations == 0 && capped == 0;
    return ok ? exit_ok : exit_violation;
}

int cmd_lemma(const CliConfig& cfg) {
    using namespace dispersion;
    std::printf("# %s\n",
                nlohmann::json{{"subcommand", "lemma"},
                               {"C", cfg.C},
                               {"rho", cfg.rho},
                               {"m", cfg.m_values},
                               {"eps", cfg.eps_values}}
                    .dump()
                    .c_str());
    const TailSpec spec = TailSpec::geometric_dominated(cfg.C, cfg.rho);
    std::printf("tail spec: C=%g rho=%g support 0..%" PRId64 " mean %.6f\n", cfg.C, cfg.rho,
                spec.support_max(), spec.mean());

    nlohmann::json out = nlohmann::json::array();
    bool all_ok = true;
    std::printf("%-5s %-6s %-10s %-12s %-13s %-13s %-12s %-12s %s\n", "m", "eps", "eta",
                "lambda", "exact_tail", "bound", "slack_z2", "slack_mgf", "ok");
    for (double eps : cfg.eps_values) {
        const LemmaParams p = choose_params(cfg.C, cfg.rho, eps);
        const MgfSlacks slack = mgf_chain_check(spec, p.lambda);
        for (std::int64_t m : cfg.m_values) {
            const std::int64_t threshold =
                static_cast<std::int64_t>(std::ceil((1.0 + eps) * p.mu * static_cast<double>(m)));
            const double tail = exact_tail(spec, m, threshold);
            const double bound = p.bound(m);
            const bool ok =
                tail <= bound && slack.second_moment_slack >= 0 && slack.mgf_slack >= 0;
            all_ok = all_ok && ok;
            std::printf("%-5" PRId64 " %-6.2f %-10.6g %-12.6g %-13.6g %-13.6g %-12.6g %-12.6g %s\n",
                        m, eps, p.eta, p.lambda, tail, bound, slack.second_moment_slack,
                        slack.mgf_slack, ok ? "yes" : "NO");
            out.push_back({{"m", m},
                           {"eps", eps},
                           {"eta", p.eta},
                           {"lambda", p.lambda},
                           {"B", p.B},
                           {"threshold", threshold},
                           {"exact_tail", tail},
                           {"bound", bound},
                           {"slack_second_moment", slack.second_moment_slack},
                           {"slack_mgf", slack.mgf_slack},
                           {"ok", ok}});
        }
    }
    if (!cfg.json_out.empty()) {
        std::ofstream os(cfg.json_out);
        if (!os) {
            std::fprintf(stderr, "error: cannot open %s\n", cfg.json_out.c_str());
            return exit_usage;
        }
        os << nlohmann::json{{"C", cfg.C}, {"rho", cfg.rho}, {"results", out}}.dump(2) << "\n";
        std::printf("wrote %s\n", cfg.json_out.c_str());
    }
    return all_ok ? exit_ok : exit_violation;
}

int cmd_shape2d(const CliConfig& cfg) {
    using namespace dispersion;
    namespace fs = std::filesystem;
    std::printf("# %s\n", resolved_line("shape2d", cfg).c_str());

    const std::int64_t n = cfg.resolved_n().front();
    const fs::path dir = cfg.out.empty() ? fs::path("shape2d_out") : fs::path(cfg.out);
    fs::create_directories(dir);

    std::ofstream metrics(dir / "shape_metrics.csv");
    metrics << "# " << resolved_line("shape2d", cfg) << "\n";
    metrics << "n,trial,seed,T,capped,occupied,r_max,r_inf,disk_density,anisotropy,snapshot\n";

    std::vector<ShapeMetrics> all;
    std::vector<TrialResult> results;
    std::printf("%-8s %-6s %-10s %-8s %-8s %-12s %-10s\n", "n", "trial", "T", "r_max", "r_inf",
                "disk_density", "anisotropy");
    for (std::int64_t trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t seed = trial_seed(cfg.seed, n, trial);
        GridConfig final_config = GridConfig::point_mass(1);
        TrialResult r = run_grid_trial(n, seed, cap_for(cfg, n), &final_config);
        if (r.record.capped) {
            std::fprintf(stderr, "trial %" PRId64 " hit the step cap\n", trial);
            metrics << n << ',' << trial << ',' << seed << ',' << r.record.T
                    << ",1,,,,,,\n";
            results.push_back(std::move(r));
            continue;
        }
        const ShapeMetrics m = shape_metrics(final_config);
        const std::string snap_name =
            "snapshot_n" + std::to_string(n) + "_t" + std::to_string(trial) + ".txt";
        {
            std::ofstream snap(dir / snap_name);
            write_snapshot(snap, final_config, resolved_line("shape2d", cfg));
        }
        metrics << n << ',' << trial << ',' << seed << ',' << r.record.T << ",0,"
                << m.occupied_count << ',' << m.r_max << ',' << m.r_inf << ','
                << m.disk_density << ',' << m.anisotropy << ',' << snap_name << "\n";
        std::printf("%-8" PRId64 " %-6" PRId64 " %-10" PRIu64 " %-8.2f %-8" PRId64
                    " %-12.4f %-10.4f\n",
                    n, trial, r.record.T, m.r_max, m.r_inf, m.disk_density, m.anisotropy);
        all.push_back(m);
        results.push_back(std::move(r));
    }

    // Per-n aggregate: the harness summary row with the 2D columns appended.
    {
        std::ofstream sum(dir / "summary.csv");
        sum << "# " << resolved_line("shape2d", cfg) << "\n";
        sum << summary_csv_header << ",mean_r_max,mean_r_inf,mean_disk_density,mean_anisotropy\n";
        Summary s;
        for (const auto& r : results) s.add(r);
        for (const auto& [nn, acc] : s.per_n) {
            const SampleStats sp = summarize(acc.span);
            const SampleStats st = summarize(acc.stop_time);
            double r_max = 0, r_inf = 0, dens = 0, aniso = 0;
            for (const auto& m : all) {
                r_max += m.r_max;
                r_inf += static_cast<double>(m.r_inf);
                dens += m.disk_density;
                aniso += m.anisotropy;
            }
            const double c = all.empty() ? 1.0 : static_cast<double>(all.size());
            sum << nn << ',' << acc.trials << ',' << sp.mean << ',' << sp.stddev << ','
                << sp.q05 << ',' << sp.q50 << ',' << sp.q95 << ',' << st.mean << ','
                << st.stddev << ',' << 0 << ",nan,nan," << acc.e_events << ','
                << acc.violations << ',' << acc.capped << ',' << r_max / c << ','
                << r_inf / c << ',' << dens / c << ',' << aniso / c << "\n";
        }
    }
    std::printf("wrote %s\n", (dir / "shape_metrics.csv").string().c_str());
    std::printf("wrote %s\n", (dir / "summary.csv").string().c_str());
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synchronous dispersion process simulator"};
    app.require_subcommand(1);
    CliConfig cfg;

    CLI::App* run = app.add_subcommand("run", "single trial, optional per-step trace");
    add_common_flags(run, cfg);
    run->add_option("--graph", cfg.graph, "line|grid2");
    run->add_flag("--trace", cfg.trace, "write per-step TSV (t, span, d, max gap)");

    CLI::App* mc = app.add_subcommand("mc", "seeded Monte Carlo sweep");
    add_common_flags(mc, cfg);
    mc->add_option("--n-list", cfg.n_list, "comma-separated n values")->delimiter(',');
    mc->add_option("--graph", cfg.graph, "line|grid2");

    CLI::App* couple = app.add_subcommand("couple", "coupling-instrumented runs with assertions");
    add_common_flags(couple, cfg, false);

    CLI::App* lemma = app.add_subcommand("lemma", "concentration-bound certification");
    lemma->add_option("--C", cfg.C, "tail constant C");
    lemma->add_option("--rho", cfg.rho, "tail ratio rho in (0,1)");
    lemma->add_option("--m", cfg.m_values, "summand counts")->delimiter(',');
    lemma->add_option("--eps", cfg.eps_values, "deviation fractions in [0,1]")->delimiter(',');
    lemma->add_option("--json", cfg.json_out, "write the report as JSON to this file");

    CLI::App* shape = app.add_subcommand("shape2d", "2D batch with shape metrics");
    add_common_flags(shape, cfg, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (run->parsed()) return cmd_run(cfg);
        if (mc->parsed()) return cmd_mc(cfg);
        if (couple->parsed()) {
            cfg.instrument = "coupling";
            return cmd_couple(cfg);
        }
        if (lemma->parsed()) return cmd_lemma(cfg);
        if (shape->parsed()) {
            cfg.graph = "grid2";
            return cmd_shape2d(cfg);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_usage;
    }
    return exit_usage;
}
