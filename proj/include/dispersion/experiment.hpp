#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dispersion/stats.hpp"
#include "dispersion/trial.hpp"

namespace dispersion {

// A fully-resolved, re-runnable batch of trials. Trial seeds are derived as
// base_seed XOR hash(n, trial_index), so the plan alone determines every
// trajectory.
struct ExperimentPlan {
    std::vector<std::int64_t> n_values;
    std::int64_t trials_per_n = 20;
    std::uint64_t base_seed = 0;
    Topology topology = Topology::line;
    Instrument level = Instrument::stats;
    std::optional<std::uint64_t> max_steps_override;
    std::string out_dir; // empty: no files written
    int jobs = 0;        // 0: hardware concurrency

    void validate() const {
        if (n_values.empty()) throw std::invalid_argument("plan: no n values");
        for (auto n : n_values)
            if (n < 1) throw std::invalid_argument("plan: n must be >= 1");
        if (trials_per_n < 1) throw std::invalid_argument("plan: trials_per_n must be >= 1");
    }

    std::uint64_t max_steps_for(std::int64_t n) const {
        return max_steps_override ? *max_steps_override : default_max_steps(n);
    }

    std::uint64_t plan_id() const {
        std::uint64_t h = hash_combine(base_seed, static_cast<std::uint64_t>(trials_per_n));
        h = hash_combine(h, static_cast<std::uint64_t>(topology));
        h = hash_combine(h, static_cast<std::uint64_t>(level));
        h = hash_combine(h, max_steps_override.value_or(0));
        for (auto n : n_values) h = hash_combine(h, static_cast<std::uint64_t>(n));
        return h;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["n_values"] = n_values;
        j["trials_per_n"] = trials_per_n;
        j["base_seed"] = base_seed;
        j["topology"] = to_string(topology);
        j["instrument"] = to_string(level);
        if (max_steps_override) j["max_steps"] = *max_steps_override;
        return j;
    }
};

// Everything pooled for one n: raw per-trial samples (so merging, quantiles
// and re-summarizing stay exact) plus the mergeable instrument tallies.
struct NAccumulator {
    std::int64_t n = 0;
    std::uint64_t trials = 0;
    std::uint64_t capped = 0;
    std::vector<double> span, stop_time, max_d, density; // settled trials only
    DriftTally drift;
    CouplingDiagnostics coupling;
    std::uint64_t e_events = 0;
    std::uint64_t violations = 0;

    void add(const TrialResult& r) {
        ++trials;
        if (r.record.capped) {
            ++capped;
        } else {
            span.push_back(static_cast<double>(r.record.span));
            stop_time.push_back(static_cast<double>(r.record.T));
            max_d.push_back(static_cast<double>(r.record.max_d));
            if (r.record.topology == Topology::line && r.record.span > 0)
                density.push_back(static_cast<double>(r.record.n - 1) /
                                  static_cast<double>(r.record.span));
            else if (r.record.topology == Topology::line && r.record.n == 1)
                density.push_back(1.0);
        }
        drift.merge(r.drift);
        coupling.merge(r.coupling);
        e_events += r.record.e_events;
        violations += r.record.domination_violations;
    }

    void merge(const NAccumulator& o) {
        trials += o.trials;
        capped += o.capped;
        span.insert(span.end(), o.span.begin(), o.span.end());
        stop_time.insert(stop_time.end(), o.stop_time.begin(), o.stop_time.end());
        max_d.insert(max_d.end(), o.max_d.begin(), o.max_d.end());
        density.insert(density.end(), o.density.begin(), o.density.end());
        drift.merge(o.drift);
        coupling.merge(o.coupling);
        e_events += o.e_events;
        violations += o.violations;
    }

    std::optional<RhoFit> rho_fit() const { return estimate_rho(coupling.tail_histogram); }
};

struct Summary {
    std::map<std::int64_t, NAccumulator> per_n;

    void add(const TrialResult& r) {
        auto& acc = per_n[r.record.n];
        acc.n = r.record.n;
        acc.add(r);
    }

    void merge(const Summary& o) {
        for (const auto& [n, acc] : o.per_n) {
            auto& mine = per_n[n];
            mine.n = n;
            mine.merge(acc);
        }
    }
};

struct ExperimentResult {
    ExperimentPlan plan;
    std::vector<TrialResult> results; // ordered by (n index, trial index)
    Summary summary;
    std::vector<std::string> files_written;
};

namespace detail {

inline std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace detail

inline nlohmann::json record_to_json(const TrialRecord& r, std::uint64_t plan_id) {
    nlohmann::json j;
    j["plan_id"] = plan_id;
    j["seed"] = r.seed;
    j["n"] = r.n;
    j["topology"] = to_string(r.topology);
    j["T"] = r.T;
    j["min_pos"] = r.min_pos;
    j["max_pos"] = r.max_pos;
    j["span"] = r.span;
    j["max_d"] = r.max_d;
    j["max_gap"] = r.max_gap;
    j["e_events"] = r.e_events;
    j["domination_violations"] = r.domination_violations;
    j["capped"] = r.capped;
    return j;
}

// One object per line; the resolved plan sits in a leading comment line and
// the timestamp is isolated on its own line so the rest of the file is
// byte-identical across reruns.
inline void write_jsonl(std::ostream& os, const ExperimentResult& res) {
    os << "# plan " << res.plan.to_json().dump() << " plan_id " << res.plan.plan_id() << "\n";
    os << "# created " << detail::utc_timestamp() << "\n";
    for (const auto& r : res.results)
        os << record_to_json(r.record, res.plan.plan_id()).dump() << "\n";
}

inline constexpr const char* summary_csv_header =
    "n,trials,mean_span,sd_span,q05_span,q50_span,q95_span,mean_T,sd_T,"
    "mean_max_d,mean_density,rho_hat,e_events,violations,capped";

inline void write_summary_csv(std::ostream& os, const ExperimentResult& res) {
    os << "# plan " << res.plan.to_json().dump() << " plan_id " << res.plan.plan_id() << "\n";
    os << summary_csv_header << "\n";
    for (const auto& [n, acc] : res.summary.per_n) {
        const SampleStats sp = summarize(acc.span);
        const SampleStats st = summarize(acc.stop_time);
        const SampleStats sd = summarize(acc.max_d);
        const SampleStats de = summarize(acc.density);
        const auto rho = acc.rho_fit();
        using detail::format_double;
        os << n << ',' << acc.trials << ',' << format_double(sp.mean) << ','
           << format_double(sp.stddev) << ',' << format_double(sp.q05) << ','
           << format_double(sp.q50) << ',' << format_double(sp.q95) << ','
           << format_double(st.mean) << ',' << format_double(st.stddev) << ','
           << format_double(sd.mean) << ','
           << (de.count ? format_double(de.mean) : "nan") << ','
           << (rho ? format_double(rho->rho) : "nan") << ',' << acc.e_events << ','
           << acc.violations << ',' << acc.capped << "\n";
    }
}

// Gnuplot-ready: mean span over n per n.
inline void write_scaling_tsv(std::ostream& os, const ExperimentResult& res) {
    os << "# plan " << res.plan.to_json().dump() << "\n";
    os << "n\tmean_span_over_n\n";
    for (const auto& [n, acc] : res.summary.per_n) {
        if (acc.span.empty()) continue;
        const SampleStats sp = summarize(acc.span);
        os << n << '\t' << detail::format_double(sp.mean / static_cast<double>(n)) << "\n";
    }
}

// Gnuplot-ready: pooled survival Pr(ghat - 3 >= k) per n, long format.
inline void write_survival_tsv(std::ostream& os, const ExperimentResult& res) {
    os << "# plan " << res.plan.to_json().dump() << "\n";
    os << "n\tk\tsurvival\n";
    for (const auto& [n, acc] : res.summary.per_n) {
        const auto& h = acc.coupling.tail_histogram;
        std::uint64_t total = 0;
        for (auto c : h) total += c;
        if (total == 0) continue;
        std::uint64_t above = 0;
        std::vector<std::uint64_t> survival(h.size());
        for (std::size_t k = h.size(); k-- > 0;) {
            above += h[k];
            survival[k] = above;
        }
        for (std::size_t k = 0; k < survival.size(); ++k) {
            if (survival[k] == 0) break;
            os << n << '\t' << k << '\t'
               << detail::format_double(static_cast<double>(survival[k]) /
                                        static_cast<double>(total))
               << "\n";
        }
    }
}

inline std::string partial_manifest(const ExperimentResult& res) {
    std::string m = "; completed files:";
    if (res.files_written.empty()) return m + " none";
    for (const auto& f : res.files_written) m += " " + f;
    return m;
}

// Run every trial of the plan. Trials are independent and run on a small
// worker pool; results land in a pre-sized vector keyed by (n, trial) index,
// and all aggregation is a deterministic fold over that order, so the output
// is independent of scheduling.
inline ExperimentResult run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    ExperimentResult res;
    res.plan = plan;

    const std::size_t total =
        plan.n_values.size() * static_cast<std::size_t>(plan.trials_per_n);
    res.results.resize(total);

    unsigned jobs = plan.jobs > 0 ? static_cast<unsigned>(plan.jobs)
                                  : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<std::size_t>(jobs, total);

    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= total) return;
            const std::int64_t n =
                plan.n_values[i / static_cast<std::size_t>(plan.trials_per_n)];
            const std::int64_t trial =
                static_cast<std::int64_t>(i % static_cast<std::size_t>(plan.trials_per_n));
            const std::uint64_t seed = trial_seed(plan.base_seed, n, trial);
            try {
                if (plan.topology == Topology::line)
                    res.results[i] =
                        run_line_trial(n, seed, plan.max_steps_for(n), plan.level);
                else
                    res.results[i] = run_grid_trial(n, seed, plan.max_steps_for(n));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
        }
    };

    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (const auto& r : res.results) res.summary.add(r);

    if (!plan.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(plan.out_dir);
        auto write_file = [&](const char* name, auto&& writer) {
            const fs::path p = fs::path(plan.out_dir) / name;
            std::ofstream os(p);
            if (!os) throw std::runtime_error("cannot open " + p.string() +
                                              partial_manifest(res));
            writer(os);
            os.flush();
            if (!os) throw std::runtime_error("write failed for " + p.string() +
                                              partial_manifest(res));
            res.files_written.push_back(p.string());
        };
        write_file("records.jsonl", [&](std::ostream& os) { write_jsonl(os, res); });
        write_file("summary.csv", [&](std::ostream& os) { write_summary_csv(os, res); });
        if (plan.topology == Topology::line)
            write_file("span_scaling.tsv",
                       [&](std::ostream& os) { write_scaling_tsv(os, res); });
        if (plan.level >= Instrument::coupling)
            write_file("ghat_survival.tsv",
                       [&](std::ostream& os) { write_survival_tsv(os, res); });
    }
    return res;
}

// ---- Scaling-law fit -------------------------------------------------------

struct ScalingPoint {
    std::int64_t n = 0;
    double mean_span = 0;
    double span_over_n = 0;
    double span_over_nlogn = 0;
};

struct ScalingReport {
    std::vector<ScalingPoint> points; // ascending n
    double flatness_ratio = 0;        // max/min of span_over_n
    bool nlogn_strictly_decreasing = false;
    double alpha = 0; // log-log least-squares exponent
};

// Fit of mean span against n across the sweep. Requires >= 3 distinct n
// spanning at least a factor of 8 (the 125..1000 doubling sweep).
inline ScalingReport fit_scaling(const std::vector<std::pair<std::int64_t, double>>& mean_spans) {
    std::map<std::int64_t, double> by_n;
    for (const auto& [n, s] : mean_spans) by_n[n] = s;
    if (by_n.size() < 3)
        throw std::invalid_argument("fit_scaling: need >= 3 distinct n values");
    if (static_cast<double>(by_n.rbegin()->first) < 8.0 * static_cast<double>(by_n.begin()->first))
        throw std::invalid_argument("fit_scaling: n values must span at least a factor of 8");

    ScalingReport rep;
    std::vector<double> log_n, log_span;
    for (const auto& [n, s] : by_n) {
        ScalingPoint p;
        p.n = n;
        p.mean_span = s;
        p.span_over_n = s / static_cast<double>(n);
        p.span_over_nlogn = s / (static_cast<double>(n) * std::log(static_cast<double>(n)));
        rep.points.push_back(p);
        log_n.push_back(std::log(static_cast<double>(n)));
        log_span.push_back(std::log(s));
    }
    double lo = rep.points.front().span_over_n, hi = lo;
    for (const auto& p : rep.points) {
        lo = std::min(lo, p.span_over_n);
        hi = std::max(hi, p.span_over_n);
    }
    rep.flatness_ratio = hi / lo;
    rep.nlogn_strictly_decreasing = true;
    for (std::size_t i = 0; i + 1 < rep.points.size(); ++i)
        if (rep.points[i + 1].span_over_nlogn >= rep.points[i].span_over_nlogn)
            rep.nlogn_strictly_decreasing = false;
    rep.alpha = least_squares(log_n, log_span).slope;
    return rep;
}

inline ScalingReport fit_scaling(const Summary& summary) {
    std::vector<std::pair<std::int64_t, double>> pts;
    for (const auto& [n, acc] : summary.per_n)
        if (!acc.span.empty()) pts.push_back({n, summarize(acc.span).mean});
    return fit_scaling(pts);
}

// ---- Drift (closest-particle distance) check -------------------------------

struct DriftReport {
    std::uint64_t qualifying = 0;
    std::uint64_t decreased = 0;
    double frequency = 0;
    double expected_frequency = 0; // mean of 1 - 2^-Lambda over qualifying steps
    double stderr_frequency = 0;
    std::uint64_t lambda1_steps = 0;
    std::uint64_t lambda1_changed = 0; // contract: 0
    std::int64_t worst_max_d = 0;
    double worst_max_d_bound = 0; // 10 ln n of the trial holding worst_max_d
    bool max_d_within_bound = true;
    bool pass = false;
};

// Pools the drift tallies of stats-level trials and checks them against the
// step-law: decrease frequency >= 3/4 - 3 se, Lambda = 1 steps never move the
// distance, and every trial keeps max d_t <= 10 ln n.
inline std::optional<DriftReport> drift_check(const std::vector<TrialResult>& results) {
    DriftReport rep;
    DriftTally pooled;
    bool any = false;
    for (const auto& r : results) {
        pooled.merge(r.drift);
        if (r.drift.qualifying || r.drift.lambda1_steps) any = true;
        const double bound = 10.0 * std::log(static_cast<double>(std::max<std::int64_t>(r.record.n, 2)));
        if (static_cast<double>(r.record.max_d) > bound) {
            rep.max_d_within_bound = false;
        }
        if (r.record.max_d >= rep.worst_max_d) {
            rep.worst_max_d = r.record.max_d;
            rep.worst_max_d_bound = bound;
        }
    }
    if (!any || pooled.qualifying == 0) return std::nullopt;
    rep.qualifying = pooled.qualifying;
    rep.decreased = pooled.decreased;
    rep.frequency = static_cast<double>(pooled.decreased) / static_cast<double>(pooled.qualifying);
    rep.expected_frequency = pooled.expected_decrease / static_cast<double>(pooled.qualifying);
    rep.stderr_frequency =
        std::sqrt(pooled.expected_variance) / static_cast<double>(pooled.qualifying);
    rep.lambda1_steps = pooled.lambda1_steps;
    rep.lambda1_changed = pooled.lambda1_changed;
    rep.pass = rep.frequency >= 0.75 - 3.0 * rep.stderr_frequency &&
               rep.lambda1_changed == 0 && rep.max_d_within_bound;
    return rep;
}

// ---- Gap tail check ---------------------------------------------------------

struct GapTailReport {
    struct PerTrial {
        std::int64_t n = 0;
        std::uint64_t seed = 0;
        std::int64_t max_gap = 0;
        double bound = 0; // (ln n)^2
        bool ok = false;
    };
    std::vector<PerTrial> trials;
    bool pass = false;
};

// Checks max_{j,t} g against (ln n)^2 in every coupling-instrumented trial.
inline std::optional<GapTailReport> gap_tail_check(const std::vector<TrialResult>& results) {
    GapTailReport rep;
    rep.pass = true;
    for (const auto& r : results) {
        if (r.coupling.steps == 0) continue; // not coupling-instrumented
        GapTailReport::PerTrial p;
        p.n = r.record.n;
        p.seed = r.record.seed;
        p.max_gap = r.record.max_gap;
        const double ln = std::log(static_cast<double>(std::max<std::int64_t>(p.n, 2)));
        p.bound = ln * ln;
        p.ok = static_cast<double>(p.max_gap) < p.bound;
        rep.pass = rep.pass && p.ok;
        rep.trials.push_back(p);
    }
    if (rep.trials.empty()) return std::nullopt;
    return rep;
}

} // namespace dispersion
