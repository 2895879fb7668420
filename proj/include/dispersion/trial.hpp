#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dispersion/lattice.hpp"
#include "dispersion/ordered.hpp"
#include "dispersion/process.hpp"
#include "dispersion/rng.hpp"

namespace dispersion {

enum class Instrument { none, stats, coupling };

inline std::string to_string(Instrument i) {
    switch (i) {
        case Instrument::none: return "none";
        case Instrument::stats: return "stats";
        default: return "coupling";
    }
}

inline std::optional<Instrument> parse_instrument(const std::string& s) {
    if (s == "none") return Instrument::none;
    if (s == "stats") return Instrument::stats;
    if (s == "coupling") return Instrument::coupling;
    return std::nullopt;
}

// Default step cap: well above the O(n^2 log n) stopping-time growth, so it
// only flags pathology.
inline std::uint64_t default_max_steps(std::int64_t n) {
    const std::uint64_t quadratic = 50ull * static_cast<std::uint64_t>(n) *
                                    static_cast<std::uint64_t>(n);
    return std::max<std::uint64_t>(1'000'000ull, quadratic);
}

// Outcome of one trial. For the line min_pos/max_pos are the extreme
// occupied coordinates at the final step; on the grid they are the extreme
// Chebyshev radii.
struct TrialRecord {
    std::uint64_t seed = 0;
    std::int64_t n = 0;
    Topology topology = Topology::line;
    std::uint64_t T = 0;
    std::int64_t min_pos = 0;
    std::int64_t max_pos = 0;
    std::int64_t span = 0;
    std::int64_t max_d = 0;   // max over t of d_t (stats level and up)
    std::int64_t max_gap = 0; // max over j,t of the ordered gap (coupling level)
    std::uint64_t e_events = 0;
    std::uint64_t domination_violations = 0;
    bool capped = false;
};

// Pooled counters for the closest-particle drift statistics: steps with
// d_t != 0 split by the closest-stack size. Lambda_t >= 2 steps carry the
// exact per-step decrease probability 1 - 2^-Lambda for the comparison.
struct DriftTally {
    std::uint64_t qualifying = 0; // d_t != 0 and Lambda_t >= 2
    std::uint64_t decreased = 0;
    double expected_decrease = 0; // sum of 1 - 2^-Lambda
    double expected_variance = 0; // sum of p(1-p)
    std::uint64_t lambda1_steps = 0;
    std::uint64_t lambda1_changed = 0; // must stay 0

    void merge(const DriftTally& o) {
        qualifying += o.qualifying;
        decreased += o.decreased;
        expected_decrease += o.expected_decrease;
        expected_variance += o.expected_variance;
        lambda1_steps += o.lambda1_steps;
        lambda1_changed += o.lambda1_changed;
    }
};

// Mergeable extract of the coupling diagnostics a finished trial leaves
// behind.
struct CouplingDiagnostics {
    std::vector<std::uint64_t> tail_histogram;
    std::vector<DeltaCaseTally> case_tallies{3};
    std::uint64_t e_events = 0;
    std::uint64_t violations = 0;
    std::uint64_t gap_lipschitz_violations = 0;
    std::uint64_t order_lipschitz_violations = 0;
    double max_class_sum_norm = 0;
    std::uint64_t steps = 0;
    std::uint64_t pair_count = 0;
    double pair_sx = 0, pair_sy = 0, pair_sxx = 0, pair_syy = 0, pair_sxy = 0;

    void absorb(const CouplingState& st) {
        if (st.tail_histogram.size() > tail_histogram.size())
            tail_histogram.resize(st.tail_histogram.size(), 0);
        for (std::size_t k = 0; k < st.tail_histogram.size(); ++k)
            tail_histogram[k] += st.tail_histogram[k];
        for (int c = 0; c < 3; ++c) case_tallies[c].merge(st.case_tallies[c]);
        e_events += st.e_event_count;
        max_class_sum_norm = std::max(max_class_sum_norm, st.max_class_sum_norm);
        steps += st.steps;
        pair_count += st.pair_count;
        pair_sx += st.pair_sx;
        pair_sy += st.pair_sy;
        pair_sxx += st.pair_sxx;
        pair_syy += st.pair_syy;
        pair_sxy += st.pair_sxy;
    }

    void merge(const CouplingDiagnostics& o) {
        if (o.tail_histogram.size() > tail_histogram.size())
            tail_histogram.resize(o.tail_histogram.size(), 0);
        for (std::size_t k = 0; k < o.tail_histogram.size(); ++k)
            tail_histogram[k] += o.tail_histogram[k];
        for (int c = 0; c < 3; ++c) case_tallies[c].merge(o.case_tallies[c]);
        e_events += o.e_events;
        violations += o.violations;
        gap_lipschitz_violations += o.gap_lipschitz_violations;
        order_lipschitz_violations += o.order_lipschitz_violations;
        max_class_sum_norm = std::max(max_class_sum_norm, o.max_class_sum_norm);
        steps += o.steps;
        pair_count += o.pair_count;
        pair_sx += o.pair_sx;
        pair_sy += o.pair_sy;
        pair_sxx += o.pair_sxx;
        pair_syy += o.pair_syy;
        pair_sxy += o.pair_sxy;
    }

    std::optional<double> pair_correlation() const {
        if (pair_count < 2) return std::nullopt;
        const double n = static_cast<double>(pair_count);
        const double cov = pair_sxy - pair_sx * pair_sy / n;
        const double vx = pair_sxx - pair_sx * pair_sx / n;
        const double vy = pair_syy - pair_sy * pair_sy / n;
        if (vx <= 0 || vy <= 0) return std::nullopt;
        return cov / std::sqrt(vx * vy);
    }
};

struct TrialResult {
    TrialRecord record;
    DriftTally drift;            // stats level and up (line only)
    CouplingDiagnostics coupling; // coupling level (line only)
};

// Per-case distributional report on the accumulated delta_hat samples: the
// observed conditional mean against -1/2, the positive-branch frequency
// against its exact dyadic probability, and the table's annotation bound.
struct DeltaCaseReport {
    int case_id = 0;
    std::uint64_t samples = 0;
    double mean = 0;
    double mean_stderr = 0;
    double positive_frequency = 0;
    double expected_positive_frequency = 0;
    double frequency_stderr = 0;
    double annotation_bound = 0; // 1/16 for the two-stack case, 1/4 otherwise
    std::uint64_t abs_above_2 = 0;
    bool bounded_ok = false; // |delta_hat| <= 2 throughout
    bool mean_ok = false;    // mean <= -1/2 + 3 se
    bool freq_ok = false;    // frequency within 3 se of exact, and <= annotation + 3 se
    bool enough_samples = false;
};

inline std::vector<DeltaCaseReport> delta_hat_stats(const CouplingDiagnostics& diag,
                                                    std::uint64_t min_samples = 1000) {
    std::vector<DeltaCaseReport> out;
    for (int c = 0; c < 3; ++c) {
        const DeltaCaseTally& t = diag.case_tallies[c];
        DeltaCaseReport r;
        r.case_id = c;
        r.samples = t.samples;
        r.enough_samples = t.samples >= min_samples;
        r.abs_above_2 = t.abs_above_2;
        r.bounded_ok = t.abs_above_2 == 0;
        r.annotation_bound = c == case_both_stacks ? 1.0 / 16.0 : 1.0 / 4.0;
        if (t.samples > 0) {
            r.mean = t.mean();
            r.mean_stderr = t.mean_stderr();
            r.positive_frequency = t.positive_frequency();
            r.expected_positive_frequency =
                t.expected_positive / static_cast<double>(t.samples);
            r.frequency_stderr = t.frequency_stderr();
            r.mean_ok = r.mean <= -0.5 + 3.0 * r.mean_stderr;
            r.freq_ok = std::abs(r.positive_frequency - r.expected_positive_frequency) <=
                            3.0 * r.frequency_stderr &&
                        r.positive_frequency <= r.annotation_bound + 3.0 * r.frequency_stderr;
        }
        out.push_back(r);
    }
    return out;
}

// Per-step trace callback: (t, span, d_t, max adjacent gap).
using TraceSink = std::function<void(std::uint64_t, std::int64_t, std::int64_t, std::int64_t)>;

// Drive one line trial to settlement (or the step cap), with optional
// instrumentation. The trajectory is a pure function of (n, seed, max_steps).
inline TrialResult run_line_trial(std::int64_t n, std::uint64_t seed,
                                  std::uint64_t max_steps,
                                  Instrument level = Instrument::none,
                                  const TraceSink& trace = nullptr) {
    if (n < 1) throw std::invalid_argument("run_trial: n must be >= 1");
    if (max_steps < 1) throw std::invalid_argument("run_trial: max_steps must be >= 1");

    TrialResult res;
    res.record.seed = seed;
    res.record.n = n;
    res.record.topology = Topology::line;

    LineConfig config = LineConfig::point_mass(n);
    const bool with_stats = level >= Instrument::stats;
    const bool with_coupling = level >= Instrument::coupling;

    OrderedView view, next_view;
    std::optional<CouplingState> coupling;
    if (with_coupling) {
        view.rebuild(config);
        coupling.emplace(n);
    }

    std::uint64_t t = 0;
    while (!config.settled()) {
        if (t >= max_steps) {
            res.record.capped = true;
            break;
        }
        std::int64_t d_before = 0, lambda = 0;
        if (with_stats) {
            d_before = closest_distance(config);
            lambda = d_before != 0 ? closest_stack_size(config) : 0;
            res.record.max_d = std::max(res.record.max_d, d_before);
        }
        if (trace)
            trace(t, span(config), with_stats ? d_before : closest_distance(config),
                  max_adjacent_gap(config));

        StreamRng rng(seed, t);
        const LineDraw draw = config.sample_moves(rng, t, t);
        if (with_coupling) update_coupling(*coupling, view, draw);
        config.apply_moves(draw);
        ++t;

        if (with_stats && d_before != 0) {
            const std::int64_t d_after = closest_distance(config);
            if (lambda >= 2) {
                ++res.drift.qualifying;
                if (d_after < d_before) ++res.drift.decreased;
                const double p = 1.0 - std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(
                                                           lambda, 1000)));
                res.drift.expected_decrease += p;
                res.drift.expected_variance += p * (1.0 - p);
            } else {
                ++res.drift.lambda1_steps;
                if (d_after != d_before) ++res.drift.lambda1_changed;
            }
        }

        if (with_coupling) {
            next_view.rebuild(config);
            res.coupling.violations +=
                static_cast<std::uint64_t>(check_domination(next_view, *coupling));
            // 1-Lipschitz order statistics, hence gaps move by at most 2.
            for (std::int64_t j = 0; j < n; ++j)
                if (std::abs(next_view.x[j] - view.x[j]) > 1)
                    ++res.coupling.order_lipschitz_violations;
            for (std::int64_t j = 0; j + 1 < n; ++j) {
                if (std::abs(next_view.gap[j] - view.gap[j]) > 2)
                    ++res.coupling.gap_lipschitz_violations;
                res.record.max_gap = std::max(res.record.max_gap, next_view.gap[j]);
            }
            std::swap(view, next_view);
        }
    }

    res.record.T = t;
    res.record.min_pos = config.occupancy().begin()->first;
    res.record.max_pos = config.occupancy().rbegin()->first;
    res.record.span = res.record.max_pos - res.record.min_pos;
    if (with_stats) res.record.max_d = std::max(res.record.max_d, closest_distance(config));
    if (trace) trace(t, res.record.span, closest_distance(config), max_adjacent_gap(config));
    if (with_coupling) {
        res.coupling.absorb(*coupling);
        res.record.e_events = coupling->e_event_count;
        res.record.domination_violations = res.coupling.violations;
    }
    return res;
}

// Grid trial: plain dynamics, extremes recorded as Chebyshev radii. Returns
// the final configuration as well so shape metrics can be computed on it.
inline TrialResult run_grid_trial(std::int64_t n, std::uint64_t seed, std::uint64_t max_steps,
                                  GridConfig* final_config = nullptr) {
    if (n < 1) throw std::invalid_argument("run_trial: n must be >= 1");
    if (max_steps < 1) throw std::invalid_argument("run_trial: max_steps must be >= 1");

    TrialResult res;
    res.record.seed = seed;
    res.record.n = n;
    res.record.topology = Topology::grid2;

    GridConfig config = GridConfig::point_mass(n);
    std::uint64_t t = 0;
    while (!config.settled()) {
        if (t >= max_steps) {
            res.record.capped = true;
            break;
        }
        StreamRng rng(seed, t);
        config.step(rng, t);
        ++t;
    }
    res.record.T = t;
    std::int64_t rmin = std::numeric_limits<std::int64_t>::max(), rmax = 0;
    for (const auto& [site, count] : config.occupancy()) {
        const std::int64_t r = chebyshev_norm(site);
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
    }
    res.record.min_pos = rmin;
    res.record.max_pos = rmax;
    res.record.span = rmax - rmin;
    if (final_config) *final_config = std::move(config);
    return res;
}

} // namespace dispersion
