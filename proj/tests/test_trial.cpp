#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dispersion/trial.hpp"

using namespace dispersion;

TEST_CASE("a single particle is born settled", "[trial]") {
    const TrialResult r = run_line_trial(1, 99, 1000);
    REQUIRE(r.record.T == 0);
    REQUIRE(r.record.span == 0);
    REQUIRE(r.record.min_pos == 0);
    REQUIRE_FALSE(r.record.capped);
}

TEST_CASE("a pair settles in geometric time with mean 2", "[trial]") {
    // T is the first split of the co-located pair, Geometric(1/2) on {1,2,...}
    const int trials = 100000;
    double sum = 0;
    for (int i = 0; i < trials; ++i) {
        const TrialResult r = run_line_trial(2, trial_seed(1234, 2, i), 100000);
        REQUIRE_FALSE(r.record.capped);
        REQUIRE(r.record.span == 1);
        sum += static_cast<double>(r.record.T);
    }
    const double mean = sum / trials;
    REQUIRE(mean > 1.98);
    REQUIRE(mean < 2.02);
}

TEST_CASE("trials are reproducible from (n, seed)", "[trial]") {
    const TrialResult a = run_line_trial(60, 4242, default_max_steps(60), Instrument::coupling);
    const TrialResult b = run_line_trial(60, 4242, default_max_steps(60), Instrument::coupling);
    REQUIRE(a.record.T == b.record.T);
    REQUIRE(a.record.span == b.record.span);
    REQUIRE(a.record.min_pos == b.record.min_pos);
    REQUIRE(a.record.max_d == b.record.max_d);
    REQUIRE(a.record.max_gap == b.record.max_gap);
    REQUIRE(a.coupling.tail_histogram == b.coupling.tail_histogram);
    REQUIRE(a.drift.qualifying == b.drift.qualifying);

    const TrialResult c = run_line_trial(60, 4243, default_max_steps(60), Instrument::coupling);
    REQUIRE(a.record.T != c.record.T); // overwhelmingly likely for n = 60
}

TEST_CASE("the step cap marks the record as capped", "[trial]") {
    const TrialResult r = run_line_trial(50, 7, 3);
    REQUIRE(r.record.capped);
    REQUIRE(r.record.T == 3);
}

TEST_CASE("settled line trials spread to distinct sites", "[trial]") {
    for (std::int64_t n : {2, 5, 17, 64}) {
        const TrialResult r = run_line_trial(n, trial_seed(5, n, 0), default_max_steps(n));
        REQUIRE_FALSE(r.record.capped);
        REQUIRE(r.record.span >= n - 1);
    }
}

TEST_CASE("instrumented runs hold every coupling invariant", "[trial]") {
    for (std::int64_t n : {10, 50, 120}) {
        for (int s = 0; s < 3; ++s) {
            const TrialResult r = run_line_trial(n, trial_seed(77, n, s),
                                                 default_max_steps(n), Instrument::coupling);
            REQUIRE_FALSE(r.record.capped);
            REQUIRE(r.record.domination_violations == 0);
            REQUIRE(r.coupling.gap_lipschitz_violations == 0);
            REQUIRE(r.coupling.order_lipschitz_violations == 0);
            REQUIRE(r.drift.lambda1_changed == 0);
            for (int c = 0; c < 3; ++c) REQUIRE(r.coupling.case_tallies[c].abs_above_2 == 0);
            // the histogram pools one value per gap per step
            std::uint64_t pooled = 0;
            for (auto h : r.coupling.tail_histogram) pooled += h;
            REQUIRE(pooled == r.coupling.steps * static_cast<std::uint64_t>(n - 1));
        }
    }
}

TEST_CASE("reflection symmetry of the endpoint law", "[trial]") {
    // reflecting every draw maps max_pos to -min_pos, so E[max + min] = 0
    const int trials = 400;
    const std::int64_t n = 30;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < trials; ++i) {
        const TrialResult r = run_line_trial(n, trial_seed(2718, n, i), default_max_steps(n));
        const double d = static_cast<double>(r.record.max_pos + r.record.min_pos);
        sum += d;
        sumsq += d * d;
    }
    const double mean = sum / trials;
    const double sd = std::sqrt((sumsq - trials * mean * mean) / (trials - 1));
    REQUIRE(std::abs(mean) <= 3.5 * sd / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("delta case statistics line up with the exact branch laws", "[trial]") {
    CouplingDiagnostics pooled;
    for (int s = 0; s < 4; ++s) {
        const TrialResult r =
            run_line_trial(150, trial_seed(99, 150, s), default_max_steps(150),
                           Instrument::coupling);
        pooled.merge(r.coupling);
    }
    const auto reports = delta_hat_stats(pooled, 1000);
    REQUIRE(reports.size() == 3);
    for (const auto& rep : reports) {
        REQUIRE(rep.enough_samples);
        REQUIRE(rep.bounded_ok);
        REQUIRE(rep.mean_ok);
        REQUIRE(rep.freq_ok);
    }
}

TEST_CASE("grid trials settle with conserved mass", "[trial]") {
    GridConfig final_config = GridConfig::point_mass(1);
    const TrialResult r = run_grid_trial(300, 31337, default_max_steps(300), &final_config);
    REQUIRE_FALSE(r.record.capped);
    REQUIRE(final_config.settled());
    std::int64_t sum = 0;
    for (const auto& [site, k] : final_config.occupancy()) {
        REQUIRE(k == 1);
        sum += k;
    }
    REQUIRE(sum == 300);
    REQUIRE(r.record.max_pos >= r.record.min_pos);
}

TEST_CASE("argument validation", "[trial]") {
    REQUIRE_THROWS_AS(run_line_trial(0, 1, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(run_line_trial(5, 1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(run_grid_trial(0, 1, 10), std::invalid_argument);
}
