#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "dispersion/shape2d.hpp"
#include "dispersion/trial.hpp"

using namespace dispersion;

TEST_CASE("a lone particle has degenerate metrics", "[shape2d]") {
    const auto m = shape_metrics(GridConfig::point_mass(1));
    REQUIRE(m.occupied_count == 1);
    REQUIRE(m.r_max == 0.0);
    REQUIRE(m.r_inf == 0);
    REQUIRE(m.disk_density == 1.0);
    REQUIRE(m.anisotropy == 1.0);
}

TEST_CASE("unsettled configurations are rejected", "[shape2d]") {
    REQUIRE_THROWS_AS(shape_metrics(GridConfig::point_mass(3)), std::invalid_argument);
}

TEST_CASE("a full lattice disk of radius 10 reads as a unit-density disk", "[shape2d]") {
    std::vector<GridConfig::Entry> sites;
    for (std::int64_t x = -10; x <= 10; ++x)
        for (std::int64_t y = -10; y <= 10; ++y)
            if (x * x + y * y <= 100) sites.push_back({{x, y}, 1});
    REQUIRE(sites.size() == 317); // lattice points inside the radius-10 disk
    const auto m = shape_metrics(GridConfig::from_entries(std::move(sites)));
    REQUIRE(m.occupied_count == 317);
    REQUIRE(m.r_max == Catch::Approx(10.0));
    REQUIRE(m.r_inf == 10);
    // 317 / (100 pi) is a touch above 1; the reported density is clamped
    REQUIRE(m.disk_density == Catch::Approx(1.0));
    REQUIRE(m.anisotropy == Catch::Approx(1.0));
}

TEST_CASE("norm inequalities hold on settled dispersion output", "[shape2d]") {
    GridConfig final_config = GridConfig::point_mass(1);
    const TrialResult r = run_grid_trial(2000, 77, default_max_steps(2000), &final_config);
    REQUIRE_FALSE(r.record.capped);
    const auto m = shape_metrics(final_config);
    REQUIRE(m.occupied_count == 2000);
    REQUIRE(static_cast<double>(m.r_inf) <= m.r_max + 1e-9);
    REQUIRE(m.r_max <= std::sqrt(2.0) * static_cast<double>(m.r_inf) + 1e-9);
    REQUIRE(m.disk_density > 0.0);
    REQUIRE(m.disk_density <= 1.0);
    REQUIRE(m.anisotropy >= 1.0);
}

TEST_CASE("axis extents agree in distribution", "[shape2d]") {
    // lattice symmetry: the mean directional extent is the same on all four axes
    const int trials = 32;
    const std::int64_t n = 400;
    double mean[4] = {0, 0, 0, 0}, sq[4] = {0, 0, 0, 0};
    for (int i = 0; i < trials; ++i) {
        GridConfig final_config = GridConfig::point_mass(1);
        run_grid_trial(n, trial_seed(424, n, i), default_max_steps(n), &final_config);
        const auto m = shape_metrics(final_config);
        const double e[4] = {m.extent[0], m.extent[2], m.extent[4], m.extent[6]}; // E N W S
        for (int a = 0; a < 4; ++a) {
            mean[a] += e[a];
            sq[a] += e[a] * e[a];
        }
    }
    for (int a = 0; a < 4; ++a) {
        mean[a] /= trials;
        sq[a] = std::sqrt((sq[a] / trials - mean[a] * mean[a]) / (trials - 1));
    }
    for (int a = 1; a < 4; ++a) {
        const double se = std::sqrt(sq[0] * sq[0] + sq[a] * sq[a]);
        REQUIRE(std::abs(mean[a] - mean[0]) <= 4.0 * se + 1e-9);
    }
}

TEST_CASE("snapshots list each occupied site in order", "[shape2d]") {
    auto c = GridConfig::from_entries({{{1, 2}, 1}, {{-1, 0}, 1}, {{1, -3}, 1}});
    std::ostringstream os;
    write_snapshot(os, c, "test");
    REQUIRE(os.str() == "# test\n-1 0\n1 -3\n1 2\n");
}
