#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dispersion/concentration.hpp"

using namespace dispersion;

namespace {

TailSpec uniform01() {
    // fair coin on {0,1}: survival Pr(Y>=1) = 1/2 = C rho with C=1, rho=1/2
    return TailSpec(1.0, 0.5, {0.5, 0.5});
}

} // namespace

TEST_CASE("mean bound mu = C/(1-rho)", "[conc]") {
    REQUIRE(tail_mean_bound(1.0, 0.5) == Catch::Approx(2.0));
    REQUIRE(tail_mean_bound(2.0, 0.9) == Catch::Approx(20.0));
    REQUIRE_THROWS_AS(tail_mean_bound(1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(tail_mean_bound(0.0, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(tail_mean_bound(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("TailSpec validates normalization and domination", "[conc]") {
    REQUIRE_NOTHROW(uniform01());
    REQUIRE_THROWS_AS(TailSpec(1.0, 0.5, {0.5, 0.4}), std::invalid_argument);  // sums to 0.9
    REQUIRE_THROWS_AS(TailSpec(0.1, 0.5, {0.5, 0.5}), std::invalid_argument);  // survival 0.5 > 0.05
    REQUIRE_THROWS_AS(TailSpec(1.0, 0.5, {1.5, -0.5}), std::invalid_argument); // negative mass
    const TailSpec geo = TailSpec::geometric_dominated(1.0, 0.5);
    REQUIRE(geo.support_max() >= 49);
    REQUIRE(geo.mean() == Catch::Approx(1.0).epsilon(1e-9)); // Geometric(1/2) on {0,1,...}
}

TEST_CASE("parameter selection reproduces the worked instance", "[conc]") {
    const LemmaParams p = choose_params(1.0, 0.5, 0.5);
    REQUIRE(p.mu == Catch::Approx(2.0));
    REQUIRE(p.eta == Catch::Approx(0.25));
    REQUIRE(p.lambda == Catch::Approx(0.00390625));
    REQUIRE(p.B == Catch::Approx(1.0 / 256.0));
    // the exponential-vs-linear feasibility inequality holds
    REQUIRE(std::exp(p.lambda) <= (1.0 - p.eta) / p.rho);
}

TEST_CASE("bound is exponential in m and degenerates at eps = 0", "[conc]") {
    const LemmaParams p = choose_params(1.0, 0.5, 0.5);
    REQUIRE(p.bound(20) == Catch::Approx(p.bound(10) * p.bound(10)));
    REQUIRE(p.bound(20) < p.bound(10));
    const LemmaParams zero = choose_params(1.0, 0.5, 0.0);
    REQUIRE(zero.bound(10) == 1.0);
    REQUIRE(zero.bound(1000) == 1.0);
    REQUIRE_THROWS_AS(choose_params(1.0, 0.5, 1.5), std::invalid_argument);
}

TEST_CASE("moment chain inequalities have non-negative slack", "[conc]") {
    const TailSpec geo = TailSpec::geometric_dominated(1.0, 0.5);
    const LemmaParams p = choose_params(1.0, 0.5, 0.5);
    const MgfSlacks s = mgf_chain_check(geo, p.lambda);
    REQUIRE(s.second_moment_slack >= 0);
    REQUIRE(s.mgf_slack >= 0);
    REQUIRE(s.mgf_value >= 1.0);

    // all mass at zero: E[Z^2 e^(lambda Z)] = 0
    const TailSpec point(1.0, 0.5, {1.0});
    const MgfSlacks s0 = mgf_chain_check(point, p.lambda);
    REQUIRE(s0.second_moment_value == 0.0);
    REQUIRE(s0.second_moment_slack >= 0);

    // lambda -> 0 boundary: E[e^(lambda Z)] -> 1 and the bound -> 1
    const MgfSlacks tiny = mgf_chain_check(geo, 0.0);
    REQUIRE(tiny.mgf_value == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(tiny.mgf_slack >= -1e-12);

    REQUIRE_THROWS_AS(mgf_chain_check(geo, 1.0), std::invalid_argument); // rho e^1 > 1
}

TEST_CASE("exact convolution tail on hand-checkable inputs", "[conc]") {
    const TailSpec u = uniform01();
    REQUIRE(exact_tail(u, 1, 0) == 1.0);
    REQUIRE(exact_tail(u, 2, 2) == Catch::Approx(0.25).epsilon(1e-14));
    REQUIRE(exact_tail(u, 2, 3) == 0.0);
    REQUIRE(exact_tail(u, 3, 2) == Catch::Approx(0.5).epsilon(1e-14)); // C(3,2)/8 + C(3,3)/8
}

TEST_CASE("convolution preserves mean and variance", "[conc]") {
    const TailSpec geo = TailSpec::geometric_dominated(1.0, 0.5);
    for (std::int64_t m : {2, 7, 30}) {
        const auto conv = convolve_power(geo, m);
        double mean = 0, total = 0;
        for (std::size_t k = 0; k < conv.size(); ++k) {
            mean += static_cast<double>(k) * conv[k];
            total += conv[k];
        }
        double var = 0;
        for (std::size_t k = 0; k < conv.size(); ++k)
            var += (static_cast<double>(k) - mean) * (static_cast<double>(k) - mean) * conv[k];
        REQUIRE(total == Catch::Approx(1.0).epsilon(1e-12));
        REQUIRE(mean == Catch::Approx(m * geo.mean()).epsilon(1e-9));
        REQUIRE(var == Catch::Approx(m * geo.variance()).epsilon(1e-9));
    }
}

TEST_CASE("tail is monotone in threshold and support-limited", "[conc]") {
    const TailSpec geo = TailSpec::geometric_dominated(1.0, 0.5);
    double prev = 1.0;
    for (std::int64_t thr = 0; thr <= 40; thr += 5) {
        const double tail = exact_tail(geo, 10, thr);
        REQUIRE(tail <= prev + 1e-15);
        prev = tail;
    }
    REQUIRE_THROWS_AS(convolve_power(geo, 1000000), std::invalid_argument);
}

TEST_CASE("the tail bound certifies on the worked instance", "[conc]") {
    // 30 summands, eps = 1/2: threshold ceil(1.5 * mu * 30) = 90
    const TailSpec geo = TailSpec::geometric_dominated(1.0, 0.5);
    const LemmaParams p = choose_params(1.0, 0.5, 0.5);
    const std::int64_t threshold =
        static_cast<std::int64_t>(std::ceil(1.5 * p.mu * 30.0));
    REQUIRE(threshold == 90);
    const double tail = exact_tail(geo, 30, threshold);
    REQUIRE(tail > 0.0);
    REQUIRE(tail <= p.bound(30));
}

TEST_CASE("oracle domination across the (m, eps) grid", "[conc]") {
    const TailSpec geo = TailSpec::geometric_dominated(1.0, 0.5);
    for (double eps : {0.25, 0.5, 1.0}) {
        const LemmaParams p = choose_params(1.0, 0.5, eps);
        const MgfSlacks s = mgf_chain_check(geo, p.lambda);
        REQUIRE(s.second_moment_slack >= 0);
        REQUIRE(s.mgf_slack >= 0);
        for (std::int64_t m : {10, 30, 50}) {
            const std::int64_t threshold = static_cast<std::int64_t>(
                std::ceil((1.0 + eps) * p.mu * static_cast<double>(m)));
            const double tail = exact_tail(geo, m, threshold);
            REQUIRE(tail <= p.bound(m));
            // Chernoff dominance with the chosen lambda
            const double chernoff =
                std::exp(-p.lambda * (1.0 + eps) * static_cast<double>(m)) *
                std::pow(s.mgf_value, static_cast<double>(m));
            REQUIRE(tail <= chernoff + 1e-12);
        }
    }
}
