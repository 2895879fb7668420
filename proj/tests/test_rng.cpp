#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "dispersion/rng.hpp"
#include "dispersion/stats.hpp"

using namespace dispersion;

namespace {

// Reference pmf: C(k, b) / 2^k.
double binom_half_pmf(int k, int b) {
    double c = 1;
    for (int i = 0; i < b; ++i) c = c * (k - i) / (i + 1);
    return c * std::ldexp(1.0, -k);
}

} // namespace

TEST_CASE("streams are deterministic and distinct", "[core][rng]") {
    StreamRng a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        REQUIRE(x == b.next_u64());
    }
    bool differs = false;
    StreamRng a2(42, 7);
    for (int i = 0; i < 100; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    REQUIRE(differs);
}

TEST_CASE("trial seeds are distinct across (n, index)", "[core][rng]") {
    std::set<std::uint64_t> seeds;
    for (std::int64_t n : {2, 125, 250, 500, 1000})
        for (std::int64_t i = 0; i < 200; ++i) seeds.insert(trial_seed(99, n, i));
    REQUIRE(seeds.size() == 5 * 200);
}

TEST_CASE("binomial_half(2) matches the exact pmf", "[core][rng]") {
    StreamRng rng(1234, 0);
    std::vector<std::uint64_t> counts(3, 0);
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) ++counts[rng.binomial_half(2)];
    // exact Binomial(2,1/2): 1/4, 1/2, 1/4
    const double p = chi_square_p_value(counts, {0.25, 0.5, 0.25});
    REQUIRE(p > 0.001);
}

TEST_CASE("binomial_half(4) matches the exact pmf", "[core][rng]") {
    StreamRng rng(99, 3);
    std::vector<std::uint64_t> counts(5, 0);
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) ++counts[rng.binomial_half(4)];
    std::vector<double> expected;
    for (int b = 0; b <= 4; ++b) expected.push_back(binom_half_pmf(4, b));
    REQUIRE(expected[0] == 1.0 / 16.0); // the "all left" row of the case table
    const double p = chi_square_p_value(counts, expected);
    REQUIRE(p > 0.001);
}

TEST_CASE("binomial_half spans block boundaries exactly", "[core][rng]") {
    // mean of Binomial(k,1/2) is k/2 for k around and above 64
    for (int k : {63, 64, 65, 130, 1000}) {
        StreamRng rng(5, k);
        double sum = 0;
        const int samples = 20000;
        for (int i = 0; i < samples; ++i) sum += static_cast<double>(rng.binomial_half(k));
        const double mean = sum / samples;
        const double se = std::sqrt(k / 4.0 / samples);
        REQUIRE(std::abs(mean - k / 2.0) < 5 * se);
        // range check: draws stay in [0, k]
        StreamRng rng2(6, k);
        for (int i = 0; i < 1000; ++i) {
            const auto b = rng2.binomial_half(k);
            REQUIRE(b >= 0);
            REQUIRE(b <= k);
        }
    }
}
