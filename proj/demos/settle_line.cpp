// Minimal library walkthrough: drop a stack of particles on the origin,
// run the process to settlement, and print what happened.

#include <cinttypes>
#include <cstdio>

#include "dispersion/trial.hpp"

int main() {
    using namespace dispersion;

    const std::int64_t n = 64;
    const std::uint64_t seed = 7;
    const TrialResult r =
        run_line_trial(n, seed, default_max_steps(n), Instrument::coupling);

    std::printf("n=%" PRId64 " seed=%" PRIu64 "\n", n, seed);
    std::printf("settled after %" PRIu64 " steps\n", r.record.T);
    std::printf("occupied interval [%" PRId64 ", %" PRId64 "], span %" PRId64 "\n",
                r.record.min_pos, r.record.max_pos, r.record.span);
    std::printf("density %.3f, max gap seen %" PRId64 ", domination violations %" PRIu64 "\n",
                static_cast<double>(n - 1) / static_cast<double>(r.record.span),
                r.record.max_gap, r.record.domination_violations);

    // Re-run the final few positions for a picture of the settled line.
    LineConfig c = LineConfig::point_mass(n);
    for (std::uint64_t t = 0; t < r.record.T; ++t) {
        StreamRng rng(seed, t);
        c.step(rng, t);
    }
    std::printf("final configuration:\n");
    std::int64_t cursor = r.record.min_pos;
    for (const auto& [site, count] : c.occupancy()) {
        for (; cursor < site; ++cursor) std::printf(".");
        std::printf("%c", count > 1 ? '#' : 'o');
        ++cursor;
    }
    std::printf("\n");
    return 0;
}
