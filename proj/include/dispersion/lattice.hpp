#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <string>

#include "dispersion/rng.hpp"

namespace dispersion {

enum class Topology { line, grid2 };

inline std::string to_string(Topology t) {
    return t == Topology::line ? "line" : "grid2";
}

struct GridSite {
    std::int64_t x{};
    std::int64_t y{};
    auto operator<=>(const GridSite&) const = default;
};

// Topology policies. A policy fixes the site type, the per-site move draw,
// how a draw is sampled, and where departing particles land.

struct LineTopology {
    static constexpr Topology id = Topology::line;
    using Site = std::int64_t;

    // Number of particles jumping from i to i+1; the remaining count-b go to i-1.
    struct Draw {
        std::int64_t moved_right{};
    };

    static constexpr Site origin() noexcept { return 0; }

    static Draw sample(std::int64_t count, StreamRng& rng) noexcept {
        return Draw{rng.binomial_half(count)};
    }

    template <class Sink>
    static void scatter(Site site, std::int64_t count, const Draw& d, Sink&& add) {
        add(site - 1, count - d.moved_right);
        add(site + 1, d.moved_right);
    }
};

struct GridTopology {
    static constexpr Topology id = Topology::grid2;
    using Site = GridSite;

    // Counts leaving towards +x, -x, +y, -y; they sum to the site count.
    struct Draw {
        std::array<std::int64_t, 4> out{};
    };

    static constexpr Site origin() noexcept { return GridSite{0, 0}; }

    // Multinomial(count; 1/4,1/4,1/4,1/4) by sequential exact fair-binomial
    // splits: count -> x-axis vs y-axis, then each axis half into its two
    // directions.
    static Draw sample(std::int64_t count, StreamRng& rng) noexcept {
        const std::int64_t on_x = rng.binomial_half(count);
        const std::int64_t on_y = count - on_x;
        const std::int64_t pos_x = rng.binomial_half(on_x);
        const std::int64_t pos_y = rng.binomial_half(on_y);
        return Draw{{pos_x, on_x - pos_x, pos_y, on_y - pos_y}};
    }

    template <class Sink>
    static void scatter(Site site, std::int64_t /*count*/, const Draw& d, Sink&& add) {
        add(GridSite{site.x + 1, site.y}, d.out[0]);
        add(GridSite{site.x - 1, site.y}, d.out[1]);
        add(GridSite{site.x, site.y + 1}, d.out[2]);
        add(GridSite{site.x, site.y - 1}, d.out[3]);
    }
};

inline std::int64_t chebyshev_norm(const GridSite& s) noexcept {
    const std::int64_t ax = std::abs(s.x);
    const std::int64_t ay = std::abs(s.y);
    return ax > ay ? ax : ay;
}

} // namespace dispersion
