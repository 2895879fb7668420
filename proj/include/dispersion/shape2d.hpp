#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dispersion/process.hpp"

namespace dispersion {

// Exploratory final-shape metrics for settled 2D configurations: how far the
// particles reach, how densely they fill the enclosing disk, and how round
// the occupied set is.
struct ShapeMetrics {
    std::int64_t occupied_count = 0; // = n once settled
    double r_max = 0;                // max Euclidean norm of an occupied site
    std::int64_t r_inf = 0;          // max Chebyshev norm
    double disk_density = 0;         // n / (pi r_max^2), clamped to <= 1
    double anisotropy = 1;           // max/min directional extent over 8 compass rays
    std::array<double, 8> extent{};  // E, NE, N, NW, W, SW, S, SE
};

// Metrics of a settled grid configuration. Directional extent is measured
// along the 8 compass rays from the origin: each occupied site contributes
// to the ray within 22.5 degrees of its direction.
inline ShapeMetrics shape_metrics(const GridConfig& c) {
    if (!c.settled()) throw std::invalid_argument("shape_metrics: configuration not settled");
    const double pi = 4.0 * std::atan(1.0);
    ShapeMetrics m;
    double r2_max = 0;
    for (const auto& [site, count] : c.occupancy()) {
        m.occupied_count += count;
        const double r2 = static_cast<double>(site.x) * static_cast<double>(site.x) +
                          static_cast<double>(site.y) * static_cast<double>(site.y);
        r2_max = std::max(r2_max, r2);
        m.r_inf = std::max(m.r_inf, chebyshev_norm(site));
        if (site.x == 0 && site.y == 0) continue;
        const double angle = std::atan2(static_cast<double>(site.y), static_cast<double>(site.x));
        int ray = static_cast<int>(std::lround(angle / (pi / 4.0)));
        ray = ((ray % 8) + 8) % 8;
        m.extent[ray] = std::max(m.extent[ray], std::sqrt(r2));
    }
    m.r_max = std::sqrt(r2_max);
    if (m.r_max == 0) {
        m.disk_density = 1.0; // a point mass trivially fills its (degenerate) disk
        m.anisotropy = 1.0;
        return m;
    }
    m.disk_density = std::min(
        1.0, static_cast<double>(m.occupied_count) / (pi * m.r_max * m.r_max));
    double lo = m.extent[0], hi = m.extent[0];
    for (double e : m.extent) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    m.anisotropy = lo > 0 ? hi / lo
                          : (hi > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    return m;
}

// One "x y" pair per line, sorted lexicographically (the configuration's
// natural order).
inline void write_snapshot(std::ostream& os, const GridConfig& c, const std::string& header) {
    if (!header.empty()) os << "# " << header << "\n";
    for (const auto& [site, count] : c.occupancy())
        for (std::int64_t k = 0; k < count; ++k) os << site.x << ' ' << site.y << "\n";
}

} // namespace dispersion
