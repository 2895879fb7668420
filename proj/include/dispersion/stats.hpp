#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dispersion {

struct LeastSquaresFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 1;
};

// Ordinary least squares of y against x. r_squared is 1 when the ys are
// constant (zero residual around a flat line).
inline LeastSquaresFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw std::invalid_argument("least_squares: x values are all equal");
    LeastSquaresFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (syy > 0) {
        double ss_res = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            ss_res += r * r;
        }
        f.r_squared = 1.0 - ss_res / syy;
    }
    return f;
}

// Summary of one sample: moments plus order statistics.
struct SampleStats {
    std::uint64_t count = 0;
    double mean = 0, stddev = 0;
    double min = 0, max = 0;
    double q05 = 0, q50 = 0, q95 = 0;
};

// Quantile by linear interpolation between order statistics.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline SampleStats summarize(std::vector<double> values) {
    SampleStats s;
    s.count = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    s.min = values.front();
    s.max = values.back();
    s.q05 = quantile_sorted(values, 0.05);
    s.q50 = quantile_sorted(values, 0.50);
    s.q95 = quantile_sorted(values, 0.95);
    return s;
}

// Chi-square test p-value against fixed cell probabilities. The p-value is
// exact for 3 cells (df = 2) via the closed-form CDF and uses the Wilson-
// Hilferty approximation otherwise; both are plenty for pass/fail at 0.001.
inline double chi_square_p_value(const std::vector<std::uint64_t>& observed,
                                 const std::vector<double>& expected_probability) {
    if (observed.size() != expected_probability.size() || observed.size() < 2)
        throw std::invalid_argument("chi_square: mismatched cells");
    double total = 0;
    for (auto c : observed) total += static_cast<double>(c);
    double chi2 = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = total * expected_probability[i];
        if (e <= 0) throw std::invalid_argument("chi_square: zero expected cell");
        const double d = static_cast<double>(observed[i]) - e;
        chi2 += d * d / e;
    }
    const double df = static_cast<double>(observed.size() - 1);
    if (observed.size() == 3) return std::exp(-chi2 / 2.0); // exact for df = 2
    const double z = (std::cbrt(chi2 / df) - (1.0 - 2.0 / (9.0 * df))) /
                     std::sqrt(2.0 / (9.0 * df));
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

// Geometric-tail fit on a histogram of non-negative integer excesses.
// Fits log survival Pr(X >= k) against k over the ks backed by >= 30
// samples; rho_hat = exp(slope).
struct RhoFit {
    double rho = 0;
    double slope = 0;
    double r_squared = 0;
    std::int64_t points_used = 0;
};

inline std::optional<RhoFit> estimate_rho(const std::vector<std::uint64_t>& histogram,
                                          std::uint64_t min_samples = 30) {
    std::uint64_t total = 0;
    for (auto c : histogram) total += c;
    if (total == 0) return std::nullopt;
    // survival[k] counts samples >= k, accumulated from the top.
    std::vector<double> ks, log_survival;
    std::uint64_t above = 0;
    std::vector<std::uint64_t> survival(histogram.size(), 0);
    for (std::size_t k = histogram.size(); k-- > 0;) {
        above += histogram[k];
        survival[k] = above;
    }
    for (std::size_t k = 0; k < survival.size(); ++k) {
        if (survival[k] < min_samples) break;
        ks.push_back(static_cast<double>(k));
        log_survival.push_back(std::log(static_cast<double>(survival[k]) /
                                        static_cast<double>(total)));
    }
    if (ks.size() < 2) return std::nullopt;
    const LeastSquaresFit f = least_squares(ks, log_survival);
    RhoFit r;
    r.slope = f.slope;
    r.rho = std::exp(f.slope);
    r.r_squared = f.r_squared;
    r.points_used = static_cast<std::int64_t>(ks.size());
    return r;
}

} // namespace dispersion
