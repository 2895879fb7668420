#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dispersion/process.hpp"

namespace dispersion {

// Ordered view of a line configuration: particles labelled 0..n-1 left to
// right, with their gaps, stack sizes and stack ranks. Rebuilt from scratch
// each step; all indices are 0-based (gap j sits between particles j and j+1).
struct OrderedView {
    std::vector<std::int64_t> x;          // sorted positions, one per particle
    std::vector<std::int64_t> gap;        // gap[j] = x[j+1] - x[j], size n-1
    std::vector<std::int64_t> stack_size; // s_j: count at particle j's site
    std::vector<std::int64_t> stack_rank; // P(j): left-to-right stack index
    std::int64_t stack_count = 0;         // m: number of non-empty stacks
    std::vector<std::int64_t> active;     // I_t: gap indices with gap >= 2
    std::vector<std::int64_t> singletons; // J_t: particles alone on their site

    std::int64_t n() const noexcept { return static_cast<std::int64_t>(x.size()); }

    void rebuild(const LineConfig& c) {
        const std::int64_t n = c.total();
        x.clear();
        stack_size.clear();
        stack_rank.clear();
        x.reserve(n);
        stack_size.reserve(n);
        stack_rank.reserve(n);
        stack_count = 0;
        for (const auto& [site, count] : c.occupancy()) {
            for (std::int64_t k = 0; k < count; ++k) {
                x.push_back(site);
                stack_size.push_back(count);
                stack_rank.push_back(stack_count);
            }
            ++stack_count;
        }
        gap.assign(n > 0 ? n - 1 : 0, 0);
        active.clear();
        for (std::int64_t j = 0; j + 1 < n; ++j) {
            gap[j] = x[j + 1] - x[j];
            if (gap[j] >= 2) active.push_back(j);
        }
        singletons.clear();
        for (std::int64_t j = 0; j < n; ++j)
            if (stack_size[j] == 1) singletons.push_back(j);
    }
};

inline OrderedView ordered_view(const LineConfig& c) {
    OrderedView v;
    v.rebuild(c);
    return v;
}

namespace detail {

// Binomial drawn at the given site; the draw entries are sorted by site.
inline std::int64_t draw_at(const LineDraw& d, std::int64_t site) {
    auto it = std::lower_bound(d.entries.begin(), d.entries.end(), site,
                               [](const LineDraw::Entry& e, std::int64_t s) { return e.site < s; });
    if (it == d.entries.end() || it->site != site)
        throw std::logic_error("ordered coupling: missing draw for a stack of size >= 2");
    return it->draw.moved_right;
}

} // namespace detail

// The dominating gap increment: the case table evaluated on the realized
// binomials. b_j is the binomial drawn at particle j's site (defined only
// when its stack has size >= 2; for a gap in I_t the two sites differ, so
// the two binomials are independent).
inline int delta_hat(const OrderedView& v, const LineDraw& d, std::int64_t j) {
    if (j < 0 || j + 1 >= v.n()) throw std::invalid_argument("delta_hat: gap index out of range");
    if (v.gap[j] < 2) return 0; // j not in I_t
    const std::int64_t sj = v.stack_size[j];
    const std::int64_t sj1 = v.stack_size[j + 1];
    if (sj >= 2 && sj1 >= 2) {
        const std::int64_t bj = detail::draw_at(d, v.x[j]);
        const std::int64_t bj1 = detail::draw_at(d, v.x[j + 1]);
        if (bj == 0 && bj1 == sj1) return 2;
        if (bj > 0 && bj1 < sj1) return -2;
        return 0;
    }
    if (sj >= 2) { // right neighbour is a singleton
        return detail::draw_at(d, v.x[j]) == 0 ? 1 : -1;
    }
    if (sj1 >= 2) { // left side is a singleton
        return detail::draw_at(d, v.x[j + 1]) == sj1 ? 1 : -1;
    }
    return 0; // two singletons facing each other
}

// Tally for one stack-size case of the table: observed mean, positive-branch
// frequency, and the exact per-sample branch probability (a dyadic number)
// accumulated for the statistical comparison.
struct DeltaCaseTally {
    std::uint64_t samples = 0;
    std::int64_t delta_sum = 0;
    std::int64_t delta_sq_sum = 0;
    std::uint64_t positive = 0;
    std::uint64_t abs_above_2 = 0; // |delta_hat| > 2 occurrences; must stay 0
    double expected_positive = 0;  // sum of exact branch probabilities
    double expected_variance = 0;  // sum of p(1-p)

    void add(int delta, double p_positive) {
        ++samples;
        delta_sum += delta;
        delta_sq_sum += delta * delta;
        if (delta > 0) ++positive;
        if (delta > 2 || delta < -2) ++abs_above_2;
        expected_positive += p_positive;
        expected_variance += p_positive * (1.0 - p_positive);
    }

    void merge(const DeltaCaseTally& o) {
        samples += o.samples;
        delta_sum += o.delta_sum;
        delta_sq_sum += o.delta_sq_sum;
        positive += o.positive;
        abs_above_2 += o.abs_above_2;
        expected_positive += o.expected_positive;
        expected_variance += o.expected_variance;
    }

    double mean() const { return samples ? static_cast<double>(delta_sum) / samples : 0.0; }
    double positive_frequency() const {
        return samples ? static_cast<double>(positive) / samples : 0.0;
    }
    double mean_stderr() const {
        if (samples < 2) return 0;
        const double m = mean();
        const double var =
            (static_cast<double>(delta_sq_sum) - static_cast<double>(samples) * m * m) /
            static_cast<double>(samples - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
    }
    double frequency_stderr() const {
        return samples ? std::sqrt(expected_variance) / static_cast<double>(samples) : 0.0;
    }
};

// Indices into CouplingState::case_tallies.
enum DeltaCase { case_both_stacks = 0, case_right_singleton = 1, case_left_singleton = 2 };

// State of the dominating coupling: one bound per gap, all started at 3.
// Also owns the diagnostics that are pooled over the run: the (ghat - 3)
// tail histogram, residue-class sums, E-event count and case tallies.
struct CouplingState {
    std::vector<std::int64_t> g_hat; // size n-1, always >= 3
    std::int64_t residue_classes;    // L = ceil((ln n)^2)
    std::uint64_t e_event_count = 0;
    std::vector<std::uint64_t> tail_histogram; // counts of (ghat - 3), pooled over steps
    std::vector<DeltaCaseTally> case_tallies{3};
    double max_class_sum_norm = 0; // max over t,i of Z_i / |A_i|
    std::uint64_t steps = 0;

    // Report-only diagnostic: sample correlation of delta_hat pairs at gap
    // index lag 3L (far enough apart that the proof treats them as
    // independent). Accumulated as raw sums.
    std::uint64_t pair_count = 0;
    double pair_sx = 0, pair_sy = 0, pair_sxx = 0, pair_syy = 0, pair_sxy = 0;

    explicit CouplingState(std::int64_t n)
        : g_hat(n > 0 ? n - 1 : 0, 3),
          residue_classes(static_cast<std::int64_t>(
              std::ceil(std::pow(std::log(static_cast<double>(std::max<std::int64_t>(n, 2))), 2)))) {}

    // Pearson correlation of the accumulated pairs, if defined.
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

// True iff some stack of size >= L/2 moved monolithically (event E).
inline bool detect_e_event(const LineDraw& d, std::int64_t residue_classes) {
    for (const auto& e : d.entries) {
        if (2 * e.count >= residue_classes &&
            (e.draw.moved_right == 0 || e.draw.moved_right == e.count))
            return true;
    }
    return false;
}

// Z_i = sum of ghat over gap indices congruent to i mod L.
inline std::vector<std::int64_t> residue_class_sums(const CouplingState& st) {
    std::vector<std::int64_t> z(st.residue_classes, 0);
    for (std::size_t j = 0; j < st.g_hat.size(); ++j)
        z[static_cast<std::int64_t>(j) % st.residue_classes] += st.g_hat[j];
    return z;
}

// Advance the coupling by one step using the same realized draw that moves
// the configuration: ghat <- max(3, ghat + delta_hat) on I_t, reset to 3 off
// it. Accumulates all per-step diagnostics.
inline void update_coupling(CouplingState& st, const OrderedView& v, const LineDraw& d) {
    const std::int64_t n = v.n();
    if (static_cast<std::int64_t>(st.g_hat.size()) != n - 1)
        throw std::logic_error("update_coupling: state size does not match view");

    // Walk stacks and draw entries together so each gap's binomials are O(1).
    // boundary[l] = index of the last particle of stack l; b_of_stack[l] the
    // binomial drawn there, or -1 for singleton stacks.
    static thread_local std::vector<std::int64_t> b_of_stack;
    b_of_stack.assign(v.stack_count, -1);
    {
        std::size_t di = 0;
        std::int64_t rank = -1;
        for (std::int64_t j = 0; j < n; ++j) {
            if (v.stack_rank[j] == rank) continue;
            rank = v.stack_rank[j];
            if (v.stack_size[j] >= 2) {
                while (di < d.entries.size() && d.entries[di].site < v.x[j]) ++di;
                if (di == d.entries.size() || d.entries[di].site != v.x[j])
                    throw std::logic_error("update_coupling: missing draw for active stack");
                b_of_stack[rank] = d.entries[di].draw.moved_right;
            }
        }
    }

    auto branch = [&](std::int64_t j) -> std::pair<int, int> {
        // returns (delta, case id) for j in I_t; case id -1 for two singletons
        const std::int64_t sj = v.stack_size[j];
        const std::int64_t sj1 = v.stack_size[j + 1];
        if (sj >= 2 && sj1 >= 2) {
            const std::int64_t bj = b_of_stack[v.stack_rank[j]];
            const std::int64_t bj1 = b_of_stack[v.stack_rank[j + 1]];
            if (bj == 0 && bj1 == sj1) return {2, case_both_stacks};
            if (bj > 0 && bj1 < sj1) return {-2, case_both_stacks};
            return {0, case_both_stacks};
        }
        if (sj >= 2) return {b_of_stack[v.stack_rank[j]] == 0 ? 1 : -1, case_right_singleton};
        if (sj1 >= 2)
            return {b_of_stack[v.stack_rank[j + 1]] == sj1 ? 1 : -1, case_left_singleton};
        return {0, -1};
    };

    static thread_local std::vector<int> deltas;
    deltas.assign(n > 0 ? n - 1 : 0, 0);

    std::size_t ai = 0; // cursor into v.active
    for (std::int64_t j = 0; j + 1 < n; ++j) {
        const bool in_I = ai < v.active.size() && v.active[ai] == j;
        if (!in_I) {
            st.g_hat[j] = 3;
            continue;
        }
        ++ai;
        const auto [delta, case_id] = branch(j);
        deltas[j] = delta;
        if (case_id >= 0) {
            double p_pos;
            const std::int64_t sj = v.stack_size[j], sj1 = v.stack_size[j + 1];
            if (case_id == case_both_stacks)
                p_pos = std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(sj + sj1, 1000)));
            else if (case_id == case_right_singleton)
                p_pos = std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(sj, 1000)));
            else
                p_pos = std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(sj1, 1000)));
            st.case_tallies[case_id].add(delta, p_pos);
        }
        st.g_hat[j] = std::max<std::int64_t>(3, st.g_hat[j] + delta);
    }

    if (detect_e_event(d, st.residue_classes)) ++st.e_event_count;

    const std::int64_t lag = 3 * st.residue_classes;
    for (std::int64_t j : v.active) {
        const std::int64_t j2 = j + lag;
        if (j2 + 1 >= n || v.gap[j2] < 2) continue;
        const double a = deltas[j], b = deltas[j2];
        ++st.pair_count;
        st.pair_sx += a;
        st.pair_sy += b;
        st.pair_sxx += a * a;
        st.pair_syy += b * b;
        st.pair_sxy += a * b;
    }

    // Pool the updated bounds into the tail histogram and class sums.
    static thread_local std::vector<std::int64_t> z;
    z.assign(st.residue_classes, 0);
    for (std::size_t j = 0; j < st.g_hat.size(); ++j) {
        const std::size_t excess = static_cast<std::size_t>(st.g_hat[j] - 3);
        if (excess >= st.tail_histogram.size()) st.tail_histogram.resize(excess + 1, 0);
        ++st.tail_histogram[excess];
        z[static_cast<std::int64_t>(j) % st.residue_classes] += st.g_hat[j];
    }
    const std::int64_t gaps = static_cast<std::int64_t>(st.g_hat.size());
    for (std::int64_t i = 0; i < st.residue_classes && i < gaps; ++i) {
        const std::int64_t members = (gaps - 1 - i) / st.residue_classes + 1;
        st.max_class_sum_norm =
            std::max(st.max_class_sum_norm, static_cast<double>(z[i]) / members);
    }
    ++st.steps;
}

// Number of gaps whose bound fails (g > ghat) in the advanced view; the
// domination claim says this is always 0.
inline std::int64_t check_domination(const OrderedView& next, const CouplingState& st) {
    std::int64_t violations = 0;
    for (std::size_t j = 0; j < next.gap.size(); ++j)
        if (next.gap[j] > st.g_hat[j]) ++violations;
    return violations;
}

} // namespace dispersion
