#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dispersion/lattice.hpp"
#include "dispersion/rng.hpp"

namespace dispersion {

// The per-step randomness: one draw for every site holding >= 2 particles,
// recorded in ascending site order together with the count it was drawn for.
template <class Topo>
struct MoveDraw {
    using Site = typename Topo::Site;

    struct Entry {
        Site site{};
        std::int64_t count{};
        typename Topo::Draw draw{};
    };

    std::uint64_t step = 0;      // t the draw belongs to
    std::uint64_t stream_id = 0; // RNG stream the draw was generated from
    std::vector<Entry> entries;  // ascending site order

    bool empty() const noexcept { return entries.empty(); }
};

using LineDraw = MoveDraw<LineTopology>;
using GridDraw = MoveDraw<GridTopology>;

// Sparse particle configuration on the lattice: a sorted flat association
// site -> positive count. Absent site <=> empty; counts sum to n. The sorted
// layout doubles as the per-step snapshot that fixes the draw order, and one
// merge pass advances the whole configuration, so a step costs one linear
// sweep instead of per-site tree updates.
template <class Topo>
class Configuration {
public:
    using Site = typename Topo::Site;
    using Entry = std::pair<Site, std::int64_t>;

    // n particles stacked on the origin.
    static Configuration point_mass(std::int64_t n) {
        if (n < 1) throw std::invalid_argument("point_mass: n must be >= 1");
        Configuration c;
        c.total_ = n;
        c.occ_.push_back({Topo::origin(), n});
        if (n >= 2) c.active_.push_back(0);
        return c;
    }

    // Arbitrary occupancy, e.g. for tests and synthetic shapes. Sites may
    // come in any order but must be distinct with positive counts.
    static Configuration from_entries(std::vector<Entry> entries) {
        std::sort(entries.begin(), entries.end(), entry_less);
        Configuration c;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].second < 1)
                throw std::invalid_argument("from_entries: counts must be >= 1");
            if (i > 0 && !(entries[i - 1].first < entries[i].first))
                throw std::invalid_argument("from_entries: duplicate site");
            c.total_ += entries[i].second;
            if (entries[i].second >= 2) c.active_.push_back(i);
        }
        if (entries.empty()) throw std::invalid_argument("from_entries: empty configuration");
        c.occ_ = std::move(entries);
        return c;
    }

    std::int64_t total() const noexcept { return total_; }

    // Sorted (site, count) pairs, every count >= 1.
    const std::vector<Entry>& occupancy() const noexcept { return occ_; }

    std::size_t occupied_sites() const noexcept { return occ_.size(); }
    std::size_t active_site_count() const noexcept { return active_.size(); }

    std::vector<Site> active_sites() const {
        std::vector<Site> out;
        out.reserve(active_.size());
        for (auto i : active_) out.push_back(occ_[i].first);
        return out;
    }

    std::int64_t count_at(const Site& s) const {
        auto it = std::lower_bound(occ_.begin(), occ_.end(), s,
                                   [](const Entry& e, const Site& v) { return e.first < v; });
        return (it != occ_.end() && it->first == s) ? it->second : 0;
    }

    // Settled <=> every site holds at most one particle.
    bool settled() const noexcept { return active_.empty(); }

    // Draw the move randomness for every active site, visiting sites in
    // ascending order so the result is a pure function of (state, stream).
    MoveDraw<Topo> sample_moves(StreamRng& rng, std::uint64_t step = 0,
                                std::uint64_t stream_id = 0) const {
        MoveDraw<Topo> d;
        d.step = step;
        d.stream_id = stream_id;
        d.entries.reserve(active_.size());
        for (auto i : active_) {
            const Entry& e = occ_[i];
            d.entries.push_back({e.first, e.second, Topo::sample(e.second, rng)});
        }
        return d;
    }

    // Advance by one synchronous step: every drawn site loses all its
    // particles to its neighbours; departures use the counts recorded in the
    // draw, arrivals are summed on top. Throws if the draw does not match
    // this configuration.
    void apply_moves(const MoveDraw<Topo>& d) {
        // Arrival streams, one per direction; each is sorted because the
        // drawn sites are.
        for (auto& s : streams_) s.clear();
        for (const auto& e : d.entries) {
            int dir = 0;
            Topo::scatter(e.site, e.count, e.draw, [&](const Site& s, std::int64_t k) {
                if (k > 0) streams_[dir].push_back({s, k});
                ++dir;
            });
        }
        arrivals_.clear();
        merge_streams();

        // One sweep over (old occupancy, draw, arrivals), all sorted.
        next_.clear();
        next_.reserve(occ_.size() + arrivals_.size());
        next_active_.clear();
        std::size_t oi = 0, di = 0, ai = 0;
        while (oi < occ_.size() || ai < arrivals_.size()) {
            Site s;
            if (ai >= arrivals_.size() || (oi < occ_.size() && occ_[oi].first < arrivals_[ai].first))
                s = occ_[oi].first;
            else
                s = arrivals_[ai].first;
            std::int64_t count = 0;
            if (oi < occ_.size() && occ_[oi].first == s) {
                if (di < d.entries.size() && d.entries[di].site == s) {
                    if (d.entries[di].count != occ_[oi].second || d.entries[di].count < 2)
                        throw std::logic_error("apply_moves: draw does not match configuration");
                    ++di; // all particles leave a drawn site
                } else {
                    count += occ_[oi].second;
                }
                ++oi;
            }
            while (ai < arrivals_.size() && arrivals_[ai].first == s) {
                count += arrivals_[ai].second;
                ++ai;
            }
            if (count > 0) {
                if (count >= 2) next_active_.push_back(next_.size());
                next_.push_back({s, count});
            }
        }
        if (di != d.entries.size())
            throw std::logic_error("apply_moves: draw does not match configuration");
        occ_.swap(next_);
        active_.swap(next_active_);
    }

    // One full step; returns the draw so instrumentation can reuse the
    // realized randomness.
    MoveDraw<Topo> step(StreamRng& rng, std::uint64_t t = 0) {
        MoveDraw<Topo> d = sample_moves(rng, t, t);
        apply_moves(d);
        return d;
    }

private:
    static constexpr int direction_count = Topo::id == Topology::line ? 2 : 4;

    void merge_streams() {
        if constexpr (direction_count == 2) {
            std::merge(streams_[0].begin(), streams_[0].end(), streams_[1].begin(),
                       streams_[1].end(), std::back_inserter(arrivals_), entry_less);
        } else {
            scratch_.clear();
            std::merge(streams_[0].begin(), streams_[0].end(), streams_[1].begin(),
                       streams_[1].end(), std::back_inserter(scratch_), entry_less);
            scratch2_.clear();
            std::merge(streams_[2].begin(), streams_[2].end(), streams_[3].begin(),
                       streams_[3].end(), std::back_inserter(scratch2_), entry_less);
            std::merge(scratch_.begin(), scratch_.end(), scratch2_.begin(), scratch2_.end(),
                       std::back_inserter(arrivals_), entry_less);
        }
    }

    static bool entry_less(const Entry& a, const Entry& b) { return a.first < b.first; }

    std::vector<Entry> occ_;
    std::vector<std::size_t> active_; // indices into occ_ with count >= 2
    std::int64_t total_ = 0;

    // scratch buffers reused across steps
    std::vector<Entry> next_, arrivals_, scratch_, scratch2_;
    std::vector<std::size_t> next_active_;
    std::array<std::vector<Entry>, direction_count> streams_;
};

using LineConfig = Configuration<LineTopology>;
using GridConfig = Configuration<GridTopology>;

// Functional variants of the core operations, mirroring the stateless view
// of the process (convenient in tests).
template <class Topo>
Configuration<Topo> init_point_mass(std::int64_t n) {
    return Configuration<Topo>::point_mass(n);
}

template <class Topo>
MoveDraw<Topo> sample_moves(const Configuration<Topo>& c, StreamRng& rng) {
    return c.sample_moves(rng);
}

template <class Topo>
Configuration<Topo> apply_moves(Configuration<Topo> c, const MoveDraw<Topo>& d) {
    c.apply_moves(d);
    return c;
}

template <class Topo>
bool is_settled(const Configuration<Topo>& c) noexcept {
    return c.settled();
}

// Width of the occupied interval: max occupied coordinate minus min.
inline std::int64_t span(const LineConfig& c) {
    if (c.occupancy().empty()) throw std::invalid_argument("span: empty configuration");
    return c.occupancy().back().first - c.occupancy().front().first;
}

// Distance from the origin to the closest occupied site (d_t).
inline std::int64_t closest_distance(const LineConfig& c) {
    const auto& occ = c.occupancy();
    if (occ.empty()) throw std::invalid_argument("closest_distance: empty configuration");
    auto it = std::lower_bound(occ.begin(), occ.end(), std::int64_t{0},
                               [](const auto& e, std::int64_t v) { return e.first < v; });
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    if (it != occ.end()) best = it->first;
    if (it != occ.begin()) best = std::min(best, -std::prev(it)->first);
    return best;
}

// Size of the closest stack (Lambda_t): the largest count among the occupied
// sites at distance exactly d_t. With both +d and -d occupied the larger
// stack governs the chance of the distance shrinking, so ties resolve to max.
inline std::int64_t closest_stack_size(const LineConfig& c) {
    const std::int64_t d = closest_distance(c);
    std::int64_t size = c.count_at(d);
    if (d != 0) size = std::max(size, c.count_at(-d));
    return size;
}

// Largest distance between neighbouring occupied sites; 0 for a single stack.
// Equals the largest ordered-particle gap without building the ordered view.
inline std::int64_t max_adjacent_gap(const LineConfig& c) {
    std::int64_t best = 0;
    const auto& occ = c.occupancy();
    for (std::size_t i = 0; i + 1 < occ.size(); ++i)
        best = std::max(best, occ[i + 1].first - occ[i].first);
    return best;
}

} // namespace dispersion
