#pragma once

// Partitions as strictly increasing index sets of a master grid, and the
// generators for partition sequences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/grid.hpp"
#include "pqv/paths.hpp"
#include "pqv/rng.hpp"

namespace pqv {

class Partition {
public:
    Partition(Grid grid, std::vector<std::size_t> indices)
        : grid_(grid), idx_(std::move(indices)) {
        validate_grid(grid_);
        if (idx_.size() < 2) throw ParameterError("a partition needs at least two points");
        for (std::size_t k = 1; k < idx_.size(); ++k)
            if (idx_[k] <= idx_[k - 1]) throw ParameterError("partition indices must be strictly increasing");
        if (idx_.back() > grid_.intervals()) throw ParameterError("partition index beyond the master grid");
        min_ = max_ = idx_[1] - idx_[0];
        for (std::size_t k = 1; k < idx_.size(); ++k) {
            const std::size_t len = idx_[k] - idx_[k - 1];
            min_ = std::min(min_, len);
            max_ = std::max(max_, len);
        }
    }

    const Grid& grid() const { return grid_; }
    std::span<const std::size_t> indices() const { return idx_; }
    std::size_t index(std::size_t k) const { return idx_[k]; }
    double time(std::size_t k) const { return grid_.time(idx_[k]); }
    std::vector<double> times() const {
        std::vector<double> t(idx_.size());
        for (std::size_t k = 0; k < idx_.size(); ++k) t[k] = time(k);
        return t;
    }

    /// Number of intervals N(pi).
    std::size_t intervals() const { return idx_.size() - 1; }
    std::size_t points() const { return idx_.size(); }
    std::size_t first() const { return idx_.front(); }
    std::size_t last() const { return idx_.back(); }
    bool is_full() const { return first() == 0 && last() == grid_.intervals(); }

    std::size_t max_steps() const { return max_; }
    std::size_t min_steps() const { return min_; }
    /// Largest interval length |pi|.
    double mesh() const { return static_cast<double>(max_) * grid_.step(); }
    /// Smallest interval length.
    double min_step() const { return static_cast<double>(min_) * grid_.step(); }
    double ratio() const { return static_cast<double>(max_) / static_cast<double>(min_); }
    double length() const { return static_cast<double>(last() - first()) * grid_.step(); }

    bool contains(std::size_t j) const { return std::binary_search(idx_.begin(), idx_.end(), j); }

    /// Position k of the interval [t_k, t_{k+1}) containing grid index j
    /// (clamped to the last interval for j >= last()).
    std::size_t interval_of(std::size_t j) const {
        if (j <= idx_.front()) return 0;
        auto it = std::upper_bound(idx_.begin(), idx_.end(), j);
        std::size_t k = static_cast<std::size_t>(it - idx_.begin()) - 1;
        return std::min(k, intervals() - 1);
    }

    bool operator==(const Partition& o) const { return grid_ == o.grid_ && idx_ == o.idx_; }

private:
    Grid grid_;
    std::vector<std::size_t> idx_;
    std::size_t min_ = 0, max_ = 0;
};

struct PartitionLevel {
    int n = 0;
    Partition partition;
};

/// Partitions indexed by level n; not required to be refining.
class PartitionSequence {
public:
    PartitionSequence() = default;
    PartitionSequence(std::vector<PartitionLevel> levels, std::string generator,
                      std::map<std::string, double> params = {})
        : levels_(std::move(levels)), generator_(std::move(generator)), params_(std::move(params)) {
        for (std::size_t i = 1; i < levels_.size(); ++i) {
            if (levels_[i].n <= levels_[i - 1].n) throw ParameterError("sequence levels must be strictly increasing");
            if (!(levels_[i].partition.grid() == levels_[0].partition.grid()))
                throw ParameterError("all levels of a sequence share one master grid");
        }
    }

    std::size_t size() const { return levels_.size(); }
    bool empty() const { return levels_.empty(); }
    const std::vector<PartitionLevel>& levels() const { return levels_; }
    const PartitionLevel& operator[](std::size_t i) const { return levels_[i]; }
    const PartitionLevel& front() const { return levels_.front(); }
    const PartitionLevel& back() const { return levels_.back(); }
    const std::string& generator() const { return generator_; }
    const std::map<std::string, double>& params() const { return params_; }
    const Grid& grid() const {
        if (levels_.empty()) throw ParameterError("empty partition sequence");
        return levels_.front().partition.grid();
    }

    const Partition* find(int n) const {
        for (const auto& l : levels_)
            if (l.n == n) return &l.partition;
        return nullptr;
    }
    const Partition& at(int n) const {
        if (const auto* p = find(n)) return *p;
        throw ParameterError("sequence has no level " + std::to_string(n));
    }

private:
    std::vector<PartitionLevel> levels_;
    std::string generator_;
    std::map<std::string, double> params_;
};

/// Worst-case growth of the max/min interval ratio caused by snapping points
/// to the master grid when the shortest exact interval spans `min_steps` steps.
inline double snapping_bound(double min_steps) {
    if (min_steps <= 1.0) return std::numeric_limits<double>::infinity();
    return 2.0 / (min_steps - 1.0);
}

namespace detail {

inline std::uint64_t ipow(std::uint64_t base, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) {
        if (r > (std::uint64_t{1} << 62) / base) throw ResolutionError("k^n overflows");
        r *= base;
    }
    return r;
}

inline Grid sequence_grid(int level, double horizon) {
    Grid g{level, horizon, 0.0};
    validate_grid(g);
    return g;
}

inline void require_levels(int lo, int hi) {
    if (lo < 0 || hi < lo) throw ParameterError("level range must satisfy 0 <= lo <= hi");
}

}  // namespace detail

/// Single dyadic level n on the grid (exact, requires n <= M).
inline Partition dyadic_partition(int n, const Grid& grid) {
    if (n < 0) throw ParameterError("dyadic level must be >= 0");
    if (n > grid.level)
        throw ResolutionError("dyadic level " + std::to_string(n) + " exceeds master level " +
                              std::to_string(grid.level) + "; raise M");
    const std::size_t stride = std::size_t{1} << (grid.level - n);
    std::vector<std::size_t> idx((std::size_t{1} << n) + 1);
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j * stride;
    return Partition(grid, std::move(idx));
}

/// k-adic partitions t_j = jT/k^n for n in [lo, hi]. For k != 2 points are
/// snapped to the nearest master index (ties low) and 2^M >= 4 k^hi is required.
inline PartitionSequence gen_kadic(int k, int lo, int hi, int level, double horizon) {
    if (k < 2) throw ParameterError("k-adic partitions need k >= 2");
    detail::require_levels(lo, hi);
    const Grid grid = detail::sequence_grid(level, horizon);
    std::vector<PartitionLevel> out;
    if (k == 2) {
        for (int n = lo; n <= hi; ++n) out.push_back({n, dyadic_partition(n, grid)});
        return PartitionSequence(std::move(out), "kadic", {{"k", 2.0}});
    }
    const std::uint64_t cells = grid.intervals();
    if (cells < 4 * detail::ipow(static_cast<std::uint64_t>(k), hi))
        throw ResolutionError("k-adic level " + std::to_string(hi) + " needs 2^M >= 4 k^n; raise M");
    for (int n = lo; n <= hi; ++n) {
        const std::uint64_t kn = detail::ipow(static_cast<std::uint64_t>(k), n);
        std::vector<std::size_t> idx(kn + 1);
        for (std::uint64_t j = 0; j <= kn; ++j) {
            const std::uint64_t q = j * cells;
            std::uint64_t s = q / kn;
            if (2 * (q % kn) > kn) ++s;
            idx[j] = s;
            if (j > 0 && idx[j] <= idx[j - 1])
                throw ResolutionError("k-adic snapping collision at level " + std::to_string(n) + "; raise M");
        }
        out.push_back({n, Partition(grid, std::move(idx))});
    }
    return PartitionSequence(std::move(out), "kadic", {{"k", static_cast<double>(k)}});
}

inline PartitionSequence gen_dyadic(int lo, int hi, int level, double horizon) {
    return gen_kadic(2, lo, hi, level, horizon);
}

struct LebesguePartition {
    Partition partition;
    /// True when fewer than two hitting times were found.
    bool degenerate = false;
};

/// Successive hitting times of the spatial grid of width 2^-n by a scalar path;
/// the last point is forced to T.
inline LebesguePartition gen_lebesgue(const SampledPath& x, int n) {
    if (x.dim() != 1) throw ParameterError("Lebesgue partition needs a scalar path");
    if (n < 0) throw ParameterError("Lebesgue level must be >= 0");
    const double width = std::ldexp(1.0, -n);
    double osc = 0.0;
    for (std::size_t j = 1; j < x.points(); ++j) osc = std::max(osc, std::abs(x.value(j) - x.value(j - 1)));
    if (!(width > 2.0 * osc))
        throw ParameterError("Lebesgue level " + std::to_string(n) +
                             " too fine: 2^-n must exceed twice the one-step oscillation");
    std::vector<std::size_t> idx{0};
    std::size_t anchor = 0;
    for (std::size_t j = 1; j < x.points(); ++j) {
        if (std::abs(x.value(j) - x.value(anchor)) >= width) {
            idx.push_back(j);
            anchor = j;
        }
    }
    const std::size_t hits = idx.size() - 1;
    const std::size_t end = x.grid().intervals();
    if (idx.back() != end) idx.push_back(end);
    if (hits < 2) return {Partition(x.grid(), {0, end}), true};
    return {Partition(x.grid(), std::move(idx)), false};
}

/// Random balanced partitions with N_n = 2^n intervals: lengths proportional
/// to U[1, c_target] draws, normalised to T, then snapped to the master grid.
inline PartitionSequence gen_random_balanced(std::uint64_t seed, int lo, int hi, int level,
                                             double horizon, double c_target) {
    if (!(c_target >= 1.0) || !std::isfinite(c_target)) throw ParameterError("c_target must be >= 1");
    detail::require_levels(lo, hi);
    const Grid grid = detail::sequence_grid(level, horizon);
    if (hi > level - 2)
        throw ResolutionError("random balanced level " + std::to_string(hi) +
                              " needs N_n <= 2^(M-2); raise M");
    const double cells = static_cast<double>(grid.intervals());
    std::vector<PartitionLevel> out;
    for (int n = lo; n <= hi; ++n) {
        Rng rng(derive_seed(seed, "random_balanced/" + std::to_string(n)));
        const std::size_t count = std::size_t{1} << n;
        std::vector<double> w(count);
        double total = 0.0;
        for (auto& v : w) {
            v = c_target == 1.0 ? 1.0 : rng.uniform(1.0, c_target);
            total += v;
        }
        std::vector<std::size_t> idx(count + 1);
        idx[0] = 0;
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            acc += w[i];
            const double pos = (i + 1 == count) ? cells : acc / total * cells;
            std::size_t s = static_cast<std::size_t>(std::floor(pos));
            if (pos - std::floor(pos) > 0.5) ++s;
            idx[i + 1] = std::min<std::size_t>(s, grid.intervals());
            if (idx[i + 1] <= idx[i])
                throw ResolutionError("random balanced snapping collision at level " + std::to_string(n) +
                                      "; raise M");
        }
        out.push_back({n, Partition(grid, std::move(idx))});
    }
    return PartitionSequence(std::move(out), "random_balanced",
                             {{"c_target", c_target}, {"seed", static_cast<double>(seed)}});
}

/// pi ∩ [a, b] with a and b adjoined (master indices).
inline Partition stop_partition(const Partition& p, std::size_t a, std::size_t b) {
    if (!(a < b)) throw ParameterError("stopping interval needs a < b");
    if (a < p.first() || b > p.last()) throw ParameterError("stopping interval outside the partition span");
    std::vector<std::size_t> idx{a};
    for (std::size_t j : p.indices())
        if (j > a && j < b) idx.push_back(j);
    idx.push_back(b);
    return Partition(p.grid(), std::move(idx));
}

/// Stopped sequence on [a, b]; a and b are snapped to the master grid.
inline PartitionSequence stop_partition(const PartitionSequence& seq, double a, double b) {
    const Grid& g = seq.grid();
    const std::size_t ia = g.snap(a), ib = g.snap(b);
    std::vector<PartitionLevel> out;
    for (const auto& l : seq.levels()) out.push_back({l.n, stop_partition(l.partition, ia, ib)});
    auto params = seq.params();
    params["stop_a"] = g.time(ia);
    params["stop_b"] = g.time(ib);
    return PartitionSequence(std::move(out), seq.generator() + "+stopped", std::move(params));
}

struct MappedLevel {
    int n = 0;
    double input_ratio = 1.0;
    double exact_ratio = 1.0;    ///< ratio of the image before snapping
    double snapped_ratio = 1.0;  ///< ratio after snapping to the image grid
    double bound = 1.0;          ///< (max slope / min slope) * input ratio
    bool within_bound = true;    ///< exact_ratio <= bound
};

struct MappedSequence {
    PartitionSequence sequence;
    std::vector<MappedLevel> levels;
    double max_slope = 0.0;
    double min_slope = 0.0;
};

/// Image of each level under a strictly increasing g sampled on the master
/// grid; points are re-snapped to a fresh grid of level `out_level` on
/// [g(0), g(T)].
inline MappedSequence map_partition(const PartitionSequence& seq, std::span<const double> g,
                                    int out_level = -1) {
    const Grid& in = seq.grid();
    if (in.origin != 0.0 || !seq.front().partition.is_full())
        throw ParameterError("map_partition expects full partitions of [0, T]");
    if (g.size() != in.points()) throw ParameterError("g must be sampled on every master-grid point");
    if (out_level < 0) out_level = in.level;
    MappedSequence res;
    res.min_slope = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < g.size(); ++j) {
        const double s = (g[j] - g[j - 1]) / in.step();
        if (!(s > 0.0)) throw ParameterError("g must be strictly increasing");
        res.min_slope = std::min(res.min_slope, s);
        res.max_slope = std::max(res.max_slope, s);
    }
    const Grid out{out_level, g.back() - g.front(), g.front()};
    validate_grid(out);
    std::vector<PartitionLevel> levels;
    for (const auto& l : seq.levels()) {
        const auto& p = l.partition;
        std::vector<std::size_t> idx(p.points());
        double emax = 0.0, emin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < p.points(); ++k) {
            idx[k] = (k + 1 == p.points()) ? out.intervals() : out.snap(g[p.index(k)]);
            if (k > 0) {
                const double len = g[p.index(k)] - g[p.index(k - 1)];
                emax = std::max(emax, len);
                emin = std::min(emin, len);
                if (idx[k] <= idx[k - 1])
                    throw ResolutionError("map_partition snapping collision; raise the output level");
            }
        }
        Partition image(out, std::move(idx));
        MappedLevel ml;
        ml.n = l.n;
        ml.input_ratio = p.ratio();
        ml.exact_ratio = emax / emin;
        ml.snapped_ratio = image.ratio();
        ml.bound = res.max_slope / res.min_slope * ml.input_ratio;
        ml.within_bound = ml.exact_ratio <= ml.bound * (1.0 + 1e-12);
        res.levels.push_back(ml);
        levels.push_back({l.n, std::move(image)});
    }
    res.sequence = PartitionSequence(std::move(levels), seq.generator() + "+mapped", seq.params());
    return res;
}

}  // namespace pqv
