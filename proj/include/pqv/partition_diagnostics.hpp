#pragma once

// Finite-level diagnostics for partition sequences: balance, comparability
// and the mesh-adjusting index maps. Every verdict is a proxy computed over
// the tested levels only.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/partitions.hpp"

namespace pqv {

struct BalanceLevel {
    int n = 0;
    std::size_t intervals = 0;
    double mesh = 0.0;
    double min_step = 0.0;
    double ratio = 1.0;
    /// N * min_step <= T <= N * mesh, checked in integer master steps.
    bool sandwich = true;
    double count_times_min = 0.0;
    double count_times_mesh = 0.0;
    /// sup_t / inf_t of the number of points in [t, t+h); empty when mesh > h.
    std::optional<double> window_ratio;
    std::size_t window_min = 0;
    std::size_t window_max = 0;
};

struct BalanceReport {
    std::vector<BalanceLevel> levels;
    double h = 0.0;
    double threshold = 0.0;
    double c_hat = 1.0;
    bool balanced = true;        ///< c_hat <= threshold at the tested levels
    bool sandwich_holds = true;  ///< at every level
    double min_count_times_min = 0.0;
    double max_count_times_mesh = 0.0;
    double max_window_ratio = 1.0;
    /// Largest level-to-level growth of N, |pi| and min step.
    double max_count_growth = 1.0;
    double max_mesh_growth = 1.0;
    double max_min_step_growth = 1.0;
};

namespace detail {

/// Number of partition points in [a, b) for master indices a < b.
inline std::size_t points_in(const Partition& p, std::size_t a, std::size_t b) {
    auto idx = p.indices();
    auto lo = std::lower_bound(idx.begin(), idx.end(), a);
    auto hi = std::lower_bound(idx.begin(), idx.end(), b);
    return static_cast<std::size_t>(hi - lo);
}

}  // namespace detail

/// Window counts use half-open windows [t, t+h) with t ranging over every
/// master-grid point in [0, T-h].
inline BalanceReport balance_report(const PartitionSequence& seq, double h, double threshold = 4.0) {
    if (seq.size() < 2) throw ParameterError("balance_report needs at least two levels");
    const Grid& g = seq.grid();
    if (!(h > 0.0)) throw ParameterError("window width h must be positive");
    if (h > g.horizon) throw ParameterError("window width h exceeds the horizon");
    if (!(threshold >= 1.0)) throw ParameterError("balance threshold must be >= 1");
    BalanceReport r;
    r.h = h;
    r.threshold = threshold;
    r.min_count_times_min = std::numeric_limits<double>::infinity();
    const std::size_t width = g.snap(g.origin + h);
    for (const auto& l : seq.levels()) {
        const Partition& p = l.partition;
        BalanceLevel b;
        b.n = l.n;
        b.intervals = p.intervals();
        b.mesh = p.mesh();
        b.min_step = p.min_step();
        b.ratio = p.ratio();
        const std::size_t span = p.last() - p.first();
        b.sandwich = b.intervals * p.min_steps() <= span && span <= b.intervals * p.max_steps();
        b.count_times_min = static_cast<double>(b.intervals) * b.min_step;
        b.count_times_mesh = static_cast<double>(b.intervals) * b.mesh;
        if (p.max_steps() <= width && width <= span) {
            std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
            for (std::size_t t = p.first(); t + width <= p.last(); ++t) {
                const std::size_t c = detail::points_in(p, t, t + width);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            b.window_min = lo;
            b.window_max = hi;
            b.window_ratio = static_cast<double>(hi) / static_cast<double>(lo);
            r.max_window_ratio = std::max(r.max_window_ratio, *b.window_ratio);
        }
        r.c_hat = std::max(r.c_hat, b.ratio);
        r.sandwich_holds = r.sandwich_holds && b.sandwich;
        r.min_count_times_min = std::min(r.min_count_times_min, b.count_times_min);
        r.max_count_times_mesh = std::max(r.max_count_times_mesh, b.count_times_mesh);
        r.levels.push_back(b);
    }
    for (std::size_t i = 1; i < r.levels.size(); ++i) {
        const auto& a = r.levels[i - 1];
        const auto& b = r.levels[i];
        r.max_count_growth = std::max(r.max_count_growth, double(b.intervals) / double(a.intervals));
        r.max_mesh_growth = std::max(r.max_mesh_growth, a.mesh / b.mesh);
        r.max_min_step_growth = std::max(r.max_min_step_growth, a.min_step / b.min_step);
    }
    r.balanced = r.c_hat <= threshold;
    return r;
}

struct ComparabilityLevel {
    int n = 0;
    double mesh_ratio = 1.0;   ///< |sigma^n| / |tau^n|
    double count_ratio = 1.0;  ///< N(sigma^n) / N(tau^n)
};

struct ComparabilityReport {
    std::vector<ComparabilityLevel> levels;
    double bound = 4.0;
    double mesh_liminf = 1.0, mesh_limsup = 1.0;
    double count_liminf = 1.0, count_limsup = 1.0;
    bool mesh_comparable = true;   ///< mesh ratios within [1/bound, bound]
    bool count_comparable = true;  ///< count ratios within [1/bound, bound]
    bool comparable = true;        ///< both of the above
    bool verdicts_agree = true;
};

/// Compares the levels present in both sequences.
inline ComparabilityReport comparability(const PartitionSequence& tau, const PartitionSequence& sigma,
                                         double bound = 4.0) {
    if (tau.empty() || sigma.empty()) throw ParameterError("comparability needs non-empty sequences");
    if (tau.grid().horizon != sigma.grid().horizon) throw ParameterError("comparability: horizons differ");
    require_same_grid(tau.grid(), sigma.grid(), "comparability");
    if (!(bound >= 1.0)) throw ParameterError("comparability bound must be >= 1");
    ComparabilityReport r;
    r.bound = bound;
    r.mesh_liminf = r.count_liminf = std::numeric_limits<double>::infinity();
    r.mesh_limsup = r.count_limsup = 0.0;
    for (const auto& l : sigma.levels()) {
        const Partition* t = tau.find(l.n);
        if (!t) continue;
        ComparabilityLevel c;
        c.n = l.n;
        c.mesh_ratio = l.partition.mesh() / t->mesh();
        c.count_ratio = double(l.partition.intervals()) / double(t->intervals());
        r.mesh_liminf = std::min(r.mesh_liminf, c.mesh_ratio);
        r.mesh_limsup = std::max(r.mesh_limsup, c.mesh_ratio);
        r.count_liminf = std::min(r.count_liminf, c.count_ratio);
        r.count_limsup = std::max(r.count_limsup, c.count_ratio);
        r.levels.push_back(c);
    }
    if (r.levels.empty()) throw PairingError("comparability: the sequences share no level");
    r.mesh_comparable = r.mesh_liminf >= 1.0 / bound && r.mesh_limsup <= bound;
    r.count_comparable = r.count_liminf >= 1.0 / bound && r.count_limsup <= bound;
    r.comparable = r.mesh_comparable && r.count_comparable;
    r.verdicts_agree = r.mesh_comparable == r.count_comparable;
    return r;
}

enum class AdjustMode { i, ii, iii };

struct IndexMapEntry {
    int n = 0;
    int mapped = 0;
    /// Modes i/ii: |sigma^n| / |tau^{k(n)}|. Mode iii: |sigma^{r(n)}| / |tau^n|.
    double ratio = 1.0;
    /// Modes i/ii with k(n) > n: |tau^k| <= |sigma^n| < |tau^{k-1}|.
    /// Mode iii: |sigma^r| > |tau^n| and no larger r <= n qualifies.
    bool sandwich = true;
    bool inf_branch = true;
};

struct IndexMap {
    AdjustMode mode = AdjustMode::i;
    std::vector<IndexMapEntry> entries;
    /// max over shared levels of |sigma^n| / |tau^n|; the index adjustment needs this < 1.
    double precondition_ratio = 0.0;
    bool precondition_holds = false;
    /// Mode ii: whether |tau^n| / |sigma^n| stayed below the bound (k(n) = n branch).
    bool ratio_bounded = false;
    /// Largest ratio along the produced map.
    double max_ratio = 0.0;
    bool sandwich_holds = true;

    int at(int n) const {
        for (const auto& e : entries)
            if (e.n == n) return e.mapped;
        throw ParameterError("index map has no entry for level " + std::to_string(n));
    }
};

namespace detail {

inline int first_level_at_most(const PartitionSequence& tau, int from, double target) {
    for (const auto& l : tau.levels())
        if (l.n >= from && l.partition.mesh() <= target) return l.n;
    return -1;
}

}  // namespace detail

inline IndexMap adjust_subsequence(const PartitionSequence& tau, const PartitionSequence& sigma,
                                   AdjustMode mode, double bound = 4.0) {
    if (tau.empty() || sigma.empty()) throw ParameterError("adjust_subsequence needs non-empty sequences");
    if (tau.grid().horizon != sigma.grid().horizon) throw ParameterError("adjust_subsequence: horizons differ");
    IndexMap m;
    m.mode = mode;
    for (const auto& l : sigma.levels())
        if (const Partition* t = tau.find(l.n))
            m.precondition_ratio = std::max(m.precondition_ratio, l.partition.mesh() / t->mesh());
    m.precondition_holds = m.precondition_ratio < 1.0;

    if (mode == AdjustMode::iii) {
        for (const auto& l : tau.levels()) {
            const int n = l.n;
            const double tmesh = l.partition.mesh();
            const Partition* s = sigma.find(n);
            IndexMapEntry e;
            e.n = n;
            if (s && s->mesh() >= tmesh) {
                e.mapped = n;
                e.inf_branch = false;
                e.ratio = s->mesh() / tmesh;
            } else {
                int best = -1;
                for (const auto& sl : sigma.levels())
                    if (sl.n <= n && sl.partition.mesh() > tmesh) best = sl.n;
                if (best < 0)
                    throw ExhaustionError("adjust_subsequence: no sigma level r <= " + std::to_string(n) +
                                          " has mesh above |tau^" + std::to_string(n) + "|");
                e.mapped = best;
                e.ratio = sigma.at(best).mesh() / tmesh;
                for (const auto& sl : sigma.levels())
                    if (sl.n > best && sl.n <= n && sl.partition.mesh() > tmesh) e.sandwich = false;
            }
            m.max_ratio = std::max(m.max_ratio, e.ratio);
            m.sandwich_holds = m.sandwich_holds && e.sandwich;
            m.entries.push_back(e);
        }
        return m;
    }

    bool use_identity = false;
    if (mode == AdjustMode::ii) {
        double worst = 0.0;
        bool all_shared = true;
        for (const auto& l : sigma.levels()) {
            const Partition* t = tau.find(l.n);
            if (!t) {
                all_shared = false;
                break;
            }
            worst = std::max(worst, t->mesh() / l.partition.mesh());
        }
        m.ratio_bounded = all_shared && worst <= bound;
        use_identity = m.ratio_bounded;
    }
    for (const auto& l : sigma.levels()) {
        const int n = l.n;
        const double smesh = l.partition.mesh();
        IndexMapEntry e;
        e.n = n;
        if (use_identity) {
            e.mapped = n;
            e.inf_branch = false;
        } else {
            const int k = detail::first_level_at_most(tau, n, smesh);
            if (k < 0)
                throw ExhaustionError("adjust_subsequence: tau levels exhausted before |tau^k| <= |sigma^" +
                                      std::to_string(n) + "|; extend tau beyond level " +
                                      std::to_string(tau.back().n));
            e.mapped = k;
            const double tk = tau.at(k).mesh();
            e.sandwich = tk <= smesh;
            if (k > n) {
                const Partition* prev = tau.find(k - 1);
                e.sandwich = e.sandwich && prev && smesh < prev->mesh();
            }
        }
        e.ratio = smesh / tau.at(e.mapped).mesh();
        m.max_ratio = std::max(m.max_ratio, e.ratio);
        m.sandwich_holds = m.sandwich_holds && e.sandwich;
        m.entries.push_back(e);
    }
    return m;
}

}  // namespace pqv
