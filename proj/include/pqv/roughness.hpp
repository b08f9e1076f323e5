#pragma once

// Quadratic roughness: cross-products of fine dyadic increments grouped in
// the cells of a coarser partition, the dyadic coarsening selection, the
// averaging sums and an empirical tail report for Monte Carlo batches.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/partitions.hpp"
#include "pqv/paths.hpp"
#include "pqv/quadvar.hpp"
#include "pqv/stats.hpp"

namespace pqv {

struct CoarseningSelection {
    double beta = 0.5;
    std::vector<int> n;
    std::vector<int> l;
    std::vector<double> coarse_mesh;
    /// |T^{l_n}|^beta / |pi^n|
    std::vector<double> ratio;
    /// |T^{l_n}| <= |pi^n|^{1/beta} < |T^{l_n - 1}|, recorded where l_n > n.
    std::vector<bool> sandwich;
    std::vector<bool> inf_branch;
    /// l_n = n at every level because |T^n|^beta / |pi^n| stayed below the bound.
    bool first_branch = false;
    bool sandwich_holds = true;
    int deepest = 0;

    int at(int level) const {
        for (std::size_t i = 0; i < n.size(); ++i)
            if (n[i] == level) return l[i];
        throw ParameterError("selection has no level " + std::to_string(level));
    }
};

namespace detail {

constexpr double log_tol = 1e-12;

/// Smallest integer l >= n with log2|pi| >= beta * (log2 T - l).
inline int dyadic_level_for(double mesh, double beta, double horizon, int n) {
    const double need = std::log2(horizon) - std::log2(mesh) / beta;
    const double c = std::ceil(need - log_tol * std::max(1.0, std::abs(need)));
    return std::max(n, static_cast<int>(c));
}

}  // namespace detail

/// l_n = inf{ l >= n : |pi^n| >= |T^l|^beta } against dyadic levels up to
/// `max_dyadic_level` of [0, horizon]. When |T^n|^beta / |pi^n| never exceeds
/// `first_branch_bound` and does not grow across the tested levels, l_n = n.
inline CoarseningSelection select_dyadic_subsequence(const PartitionSequence& seq, double beta,
                                                     int max_dyadic_level, double horizon,
                                                     double first_branch_bound = 1.0) {
    if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("coarsening index beta must lie in (0, 1)");
    if (seq.empty()) throw ParameterError("empty partition sequence");
    CoarseningSelection s;
    s.beta = beta;
    std::vector<double> first_ratio;
    for (const auto& lv : seq.levels())
        first_ratio.push_back(std::pow(std::ldexp(horizon, -lv.n), beta) / lv.partition.mesh());
    bool bounded = true;
    for (std::size_t i = 0; i < first_ratio.size(); ++i) {
        bounded = bounded && first_ratio[i] <= first_branch_bound * (1.0 + 1e-12);
        if (i) bounded = bounded && first_ratio[i] <= first_ratio[i - 1] * (1.0 + 1e-12);
    }
    s.first_branch = bounded;
    for (const auto& lv : seq.levels()) {
        const double mesh = lv.partition.mesh();
        const int l = s.first_branch ? lv.n : detail::dyadic_level_for(mesh, beta, horizon, lv.n);
        if (l > max_dyadic_level)
            throw ExhaustionError("dyadic levels exhausted: level " + std::to_string(lv.n) +
                                  " needs dyadic depth " + std::to_string(l) + " but only " +
                                  std::to_string(max_dyadic_level) + " is available");
        s.n.push_back(lv.n);
        s.l.push_back(l);
        s.coarse_mesh.push_back(mesh);
        s.ratio.push_back(std::pow(std::ldexp(horizon, -l), beta) / mesh);
        s.inf_branch.push_back(!s.first_branch);
        bool ok = true;
        if (!s.first_branch && l > lv.n) {
            // log2 form: log2|T^l| <= log2|pi| / beta < log2|T^{l-1}|
            const double target = std::log2(mesh) / beta;
            const double lo = std::log2(horizon) - l, hi = lo + 1.0;
            const double tol = detail::log_tol * std::max(1.0, std::abs(target));
            ok = lo <= target + tol && target < hi + tol;
        } else if (!s.first_branch) {
            ok = std::pow(std::ldexp(horizon, -l), beta) <= mesh * (1.0 + 1e-12);
        }
        s.sandwich.push_back(ok);
        s.sandwich_holds = s.sandwich_holds && ok;
        s.deepest = std::max(s.deepest, l);
    }
    return s;
}

/// Same selection against an explicit dyadic sequence; the selected levels
/// must be present in it.
inline CoarseningSelection select_dyadic_subsequence(const PartitionSequence& seq, double beta,
                                                     const PartitionSequence& dyadic,
                                                     double first_branch_bound = 1.0) {
    if (dyadic.empty()) throw ParameterError("empty dyadic sequence");
    const double horizon = dyadic.grid().horizon;
    auto s = select_dyadic_subsequence(seq, beta, dyadic.back().n, horizon, first_branch_bound);
    for (int l : s.l)
        if (!dyadic.find(l))
            throw ExhaustionError("dyadic sequence lacks required level " + std::to_string(l));
    return s;
}

struct GroupingIndex {
    /// p[k]: first fine position m with s_m in (t_k, t_{k+1}], k = 0..N-1.
    std::vector<std::size_t> p;
    /// Number of fine points in each (t_k, t_{k+1}].
    std::vector<std::size_t> cell_sizes;
    std::size_t max_cell = 0;
    std::size_t min_cell = 0;
    bool sandwich = true;
};

inline void require_nested_span(const Partition& coarse, const Partition& fine) {
    require_same_grid(coarse.grid(), fine.grid(), "coarse and fine partitions");
    if (coarse.first() != fine.first() || coarse.last() != fine.last())
        throw ParameterError("coarse and fine partitions must span the same interval");
}

inline GroupingIndex grouping(const Partition& coarse, const Partition& fine) {
    require_nested_span(coarse, fine);
    GroupingIndex g;
    const auto s = fine.indices();
    g.min_cell = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < coarse.intervals(); ++k) {
        const std::size_t tk = coarse.index(k), tk1 = coarse.index(k + 1);
        const auto first = std::upper_bound(s.begin(), s.end(), tk);
        const auto past = std::upper_bound(s.begin(), s.end(), tk1);
        if (first == s.end() || *first > tk1)
            throw GroupingError("coarse cell " + std::to_string(k) + " contains no fine point");
        const std::size_t m = static_cast<std::size_t>(first - s.begin());
        g.p.push_back(m);
        const std::size_t size = static_cast<std::size_t>(past - first);
        g.cell_sizes.push_back(size);
        g.max_cell = std::max(g.max_cell, size);
        g.min_cell = std::min(g.min_cell, size);
        g.sandwich = g.sandwich && m >= 1 && s[m - 1] <= tk && tk < s[m];
    }
    return g;
}

struct RoughnessStat {
    int level = 0;
    int fine_level = 0;
    std::size_t t_index = 0;
    /// Sum over cells of the off-diagonal cross-products of fine increments;
    /// cells hold the fine intervals whose left endpoint lies in [t_k, t_{k+1}).
    double S = 0.0;
    /// Same sum with cells given by left endpoints in (t_k, t_{k+1}].
    double S_strict = 0.0;
    double boundary = 0.0;  ///< S - S_strict
    double grouped_qv = 0.0;
    double fine_qv = 0.0;
    /// |S - (grouped_qv - fine_qv)|
    double identity_gap = 0.0;
    /// Sum over cells of (cell length^2 - sum of squared fine steps); a
    /// Brownian path has Var(S) = 2 * lambda2.
    double lambda2 = 0.0;
    std::size_t cells = 0;
    std::size_t max_cell = 0;
    std::size_t min_cell = 0;
    double coarse_mesh = 0.0;
    double fine_mesh = 0.0;
};

/// Roughness statistic at master index `t` (fine increments truncated at t).
inline RoughnessStat roughness_statistic(const SampledPath& x, const Partition& coarse, const Partition& fine,
                                         std::size_t t) {
    detail::require_path_grid(x, coarse);
    require_nested_span(coarse, fine);
    const GroupingIndex gi = grouping(coarse, fine);
    const std::size_t d = x.dim();
    const double step = x.grid().step();
    RoughnessStat r;
    r.t_index = t;
    r.cells = coarse.intervals();
    r.max_cell = gi.max_cell;
    r.min_cell = gi.min_cell;
    r.coarse_mesh = coarse.mesh();
    r.fine_mesh = fine.mesh();

    std::vector<double> sum(d, 0.0), sum_strict(d, 0.0);
    double sq = 0.0, sq_strict = 0.0, len = 0.0, len_sq = 0.0;
    auto flush = [&](std::vector<double>& v, double& s2, double& out) {
        double n2 = 0.0;
        for (double c : v) n2 += c * c;
        out += n2 - s2;
        std::fill(v.begin(), v.end(), 0.0);
        s2 = 0.0;
    };
    std::size_t cell = 0, cell_strict = 0;
    bool strict_open = false;
    const auto s = fine.indices();
    for (std::size_t m = 0; m + 1 < s.size() && s[m] < t; ++m) {
        const std::size_t a = s[m], b = std::min(s[m + 1], t);
        while (cell + 1 < coarse.intervals() && a >= coarse.index(cell + 1)) {
            flush(sum, sq, r.S);
            r.lambda2 += len * len - len_sq;
            len = len_sq = 0.0;
            ++cell;
        }
        double inc2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double delta = x.value(b, c) - x.value(a, c);
            sum[c] += delta;
            inc2 += delta * delta;
        }
        sq += inc2;
        r.fine_qv += inc2;
        const double dt = static_cast<double>(b - a) * step;
        len += dt;
        len_sq += dt * dt;

        if (a > coarse.first()) {
            std::size_t k = cell_strict;
            while (k + 1 < coarse.intervals() && a > coarse.index(k + 1)) ++k;
            if (strict_open && k != cell_strict) flush(sum_strict, sq_strict, r.S_strict);
            cell_strict = k;
            strict_open = true;
            for (std::size_t c = 0; c < d; ++c) sum_strict[c] += x.value(b, c) - x.value(a, c);
            sq_strict += inc2;
        }
    }
    flush(sum, sq, r.S);
    r.lambda2 += len * len - len_sq;
    if (strict_open) flush(sum_strict, sq_strict, r.S_strict);
    r.boundary = r.S - r.S_strict;

    // Grouped increments between anchors a[k] = first fine point >= t_k.
    std::vector<std::size_t> anchor;
    for (std::size_t k = 0; k < coarse.intervals(); ++k)
        anchor.push_back(*std::lower_bound(s.begin(), s.end(), coarse.index(k)));
    anchor.push_back(fine.last());
    for (std::size_t k = 0; k + 1 < anchor.size(); ++k) {
        const std::size_t a = std::min(anchor[k], t), b = std::min(anchor[k + 1], t);
        r.grouped_qv += x.sq_increment(a, b);
    }
    r.identity_gap = std::abs(r.S - (r.grouped_qv - r.fine_qv));
    return r;
}

inline RoughnessStat roughness_statistic(const SampledPath& x, const Partition& coarse, const Partition& fine) {
    return roughness_statistic(x, coarse, fine, coarse.last());
}

struct AveragingLevel {
    int n = 0;
    int fine_level = 0;
    double sum = 0.0;
    double coarse_mesh = 0.0;
    double fine_mesh = 0.0;
    /// N(sigma^n) * |sigma^{l_n}|^{2 alpha}
    double remainder_bound = 0.0;
};

struct AveragingReport {
    double kappa = 0.0;
    double alpha = 0.0;
    /// kappa <= 1 / (2 alpha): the averaging condition fails.
    bool kappa_warning = false;
    std::vector<AveragingLevel> levels;
};

/// For each coarse level n, the smallest available level l >= n of the same
/// sequence with |sigma^l| <= |sigma^n|^kappa, and the grouped cross-product
/// sum of its increments over the cells of sigma^n.
inline AveragingReport averaging_statistic(const SampledPath& x, const PartitionSequence& seq, double kappa,
                                           double alpha_hat, std::span<const int> coarse_levels) {
    if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
    if (!(alpha_hat > 0.0 && alpha_hat <= 1.0)) throw ParameterError("alpha_hat must lie in (0, 1]");
    AveragingReport r;
    r.kappa = kappa;
    r.alpha = alpha_hat;
    r.kappa_warning = !(kappa > 1.0 / (2.0 * alpha_hat));
    for (int n : coarse_levels) {
        const Partition& coarse = seq.at(n);
        const double target = std::pow(coarse.mesh(), kappa);
        int chosen = -1;
        for (const auto& l : seq.levels())
            if (l.n >= n && l.partition.mesh() <= target * (1.0 + 1e-12)) {
                chosen = l.n;
                break;
            }
        if (chosen < 0)
            throw ExhaustionError("averaging: no level l >= " + std::to_string(n) + " with |sigma^l| <= |sigma^" +
                                  std::to_string(n) + "|^kappa; extend the sequence");
        const Partition& fine = seq.at(chosen);
        AveragingLevel a;
        a.n = n;
        a.fine_level = chosen;
        a.sum = roughness_statistic(x, coarse, fine).S;
        a.coarse_mesh = coarse.mesh();
        a.fine_mesh = fine.mesh();
        a.remainder_bound = static_cast<double>(coarse.intervals()) * std::pow(fine.mesh(), 2.0 * alpha_hat);
        r.levels.push_back(a);
    }
    return r;
}

/// Roughness values of one coarse level across Monte Carlo seeds.
struct TailSample {
    int level = 0;
    double coarse_mesh = 0.0;
    double balance = 1.0;  ///< measured max/min interval ratio c
    std::vector<double> S;
};

struct TailLevel {
    int level = 0;
    std::size_t seeds = 0;
    std::vector<double> frequency;  ///< P(|S| > delta) per delta
    double variance = 0.0;
    double budget = 0.0;  ///< 2 c T |pi^n| (1 + margin)
    bool variance_ok = true;
};

struct TailReport {
    std::vector<double> deltas;
    std::vector<TailLevel> levels;
    /// log frequency regressed on delta / sqrt|pi^n| over points with frequency > 0
    stats::LinearFit fit;
    std::size_t fit_points = 0;
    bool slope_negative = false;
    bool variance_ok = true;
};

inline TailReport hw_tail_check(std::span<const TailSample> samples, std::span<const double> deltas,
                                double horizon, double margin = 0.5, std::size_t min_seeds = 100) {
    if (deltas.empty()) throw ParameterError("hw_tail_check needs at least one delta");
    TailReport r;
    r.deltas.assign(deltas.begin(), deltas.end());
    std::vector<double> fx, fy;
    for (const auto& s : samples) {
        if (s.S.size() < min_seeds)
            throw StatisticalPowerError("level " + std::to_string(s.level) + " has " + std::to_string(s.S.size()) +
                                        " seeds; at least " + std::to_string(min_seeds) + " are required");
        TailLevel t;
        t.level = s.level;
        t.seeds = s.S.size();
        for (double delta : deltas) {
            std::size_t over = 0;
            for (double v : s.S) over += std::abs(v) > delta;
            const double f = static_cast<double>(over) / static_cast<double>(s.S.size());
            t.frequency.push_back(f);
            if (f > 0.0) {
                fx.push_back(delta / std::sqrt(s.coarse_mesh));
                fy.push_back(std::log(f));
            }
        }
        t.variance = stats::variance(s.S);
        t.budget = 2.0 * s.balance * horizon * s.coarse_mesh * (1.0 + margin);
        t.variance_ok = t.variance <= t.budget;
        r.variance_ok = r.variance_ok && t.variance_ok;
        r.levels.push_back(std::move(t));
    }
    r.fit_points = fx.size();
    if (fx.size() >= 2) {
        r.fit = stats::linear_fit(fx, fy);
        r.slope_negative = !r.fit.degenerate && r.fit.slope < 0.0;
    } else {
        r.fit.degenerate = true;
    }
    return r;
}

}  // namespace pqv
