#pragma once

// Running quadratic variation along a partition, its matrix form, and
// finite-level convergence and invariance diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/partition_diagnostics.hpp"
#include "pqv/partitions.hpp"
#include "pqv/paths.hpp"

namespace pqv {

/// [x]_pi(t) on an evaluation grid of master indices. Values are stored as
/// row-major d x d matrices per evaluation point (a single number when d = 1).
struct QVCurve {
    std::vector<std::size_t> eval_index;
    std::vector<double> eval_times;
    std::size_t dim = 1;
    std::vector<double> values;
    int level = 0;

    std::size_t size() const { return eval_index.size(); }
    double value(std::size_t k, std::size_t i = 0, std::size_t j = 0) const {
        return values[(k * dim + i) * dim + j];
    }
    double trace(std::size_t k) const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += value(k, i, i);
        return s;
    }
    double final_value(std::size_t i = 0, std::size_t j = 0) const { return value(size() - 1, i, j); }
};

/// Master indices for a list of times; every time must sit on the grid.
inline std::vector<std::size_t> eval_indices_from_times(const Grid& g, std::span<const double> times) {
    std::vector<std::size_t> idx;
    idx.reserve(times.size());
    for (double t : times) {
        if (!(t >= g.origin - 1e-12 * g.horizon && t <= g.origin + g.horizon * (1 + 1e-12)))
            throw ParameterError("evaluation time outside the grid span");
        const std::size_t j = g.snap(t);
        if (std::abs(g.time(j) - t) > 1e-9 * g.step() + 1e-12 * g.horizon)
            throw ParameterError("evaluation time is not a master-grid time");
        idx.push_back(j);
    }
    return idx;
}

/// Every master index 0..2^M.
inline std::vector<std::size_t> full_eval_indices(const Grid& g) {
    std::vector<std::size_t> idx(g.points());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    return idx;
}

/// Uniform eval grid with 2^level intervals (capped at the master level).
inline std::vector<std::size_t> uniform_eval_indices(const Grid& g, int level) {
    level = std::clamp(level, 0, g.level);
    const std::size_t stride = std::size_t{1} << (g.level - level);
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j <= g.intervals(); j += stride) idx.push_back(j);
    return idx;
}

/// Points of `coarse` merged with a uniform 2^8 grid.
inline std::vector<std::size_t> default_eval_indices(const Partition& coarse) {
    auto idx = uniform_eval_indices(coarse.grid(), 8);
    idx.insert(idx.end(), coarse.indices().begin(), coarse.indices().end());
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

namespace detail {

inline void require_path_grid(const SampledPath& x, const Partition& p) {
    const Grid& g = p.grid();
    if (g.level != x.level() || g.horizon != x.horizon() || g.origin != 0.0)
        throw ParameterError("partition and path live on different master grids");
}

inline void require_eval(const SampledPath& x, std::span<const std::size_t> eval) {
    if (eval.empty()) throw ParameterError("empty evaluation grid");
    for (std::size_t k = 0; k < eval.size(); ++k) {
        if (eval[k] >= x.points()) throw ParameterError("evaluation index beyond the master grid");
        if (k && eval[k] < eval[k - 1]) throw ParameterError("evaluation grid must be sorted");
    }
}

/// Interval k of p with p[k] <= j < p[k+1]; requires first < j < last... or clamps.
inline std::size_t straddle(const Partition& p, std::size_t j) { return p.interval_of(j); }

}  // namespace detail

/// Sum over the partition of |x(t_{k+1} ^ t) - x(t_k ^ t)|^2 (matrix of
/// cross-products when d > 1), evaluated at each index of `eval`.
inline QVCurve qv_level(const SampledPath& x, const Partition& p, std::span<const std::size_t> eval, int level = 0) {
    detail::require_path_grid(x, p);
    detail::require_eval(x, eval);
    const std::size_t d = x.dim(), dd = d * d, N = p.intervals();
    std::vector<double> cum((N + 1) * dd, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t a = p.index(k), b = p.index(k + 1);
        for (std::size_t i = 0; i < d; ++i) {
            const double di = x.value(b, i) - x.value(a, i);
            for (std::size_t j = 0; j < d; ++j) {
                const double dj = x.value(b, j) - x.value(a, j);
                cum[(k + 1) * dd + i * d + j] = cum[k * dd + i * d + j] + di * dj;
            }
        }
    }
    QVCurve c;
    c.dim = d;
    c.level = level;
    c.eval_index.assign(eval.begin(), eval.end());
    c.eval_times.resize(eval.size());
    c.values.assign(eval.size() * dd, 0.0);
    for (std::size_t e = 0; e < eval.size(); ++e) {
        const std::size_t t = eval[e];
        c.eval_times[e] = x.grid().time(t);
        double* out = &c.values[e * dd];
        if (t <= p.first()) continue;
        if (t >= p.last()) {
            std::copy_n(&cum[N * dd], dd, out);
            continue;
        }
        const std::size_t k = detail::straddle(p, t);
        const std::size_t a = p.index(k);
        for (std::size_t i = 0; i < d; ++i) {
            const double di = x.value(t, i) - x.value(a, i);
            for (std::size_t j = 0; j < d; ++j)
                out[i * d + j] = cum[k * dd + i * d + j] + di * (x.value(t, j) - x.value(a, j));
        }
    }
    return c;
}

inline QVCurve qv_level(const SampledPath& x, const Partition& p, int level = 0) {
    const auto eval = full_eval_indices(x.grid());
    return qv_level(x, p, eval, level);
}

/// [x]_pi(T) as a single number (trace for d > 1).
inline double qv_total(const SampledPath& x, const Partition& p) {
    detail::require_path_grid(x, p);
    double s = 0.0;
    for (std::size_t k = 0; k < p.intervals(); ++k) s += x.sq_increment(p.index(k), p.index(k + 1));
    return s;
}

struct QVMatrix {
    QVCurve polarized;
    QVCurve direct;
    /// max |polarized - direct| over entries and eval points
    double max_gap = 0.0;
    /// max_gap <= 1e-12 * (1 + max |direct|)
    bool agree = true;
};

/// Off-diagonal entries from ([x^i + x^j] - [x^i] - [x^j]) / 2, cross-checked
/// against the direct cross-product sum.
inline QVMatrix qv_matrix(const SampledPath& x, const Partition& p, std::span<const std::size_t> eval, int level = 0) {
    if (x.dim() < 2) throw ParameterError("qv_matrix needs d >= 2");
    QVMatrix r;
    r.direct = qv_level(x, p, eval, level);
    const std::size_t d = x.dim();
    std::vector<QVCurve> diag;
    for (std::size_t i = 0; i < d; ++i) diag.push_back(qv_level(x.component(i), p, eval, level));
    r.polarized = r.direct;
    double scale = 0.0;
    for (std::size_t e = 0; e < eval.size(); ++e) {
        for (std::size_t i = 0; i < d; ++i) {
            r.polarized.values[(e * d + i) * d + i] = diag[i].value(e);
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const SampledPath sum = add(x.component(i), x.component(j));
            const QVCurve s = qv_level(sum, p, eval, level);
            for (std::size_t e = 0; e < eval.size(); ++e) {
                const double v = 0.5 * (s.value(e) - diag[i].value(e) - diag[j].value(e));
                r.polarized.values[(e * d + i) * d + j] = v;
                r.polarized.values[(e * d + j) * d + i] = v;
            }
        }
    }
    for (std::size_t q = 0; q < r.direct.values.size(); ++q) {
        scale = std::max(scale, std::abs(r.direct.values[q]));
        r.max_gap = std::max(r.max_gap, std::abs(r.direct.values[q] - r.polarized.values[q]));
    }
    r.agree = r.max_gap <= 1e-12 * (1.0 + scale);
    return r;
}

/// Largest entrywise distance between two curves on the same eval grid.
inline double sup_distance(const QVCurve& a, const QVCurve& b) {
    if (a.eval_index != b.eval_index || a.dim != b.dim) throw ParameterError("curves use different eval grids");
    double m = 0.0;
    for (std::size_t q = 0; q < a.values.size(); ++q) m = std::max(m, std::abs(a.values[q] - b.values[q]));
    return m;
}

/// 3 sqrt(2 |pi|): three standard deviations of the squared-increment sum of
/// a unit-rate Brownian path on [0, 1].
inline double default_brownian_tolerance(double mesh) { return 3.0 * std::sqrt(2.0 * mesh); }

struct QVConvergence {
    std::vector<int> levels;
    std::vector<double> mesh;
    std::vector<double> final_values;     ///< [x](T) per level (trace for d > 1)
    std::vector<double> sup_to_finest;    ///< sup_t distance to the finest level
    std::vector<double> cauchy;           ///< sup_t distance between consecutive levels
    double tol = 0.0;
    bool cauchy_at_tol = false;           ///< last two consecutive distances below tol
};

inline QVConvergence qv_limit_diagnostic(const SampledPath& x, const PartitionSequence& seq,
                                         std::span<const std::size_t> eval, double tol) {
    if (seq.size() < 3) throw ParameterError("qv_limit_diagnostic needs at least three levels");
    if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
    std::vector<QVCurve> curves;
    QVConvergence r;
    r.tol = tol;
    for (const auto& l : seq.levels()) {
        curves.push_back(qv_level(x, l.partition, eval, l.n));
        r.levels.push_back(l.n);
        r.mesh.push_back(l.partition.mesh());
        r.final_values.push_back(curves.back().trace(curves.back().size() - 1));
    }
    for (const auto& c : curves) r.sup_to_finest.push_back(sup_distance(c, curves.back()));
    for (std::size_t i = 1; i < curves.size(); ++i) r.cauchy.push_back(sup_distance(curves[i - 1], curves[i]));
    const std::size_t m = r.cauchy.size();
    r.cauchy_at_tol = r.cauchy[m - 1] < tol && r.cauchy[m - 2] < tol;
    return r;
}

struct InvariancePair {
    int level_a = 0;
    int level_b = 0;
    double mesh_a = 0.0;
    double mesh_b = 0.0;
    double sup_distance = 0.0;
};

struct InvarianceReport {
    std::string pairing;  ///< "level" or "adjusted"
    std::vector<InvariancePair> pairs;
    double c_hat_a = 1.0;
    double c_hat_b = 1.0;
    double tol = 0.0;
    double finest_distance = 0.0;
    bool passed = false;
};

/// sup_t |[x]_{A^n}(t) - [x]_{B^m(n)}(t)| for mesh-matched pairs. Comparable
/// sequences are paired level by level; otherwise the coarser-mesh sequence
/// is re-indexed with the k(n) subsequence of adjust_subsequence.
inline InvarianceReport invariance_check(const SampledPath& x, const PartitionSequence& a,
                                         const PartitionSequence& b, std::span<const std::size_t> eval,
                                         double tol, double bound = 4.0) {
    if (a.empty() || b.empty()) throw PairingError("invariance_check: empty sequence");
    InvarianceReport r;
    r.tol = tol;
    for (const auto& l : a.levels()) r.c_hat_a = std::max(r.c_hat_a, l.partition.ratio());
    for (const auto& l : b.levels()) r.c_hat_b = std::max(r.c_hat_b, l.partition.ratio());

    std::vector<std::pair<int, int>> pairs;
    bool shared = false;
    for (const auto& l : a.levels()) shared = shared || b.find(l.n);
    if (shared && comparability(a, b, bound).comparable) {
        r.pairing = "level";
        for (const auto& l : a.levels())
            if (b.find(l.n)) pairs.emplace_back(l.n, l.n);
    } else {
        r.pairing = "adjusted";
        // Re-index whichever sequence has the coarser mesh at its finest level.
        const bool a_coarser = a.back().partition.mesh() > b.back().partition.mesh();
        const PartitionSequence& tau = a_coarser ? b : a;
        const PartitionSequence& sigma = a_coarser ? a : b;
        for (const auto& l : sigma.levels()) {
            const int k = detail::first_level_at_most(tau, std::numeric_limits<int>::min(), l.partition.mesh());
            if (k < 0) continue;
            const double ratio = l.partition.mesh() / tau.at(k).mesh();
            if (ratio > bound) continue;
            if (a_coarser)
                pairs.emplace_back(l.n, k);
            else
                pairs.emplace_back(k, l.n);
        }
    }
    if (pairs.empty()) throw PairingError("invariance_check: no mesh-matched pair of levels");
    for (auto [na, nb] : pairs) {
        const Partition& pa = a.at(na);
        const Partition& pb = b.at(nb);
        InvariancePair ip{na, nb, pa.mesh(), pb.mesh(), 0.0};
        ip.sup_distance = sup_distance(qv_level(x, pa, eval, na), qv_level(x, pb, eval, nb));
        r.pairs.push_back(ip);
    }
    r.finest_distance = r.pairs.back().sup_distance;
    r.passed = r.finest_distance < tol;
    return r;
}

}  // namespace pqv
