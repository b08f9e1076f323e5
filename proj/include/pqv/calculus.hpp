#pragma once

// Left-point (Föllmer) sums along a partition, the pathwise Itô residual and
// the isometry comparison.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/functions.hpp"
#include "pqv/partitions.hpp"
#include "pqv/paths.hpp"
#include "pqv/quadvar.hpp"

namespace pqv {

using ScalarFn = std::function<double(double)>;
/// grad(x, out): writes the gradient at x into out.
using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
/// hess(x, out): writes the row-major d x d Hessian at x into out.
using HessianFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Sum of f1(x(t_i)) (x(t_{i+1} ^ t) - x(t_i ^ t)) over the partition, at
/// every eval index.
inline std::vector<double> follmer_curve(const SampledPath& x, const ScalarFn& f1, const Partition& p,
                                         std::span<const std::size_t> eval) {
    if (x.dim() != 1) throw ParameterError("scalar integrand needs a scalar path");
    detail::require_path_grid(x, p);
    detail::require_eval(x, eval);
    const std::size_t N = p.intervals();
    std::vector<double> cum(N + 1, 0.0), slope(N);
    for (std::size_t k = 0; k < N; ++k) {
        slope[k] = f1(x.value(p.index(k)));
        cum[k + 1] = cum[k] + slope[k] * (x.value(p.index(k + 1)) - x.value(p.index(k)));
    }
    std::vector<double> out(eval.size(), 0.0);
    for (std::size_t e = 0; e < eval.size(); ++e) {
        const std::size_t t = eval[e];
        if (t <= p.first()) continue;
        if (t >= p.last()) {
            out[e] = cum[N];
            continue;
        }
        const std::size_t k = p.interval_of(t);
        out[e] = cum[k] + slope[k] * (x.value(t) - x.value(p.index(k)));
    }
    return out;
}

inline double follmer_integral(const SampledPath& x, const ScalarFn& f1, const Partition& p, std::size_t t) {
    const std::size_t e[1] = {t};
    return follmer_curve(x, f1, p, e)[0];
}

/// Vector form: sum of grad f(x(t_i)) . (x(t_{i+1} ^ t) - x(t_i ^ t)).
inline double follmer_integral(const SampledPath& x, const GradientFn& grad, const Partition& p, std::size_t t) {
    detail::require_path_grid(x, p);
    const std::size_t d = x.dim();
    std::vector<double> g(d);
    double s = 0.0;
    for (std::size_t k = 0; k < p.intervals() && p.index(k) < t; ++k) {
        const std::size_t a = p.index(k), b = std::min(p.index(k + 1), t);
        grad(x.row(a), g);
        for (std::size_t c = 0; c < d; ++c) s += g[c] * (x.value(b, c) - x.value(a, c));
    }
    return s;
}

struct ItoLevel {
    int level = 0;
    std::vector<double> residual;
    double sup = 0.0;
};

struct ItoResidual {
    std::vector<std::size_t> eval_index;
    std::vector<double> eval_times;
    std::vector<ItoLevel> levels;
};

/// f(x(t)) - f(x(0)) - left sum - 1/2 sum f''(x(t_i)) (x(t_{i+1} ^ t) - x(t_i ^ t))^2.
/// The last term is the left-point Stieltjes sum of f'' against the
/// increments of the running quadratic variation along the same partition.
inline ItoLevel ito_residual(const SampledPath& x, const FunctionTriple& fn, const Partition& p,
                             std::span<const std::size_t> eval, int level = 0) {
    if (x.dim() != 1) throw ParameterError("ito_residual expects a scalar path; use the gradient form for d > 1");
    const auto integral = follmer_curve(x, fn.f1, p, eval);
    const std::size_t N = p.intervals();
    std::vector<double> cum(N + 1, 0.0), curv(N);
    for (std::size_t k = 0; k < N; ++k) {
        curv[k] = fn.f2(x.value(p.index(k)));
        const double dx = x.value(p.index(k + 1)) - x.value(p.index(k));
        cum[k + 1] = cum[k] + curv[k] * dx * dx;
    }
    ItoLevel r;
    r.level = level;
    const double f0 = fn.f(x.value(0));
    for (std::size_t e = 0; e < eval.size(); ++e) {
        const std::size_t t = eval[e];
        double second = 0.0;
        if (t >= p.last()) {
            second = cum[N];
        } else if (t > p.first()) {
            const std::size_t k = p.interval_of(t);
            const double dx = x.value(t) - x.value(p.index(k));
            second = cum[k] + curv[k] * dx * dx;
        }
        const double res = fn.f(x.value(t)) - f0 - integral[e] - 0.5 * second;
        r.residual.push_back(res);
        r.sup = std::max(r.sup, std::abs(res));
    }
    return r;
}

inline ItoResidual ito_residual(const SampledPath& x, const FunctionTriple& fn, const PartitionSequence& seq,
                                std::span<const std::size_t> eval) {
    ItoResidual r;
    r.eval_index.assign(eval.begin(), eval.end());
    for (std::size_t t : eval) r.eval_times.push_back(x.grid().time(t));
    for (const auto& l : seq.levels()) r.levels.push_back(ito_residual(x, fn, l.partition, eval, l.n));
    return r;
}

/// Vector form at a single time: f(x(t)) - f(x(0)) - sum grad f . dx - 1/2 sum dx^T H dx.
inline double ito_residual(const SampledPath& x, const std::function<double(std::span<const double>)>& f,
                           const GradientFn& grad, const HessianFn& hess, const Partition& p, std::size_t t) {
    detail::require_path_grid(x, p);
    const std::size_t d = x.dim();
    std::vector<double> h(d * d), dx(d);
    double second = 0.0;
    for (std::size_t k = 0; k < p.intervals() && p.index(k) < t; ++k) {
        const std::size_t a = p.index(k), b = std::min(p.index(k + 1), t);
        hess(x.row(a), h);
        for (std::size_t c = 0; c < d; ++c) dx[c] = x.value(b, c) - x.value(a, c);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) second += dx[i] * h[i * d + j] * dx[j];
    }
    return f(x.row(t)) - f(x.row(0)) - follmer_integral(x, grad, p, t) - 0.5 * second;
}

struct IsometryReport {
    int level = 0;
    int eval_level = 0;
    std::vector<double> eval_times;
    std::vector<double> lhs;  ///< [I]_pi(t), I the left sum along the eval grid
    std::vector<double> rhs;  ///< sum f'(x(t_i))^2 increments of [x]_pi
    double sup_distance = 0.0;
};

/// The integral path I is the left sum along the dyadic eval grid of level
/// `eval_level`, evaluated at every eval point; its quadratic variation
/// along the partition is compared with the Stieltjes sum of f'^2 against
/// [x]_pi. The eval grid has to contain every partition point.
inline IsometryReport isometry_check(const SampledPath& x, const FunctionTriple& fn, const Partition& p,
                                     int eval_level, int level = 0) {
    if (x.dim() != 1) throw ParameterError("isometry_check expects a scalar path");
    detail::require_path_grid(x, p);
    if (eval_level < 4 || eval_level > x.level()) throw ParameterError("eval level must lie in [4, M]");
    const std::size_t stride = std::size_t{1} << (x.level() - eval_level);
    for (std::size_t j : p.indices())
        if (j % stride != 0) throw ParameterError("eval grid is coarser than the partition");
    const Partition grid_part = dyadic_partition(eval_level, x.grid());
    const auto eval = std::vector<std::size_t>(grid_part.indices().begin(), grid_part.indices().end());
    auto integral = follmer_curve(x, fn.f1, grid_part, eval);

    // I as a path on its own grid; the partition is re-indexed to that grid.
    const SampledPath ipath = custom_path(eval_level, x.horizon(), 1, integral);
    std::vector<std::size_t> idx;
    for (std::size_t j : p.indices()) idx.push_back(j / stride);
    const Partition coarse(ipath.grid(), std::move(idx));
    std::vector<std::size_t> local(eval.size());
    for (std::size_t e = 0; e < eval.size(); ++e) local[e] = e;
    const QVCurve lhs = qv_level(ipath, coarse, local, level);

    const std::size_t N = p.intervals();
    std::vector<double> cum(N + 1, 0.0), w(N);
    for (std::size_t k = 0; k < N; ++k) {
        const double g = fn.f1(x.value(p.index(k)));
        w[k] = g * g;
        cum[k + 1] = cum[k] + w[k] * x.sq_increment(p.index(k), p.index(k + 1));
    }
    IsometryReport r;
    r.level = level;
    r.eval_level = eval_level;
    for (std::size_t e = 0; e < eval.size(); ++e) {
        const std::size_t t = eval[e];
        double v = 0.0;
        if (t >= p.last()) {
            v = cum[N];
        } else if (t > p.first()) {
            const std::size_t k = p.interval_of(t);
            v = cum[k] + w[k] * x.sq_increment(p.index(k), t);
        }
        r.eval_times.push_back(x.grid().time(t));
        r.lhs.push_back(lhs.value(e));
        r.rhs.push_back(v);
        r.sup_distance = std::max(r.sup_distance, std::abs(lhs.value(e) - v));
    }
    return r;
}

}  // namespace pqv
