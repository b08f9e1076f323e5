#pragma once

// Discrete pathwise local time: for each partition interval with end values
// a = x(t_j ^ t) and b = x(t_{j+1} ^ t), a tent 2|b - u| on [[a, b)) where
// [[a, b)) is [a, b) or [b, a). Each tent integrates to (b - a)^2, so the
// field integrates over u to [x]_pi(t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pqv/calculus.hpp"
#include "pqv/errors.hpp"
#include "pqv/partitions.hpp"
#include "pqv/paths.hpp"
#include "pqv/quadvar.hpp"

namespace pqv {

struct UGrid {
    double lo = 0.0;
    double step = 1.0;
    std::size_t count = 0;

    double at(std::size_t k) const { return lo + step * static_cast<double>(k); }
    double hi() const { return at(count - 1); }
};

/// Uniform level grid over [min x - m, max x + m] with m = margin * range;
/// a constant path gets a unit-width grid around its value.
inline UGrid make_u_grid(const SampledPath& x, std::size_t points = 257, double margin = 0.05) {
    if (x.dim() != 1) throw ParameterError("local time needs a scalar path");
    if (points < 257) throw ParameterError("u grid needs at least 2^8 + 1 points");
    if (!(margin >= 0.0)) throw ParameterError("u grid margin must be >= 0");
    const auto s = x.samples();
    const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
    double lo = *mn, hi = *mx;
    const double range = hi - lo;
    if (range > 0.0) {
        lo -= margin * range;
        hi += margin * range;
    } else {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, (hi - lo) / static_cast<double>(points - 1), points};
}

struct LocalTimeField {
    UGrid u;
    std::vector<std::size_t> t_index;
    std::vector<double> t_times;
    /// values[k * u.count + i] = L_{t_k}(u_i)
    std::vector<double> values;
    int level = 0;

    double at(std::size_t k, std::size_t i) const { return values[k * u.count + i]; }
    std::span<const double> row(std::size_t k) const { return {values.data() + k * u.count, u.count}; }
    std::size_t row_of(std::size_t master_index) const {
        for (std::size_t k = 0; k < t_index.size(); ++k)
            if (t_index[k] == master_index) return k;
        throw ParameterError("time not on the local-time grid");
    }
};

namespace detail {

/// Adds the tent of the increment a -> b to acc on the u grid.
inline void add_tent(std::vector<double>& acc, const UGrid& u, double a, double b, double sign = 1.0) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!(hi > lo)) return;
    const double first = std::ceil((lo - u.lo) / u.step);
    std::size_t i = first < 0 ? 0 : static_cast<std::size_t>(first);
    for (; i < u.count; ++i) {
        const double v = u.at(i);
        if (v >= hi) break;
        if (v >= lo) acc[i] += sign * 2.0 * std::abs(b - v);
    }
}

/// Trapezoid integral of the piecewise-linear interpolant of f over [a, b].
inline double trapezoid(std::span<const double> f, const UGrid& u, double a, double b) {
    a = std::max(a, u.lo);
    b = std::min(b, u.hi());
    if (!(b > a)) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < u.count; ++i) {
        const double x0 = u.at(i), x1 = u.at(i + 1);
        const double l = std::max(a, x0), r = std::min(b, x1);
        if (!(r > l)) continue;
        const double fl = f[i] + (f[i + 1] - f[i]) * (l - x0) / u.step;
        const double fr = f[i] + (f[i + 1] - f[i]) * (r - x0) / u.step;
        s += 0.5 * (fl + fr) * (r - l);
    }
    return s;
}

}  // namespace detail

/// Evaluates the discrete local time at every (t, u) node. Both interval
/// endpoints are stopped at t, so the straddling interval contributes the
/// tent of x(t_j) -> x(t).
inline LocalTimeField local_time_discrete(const SampledPath& x, const Partition& p,
                                          std::span<const std::size_t> t_grid, const UGrid& u, int level = 0) {
    if (x.dim() != 1) throw ParameterError("local time needs a scalar path");
    detail::require_path_grid(x, p);
    detail::require_eval(x, t_grid);
    if (u.count < 2 || !(u.step > 0.0)) throw ParameterError("invalid u grid");
    const auto s = x.samples();
    const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
    if (*mn < u.lo || *mx > u.hi()) throw ParameterError("u grid does not cover the path range");

    LocalTimeField L;
    L.u = u;
    L.level = level;
    L.t_index.assign(t_grid.begin(), t_grid.end());
    L.values.assign(t_grid.size() * u.count, 0.0);
    std::vector<double> acc(u.count, 0.0), row(u.count);
    std::size_t done = 0;  // intervals fully accumulated
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const std::size_t t = t_grid[k];
        L.t_times.push_back(x.grid().time(t));
        while (done < p.intervals() && p.index(done + 1) <= t) {
            detail::add_tent(acc, u, x.value(p.index(done)), x.value(p.index(done + 1)));
            ++done;
        }
        row = acc;
        if (done < p.intervals() && p.index(done) < t)
            detail::add_tent(row, u, x.value(p.index(done)), x.value(t));
        std::copy(row.begin(), row.end(), L.values.begin() + static_cast<std::ptrdiff_t>(k * u.count));
    }
    return L;
}

/// Rigorous bound on |trapezoid(L) - [x]_pi(t)| over the whole u line.
inline double tent_quadrature_bound(const SampledPath& x, const Partition& p, std::size_t t, const UGrid& u) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.intervals() && p.index(k) < t; ++k)
        s += std::abs(x.value(std::min(p.index(k + 1), t)) - x.value(p.index(k))) + 0.25 * u.step;
    return u.step * s;
}

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct OccupationRow {
    Interval set;
    double lhs = 0.0;           ///< integral of L over the set
    double rhs = 0.0;           ///< sum of 1_A(x(t_j)) times the [x]_pi increment
    double rhs_half = 0.0;      ///< rhs / 2
    double rel_err = 0.0;       ///< |lhs - rhs| / max(|rhs|, tiny)
    double rel_err_half = 0.0;  ///< |lhs - rhs_half| / max(|rhs_half|, tiny)
    /// "1" when the factor-1 normalisation is closer, "1/2" otherwise.
    std::string matches;
};

struct OccupationReport {
    std::size_t t_index = 0;
    std::vector<OccupationRow> rows;
    double full_integral = 0.0;  ///< quadrature of L over the whole u grid
    double qv = 0.0;             ///< [x]_pi(t)
    double bound = 0.0;          ///< tent_quadrature_bound
    bool tent_identity = true;   ///< |full_integral - qv| <= bound
};

inline OccupationReport occupation_check(const LocalTimeField& L, const SampledPath& x, const Partition& p,
                                         std::span<const Interval> sets, std::size_t t) {
    const std::size_t k = L.row_of(t);
    const auto f = L.row(k);
    OccupationReport r;
    r.t_index = t;
    r.full_integral = detail::trapezoid(f, L.u, L.u.lo, L.u.hi());
    for (std::size_t j = 0; j < p.intervals() && p.index(j) < t; ++j)
        r.qv += x.sq_increment(p.index(j), std::min(p.index(j + 1), t));
    r.bound = tent_quadrature_bound(x, p, t, L.u);
    r.tent_identity = std::abs(r.full_integral - r.qv) <= r.bound + 1e-12 * r.qv;
    for (const auto& A : sets) {
        if (A.lo > A.hi) throw ParameterError("occupation set needs lo <= hi");
        OccupationRow row;
        row.set = A;
        row.lhs = detail::trapezoid(f, L.u, A.lo, A.hi);
        for (std::size_t j = 0; j < p.intervals() && p.index(j) < t; ++j) {
            const double v = x.value(p.index(j));
            if (v >= A.lo && v <= A.hi) row.rhs += x.sq_increment(p.index(j), std::min(p.index(j + 1), t));
        }
        row.rhs_half = 0.5 * row.rhs;
        const double tiny = std::numeric_limits<double>::min();
        row.rel_err = std::abs(row.lhs - row.rhs) / std::max(std::abs(row.rhs), tiny);
        row.rel_err_half = std::abs(row.lhs - row.rhs_half) / std::max(std::abs(row.rhs_half), tiny);
        if (row.rhs == 0.0 && row.lhs == 0.0) row.rel_err = row.rel_err_half = 0.0;
        row.matches = std::abs(row.lhs - row.rhs) <= std::abs(row.lhs - row.rhs_half) ? "1" : "1/2";
        r.rows.push_back(row);
    }
    return r;
}

/// f(x(t)) - f(x(0)) - left sum - 1/2 * quadrature of L_t f'' over the u grid.
inline double tanaka_residual(const SampledPath& x, const FunctionTriple& fn, const Partition& p,
                              const LocalTimeField& L, std::size_t t) {
    const auto f = L.row(L.row_of(t));
    std::vector<double> g(L.u.count);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = f[i] * fn.f2(L.u.at(i));
    const double q = detail::trapezoid(g, L.u, L.u.lo, L.u.hi());
    return fn.f(x.value(t)) - fn.f(x.value(0)) - follmer_integral(x, fn.f1, p, t) - 0.5 * q;
}

struct TestFunction {
    std::string name;
    std::function<double(double)> h;
};

/// Indicators of the dyadic quarters of the u span, Gaussian bumps at the
/// span centre and quartiles, and the monomials 1, u, u^2.
inline std::vector<TestFunction> default_test_bank(const UGrid& u) {
    std::vector<TestFunction> bank;
    const double lo = u.lo, w = u.hi() - u.lo;
    for (int q = 0; q < 4; ++q) {
        const double a = lo + w * q / 4.0, b = lo + w * (q + 1) / 4.0;
        bank.push_back({"indicator_" + std::to_string(q), [=](double v) { return v >= a && v < b ? 1.0 : 0.0; }});
    }
    const double sd = w / 8.0;
    for (int q = 1; q <= 3; ++q) {
        const double c = lo + w * q / 4.0;
        bank.push_back({"gauss_" + std::to_string(q), [=](double v) { return std::exp(-0.5 * (v - c) * (v - c) / (sd * sd)); }});
    }
    bank.push_back({"one", [](double) { return 1.0; }});
    bank.push_back({"u", [](double v) { return v; }});
    bank.push_back({"u2", [](double v) { return v * v; }});
    return bank;
}

struct WeakL2Report {
    std::vector<int> levels;
    std::vector<std::string> names;
    /// pairings[h][level]
    std::vector<std::vector<double>> pairings;
    /// cauchy[h][i] = |pairing at level i+1 - pairing at level i|
    std::vector<std::vector<double>> cauchy;
    double tol = 0.0;
    double last_pair_max = 0.0;
    bool passed = false;
};

/// Pairings of each test function with L_t along several levels (common u
/// grid and t) and their Cauchy differences.
inline WeakL2Report weak_l2_convergence(std::span<const LocalTimeField> fields, std::span<const TestFunction> bank,
                                        std::size_t t, double tol) {
    if (fields.size() < 3) throw ParameterError("weak_l2_convergence needs at least three levels");
    const UGrid& u = fields.front().u;
    for (const auto& f : fields)
        if (f.u.lo != u.lo || f.u.step != u.step || f.u.count != u.count)
            throw ParameterError("local-time fields must share one u grid");
    WeakL2Report r;
    r.tol = tol;
    for (const auto& f : fields) r.levels.push_back(f.level);
    std::vector<double> g(u.count);
    for (const auto& h : bank) {
        r.names.push_back(h.name);
        std::vector<double> pr;
        for (const auto& f : fields) {
            const auto row = f.row(f.row_of(t));
            for (std::size_t i = 0; i < u.count; ++i) g[i] = row[i] * h.h(u.at(i));
            pr.push_back(detail::trapezoid(g, u, u.lo, u.hi()));
        }
        std::vector<double> c;
        for (std::size_t i = 1; i < pr.size(); ++i) c.push_back(std::abs(pr[i] - pr[i - 1]));
        r.last_pair_max = std::max(r.last_pair_max, c.back());
        r.pairings.push_back(std::move(pr));
        r.cauchy.push_back(std::move(c));
    }
    r.passed = r.last_pair_max < tol;
    return r;
}

}  // namespace pqv
