#pragma once

// Sample paths on a uniform master grid of 2^M + 1 points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/fbm.hpp"
#include "pqv/grid.hpp"
#include "pqv/rng.hpp"
#include "pqv/stats.hpp"

namespace pqv {

enum class PathKind : std::uint32_t {
    brownian = 0,
    fbm = 1,
    mixed = 2,
    linear = 3,
    constant = 4,
    weierstrass = 5,
    takagi = 6,
    custom = 7,
};

inline constexpr std::string_view to_string(PathKind k) {
    switch (k) {
        case PathKind::brownian: return "brownian";
        case PathKind::fbm: return "fbm";
        case PathKind::mixed: return "mixed";
        case PathKind::linear: return "linear";
        case PathKind::constant: return "constant";
        case PathKind::weierstrass: return "weierstrass";
        case PathKind::takagi: return "takagi";
        case PathKind::custom: return "custom";
    }
    return "custom";
}

inline PathKind path_kind_from_string(std::string_view s) {
    for (std::uint32_t c = 0; c <= 7; ++c) {
        const auto k = static_cast<PathKind>(c);
        if (to_string(k) == s) return k;
    }
    throw ParameterError("unknown path kind '" + std::string(s) + "'");
}

inline PathKind path_kind_from_code(std::uint32_t code) {
    if (code > 7) throw ParameterError("unknown path kind code " + std::to_string(code));
    return static_cast<PathKind>(code);
}

struct PathMeta {
    PathKind kind = PathKind::custom;
    std::uint64_t seed = 0;
    std::map<std::string, double> params;

    double param(const std::string& name, double fallback) const {
        auto it = params.find(name);
        return it == params.end() ? fallback : it->second;
    }
};

/// Immutable d-dimensional path sampled at every point of a master grid.
/// Samples are stored point-major: value(j, c) = samples[j * dim + c].
class SampledPath {
public:
    SampledPath(Grid grid, std::size_t dim, std::vector<double> samples, PathMeta meta = {})
        : grid_(grid), dim_(dim), samples_(std::move(samples)), meta_(std::move(meta)) {
        validate_grid(grid_);
        if (grid_.level < 4) throw ParameterError("master level M must be at least 4");
        if (grid_.origin != 0.0) throw ParameterError("paths start at time 0");
        if (dim_ < 1) throw ParameterError("path dimension must be at least 1");
        if (samples_.size() != grid_.points() * dim_)
            throw ParameterError("path needs exactly (2^M + 1) * d samples");
        for (double v : samples_)
            if (!std::isfinite(v)) throw ParameterError("path samples must be finite");
    }

    const Grid& grid() const { return grid_; }
    int level() const { return grid_.level; }
    double horizon() const { return grid_.horizon; }
    std::size_t dim() const { return dim_; }
    std::size_t points() const { return grid_.points(); }
    const PathMeta& meta() const { return meta_; }
    std::span<const double> samples() const { return samples_; }

    double value(std::size_t j, std::size_t c = 0) const { return samples_[j * dim_ + c]; }
    std::span<const double> row(std::size_t j) const {
        return std::span<const double>(samples_).subspan(j * dim_, dim_);
    }

    /// Squared Euclidean norm of x(b) - x(a).
    double sq_increment(std::size_t a, std::size_t b) const {
        double acc = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) {
            const double d = value(b, c) - value(a, c);
            acc += d * d;
        }
        return acc;
    }

    /// Inner product of x(b1) - x(a1) and x(b2) - x(a2).
    double dot_increment(std::size_t a1, std::size_t b1, std::size_t a2, std::size_t b2) const {
        double acc = 0.0;
        for (std::size_t c = 0; c < dim_; ++c)
            acc += (value(b1, c) - value(a1, c)) * (value(b2, c) - value(a2, c));
        return acc;
    }

    /// One coordinate as a scalar path.
    SampledPath component(std::size_t c) const {
        if (c >= dim_) throw ParameterError("component index out of range");
        std::vector<double> v(points());
        for (std::size_t j = 0; j < points(); ++j) v[j] = value(j, c);
        return SampledPath(grid_, 1, std::move(v), meta_);
    }

private:
    Grid grid_;
    std::size_t dim_;
    std::vector<double> samples_;
    PathMeta meta_;
};

namespace detail {

inline Grid make_path_grid(int level, double horizon) {
    if (level < 4) throw ParameterError("master level M must be at least 4");
    if (level > 28) throw ParameterError("master level M must be at most 28");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ParameterError("horizon T must be positive");
    return Grid{level, horizon, 0.0};
}

}  // namespace detail

/// Standard Brownian motion started at 0; increments N(0, T/2^M) per coordinate.
inline SampledPath gen_brownian(std::uint64_t seed, int level, double horizon, std::size_t dim = 1) {
    const Grid g = detail::make_path_grid(level, horizon);
    if (dim < 1) throw ParameterError("path dimension must be at least 1");
    Rng rng(seed);
    const double sd = std::sqrt(g.step());
    std::vector<double> v(g.points() * dim, 0.0);
    for (std::size_t j = 1; j < g.points(); ++j)
        for (std::size_t c = 0; c < dim; ++c)
            v[j * dim + c] = v[(j - 1) * dim + c] + sd * rng.normal();
    PathMeta meta{PathKind::brownian, seed, {}};
    return SampledPath(g, dim, std::move(v), std::move(meta));
}

/// Fractional Brownian motion with Hurst index H, started at 0.
/// meta.params["fbm_method"] records 1 for circulant embedding, 2 for Cholesky.
inline SampledPath gen_fbm(std::uint64_t seed, int level, double horizon, double hurst,
                           FbmMethod method = FbmMethod::automatic) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw ParameterError("Hurst index H must lie in (0, 1)");
    const Grid g = detail::make_path_grid(level, horizon);
    Rng rng(seed);
    const auto fgn = fgn_increments(rng, g.intervals(), hurst, g.step(), method);
    std::vector<double> v(g.points(), 0.0);
    for (std::size_t j = 1; j < g.points(); ++j) v[j] = v[j - 1] + fgn.increments[j - 1];
    PathMeta meta{PathKind::fbm, seed,
                  {{"H", hurst}, {"fbm_method", static_cast<double>(fgn.method)}}};
    return SampledPath(g, 1, std::move(v), std::move(meta));
}

inline std::uint64_t mixed_brownian_seed(std::uint64_t seed) { return derive_seed(seed, "mixed/brownian"); }
inline std::uint64_t mixed_fbm_seed(std::uint64_t seed) { return derive_seed(seed, "mixed/fbm"); }

/// B + delta * B^H with independent components seeded from `seed`.
inline SampledPath gen_mixed(std::uint64_t seed, int level, double horizon, double hurst,
                             double delta) {
    if (!(hurst > 0.5 && hurst < 1.0))
        throw ParameterError("mixed fractional Brownian motion needs 1/2 < H < 1");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ParameterError("delta must be >= 0");
    const SampledPath b = gen_brownian(mixed_brownian_seed(seed), level, horizon, 1);
    std::vector<double> v(b.samples().begin(), b.samples().end());
    double method = 0.0;
    if (delta > 0.0) {
        const SampledPath bh = gen_fbm(mixed_fbm_seed(seed), level, horizon, hurst);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] += delta * bh.value(j);
        method = bh.meta().param("fbm_method", 0.0);
    }
    PathMeta meta{PathKind::mixed, seed, {{"H", hurst}, {"delta", delta}, {"fbm_method", method}}};
    return SampledPath(b.grid(), 1, std::move(v), std::move(meta));
}

namespace detail {

inline double takagi(double s) {
    // s in [0, 1] on a dyadic grid; terms vanish once 2^n s is an integer
    double acc = 0.0, scale = 1.0, y = s;
    for (int n = 0; n < 64; ++n) {
        const double frac = y - std::floor(y);
        if (frac == 0.0) break;
        acc += scale * std::min(frac, 1.0 - frac);
        y *= 2.0;
        scale *= 0.5;
    }
    return acc;
}

inline double weierstrass(double s, double a, double b) {
    double acc = 0.0, amp = 1.0, freq = 1.0;
    while (amp > 1e-17) {
        acc += amp * std::cos(freq * std::numbers::pi * s);
        amp *= a;
        freq *= b;
        if (!std::isfinite(freq)) break;
    }
    return acc;
}

inline double param_or(const std::map<std::string, double>& p, const std::string& k, double d) {
    auto it = p.find(k);
    return it == p.end() ? d : it->second;
}

}  // namespace detail

/// Closed-form fixtures. Parameters: linear {slope, intercept}, constant {c},
/// weierstrass {a, b} with a in (0,1), b odd, ab > 1, takagi {} (scaled to t/T).
inline SampledPath gen_deterministic(PathKind kind, const std::map<std::string, double>& params,
                                     int level, double horizon, std::size_t dim = 1) {
    const Grid g = detail::make_path_grid(level, horizon);
    if (dim < 1) throw ParameterError("path dimension must be at least 1");
    std::vector<double> v(g.points() * dim);
    auto fill = [&](auto&& f) {
        for (std::size_t j = 0; j < g.points(); ++j) {
            const double val = f(j);
            for (std::size_t c = 0; c < dim; ++c) v[j * dim + c] = val;
        }
    };
    switch (kind) {
        case PathKind::linear: {
            const double slope = detail::param_or(params, "slope", 1.0);
            const double icpt = detail::param_or(params, "intercept", 0.0);
            fill([&](std::size_t j) { return icpt + slope * g.time(j); });
            break;
        }
        case PathKind::constant: {
            const double c = detail::param_or(params, "c", 0.0);
            fill([&](std::size_t) { return c; });
            break;
        }
        case PathKind::weierstrass: {
            const double a = detail::param_or(params, "a", 0.5);
            const double b = detail::param_or(params, "b", 3.0);
            if (!(a > 0.0 && a < 1.0)) throw ParameterError("weierstrass needs a in (0, 1)");
            if (b < 1.0 || std::floor(b) != b || std::fmod(b, 2.0) != 1.0)
                throw ParameterError("weierstrass needs an odd integer b");
            if (!(a * b > 1.0)) throw ParameterError("weierstrass needs a * b > 1");
            fill([&](std::size_t j) { return detail::weierstrass(g.time(j) / g.horizon, a, b); });
            break;
        }
        case PathKind::takagi:
            fill([&](std::size_t j) { return detail::takagi(std::ldexp(static_cast<double>(j), -level)); });
            break;
        default:
            throw ParameterError("gen_deterministic: unsupported kind '" + std::string(to_string(kind)) + "'");
    }
    return SampledPath(g, dim, std::move(v), PathMeta{kind, 0, params});
}

/// Arbitrary samples on a master grid.
inline SampledPath custom_path(int level, double horizon, std::size_t dim, std::vector<double> samples,
                               std::map<std::string, double> params = {}) {
    return SampledPath(detail::make_path_grid(level, horizon), dim, std::move(samples),
                       PathMeta{PathKind::custom, 0, std::move(params)});
}

inline SampledPath scaled(const SampledPath& x, double lambda) {
    std::vector<double> v(x.samples().begin(), x.samples().end());
    for (double& s : v) s *= lambda;
    return SampledPath(x.grid(), x.dim(), std::move(v), PathMeta{PathKind::custom, x.meta().seed, {{"scale", lambda}}});
}

inline SampledPath add(const SampledPath& x, const SampledPath& y) {
    require_same_grid(x.grid(), y.grid(), "path sum");
    if (x.dim() != y.dim()) throw ParameterError("path sum needs equal dimensions");
    std::vector<double> v(x.samples().begin(), x.samples().end());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += y.samples()[i];
    return SampledPath(x.grid(), x.dim(), std::move(v), PathMeta{PathKind::custom, x.meta().seed, {}});
}

/// Stack scalar paths into one d-dimensional path.
inline SampledPath stack(std::span<const SampledPath> parts) {
    if (parts.empty()) throw ParameterError("stack needs at least one path");
    const Grid g = parts.front().grid();
    const std::size_t d = parts.size();
    std::vector<double> v(g.points() * d);
    for (std::size_t c = 0; c < d; ++c) {
        require_same_grid(g, parts[c].grid(), "stack");
        if (parts[c].dim() != 1) throw ParameterError("stack expects scalar paths");
        for (std::size_t j = 0; j < g.points(); ++j) v[j * d + c] = parts[c].value(j);
    }
    return SampledPath(g, d, std::move(v), PathMeta{PathKind::custom, parts.front().meta().seed, {}});
}

struct HolderEstimate {
    double alpha_hat = 1.0;
    double fit_r2 = 0.0;
    std::vector<int> scales_used;
    bool degenerate = false;
};

/// Slope of log(max dyadic block increment) against log(block length),
/// over dyadic levels ceil(M/2)..M, clipped to (0, 1].
inline HolderEstimate estimate_holder(const SampledPath& x) {
    const int m = x.level();
    if (m < 8) throw ParameterError("Holder estimation needs M >= 8");
    HolderEstimate est;
    std::vector<double> lx, ly;
    for (int l = (m + 1) / 2; l <= m; ++l) {
        const std::size_t stride = std::size_t{1} << (m - l);
        double mx = 0.0;
        for (std::size_t j = 0; j + stride < x.points(); j += stride)
            mx = std::max(mx, x.sq_increment(j, j + stride));
        est.scales_used.push_back(l);
        if (mx <= 0.0) {
            est.degenerate = true;
            continue;
        }
        lx.push_back(std::log(x.horizon()) - l * std::numbers::ln2);
        ly.push_back(0.5 * std::log(mx));
    }
    if (est.degenerate || lx.size() < 2) {
        est.degenerate = true;
        est.alpha_hat = 1.0;
        est.fit_r2 = 0.0;
        return est;
    }
    const auto fit = stats::linear_fit(lx, ly);
    est.alpha_hat = std::clamp(fit.slope, std::numeric_limits<double>::min(), 1.0);
    est.fit_r2 = fit.r2;
    return est;
}

}  // namespace pqv
