#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace pqv::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double fraction_below(std::span<const double> v, double threshold) {
    if (v.empty()) return 0.0;
    const auto n = std::count_if(v.begin(), v.end(), [&](double x) { return x < threshold; });
    return static_cast<double>(n) / static_cast<double>(v.size());
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    bool degenerate = false;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    LinearFit fit;
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) {
        fit.degenerate = true;
        return fit;
    }
    const double mx = mean(x.first(n));
    const double my = mean(y.first(n));
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) {
        fit.degenerate = true;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy <= 0.0) {
        fit.r2 = 1.0;
        fit.degenerate = true;
    } else {
        fit.r2 = (sxy * sxy) / (sxx * syy);
    }
    return fit;
}

}  // namespace pqv::stats
