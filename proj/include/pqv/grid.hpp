#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "pqv/errors.hpp"

namespace pqv {

/// Uniform master grid of 2^level + 1 points on [origin, origin + horizon].
struct Grid {
    int level = 0;
    double horizon = 1.0;
    double origin = 0.0;

    std::size_t intervals() const { return std::size_t{1} << level; }
    std::size_t points() const { return intervals() + 1; }
    double step() const { return std::ldexp(horizon, -level); }

    /// Time of grid index j; exact for j a multiple of a power of two.
    double time(std::size_t j) const {
        return origin + std::ldexp(static_cast<double>(j), -level) * horizon;
    }

    /// Nearest grid index to t, ties resolved to the lower index.
    std::size_t snap(double t) const {
        const double pos = (t - origin) / step();
        double lower = std::floor(pos);
        if (pos - lower > 0.5) lower += 1.0;
        if (lower < 0.0) lower = 0.0;
        const double last = static_cast<double>(intervals());
        if (lower > last) lower = last;
        return static_cast<std::size_t>(lower);
    }

    bool operator==(const Grid& other) const {
        return level == other.level && horizon == other.horizon && origin == other.origin;
    }
};

inline void validate_grid(const Grid& g) {
    if (g.level < 0 || g.level > 30)
        throw ParameterError("grid level must lie in [0, 30], got " + std::to_string(g.level));
    if (!(g.horizon > 0.0) || !std::isfinite(g.horizon))
        throw ParameterError("grid horizon must be positive and finite");
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw ParameterError(std::string("grid mismatch: ") + what);
}

}  // namespace pqv
