#pragma once

// Scalar test functions with their first two derivatives.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pqv/errors.hpp"

namespace pqv {

struct FunctionTriple {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> f1;
    std::function<double(double)> f2;
};

/// sqrt((x - a)^2 + eps^2), a C^2 stand-in for |x - a|.
inline FunctionTriple smoothed_abs(double a = 0.0, double eps = 0.05) {
    if (!(eps > 0.0)) throw ParameterError("smoothed_abs needs eps > 0");
    return {"smoothed_abs",
            [=](double x) { return std::hypot(x - a, eps); },
            [=](double x) { return (x - a) / std::hypot(x - a, eps); },
            [=](double x) {
                const double r = std::hypot(x - a, eps);
                return eps * eps / (r * r * r);
            }};
}

inline std::vector<std::string> catalogue_names() { return {"x", "x2", "x3", "sin", "exp", "smoothed_abs"}; }

inline FunctionTriple catalogue(const std::string& name) {
    if (name == "x") return {"x", [](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
    if (name == "x2")
        return {"x2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double) { return 2.0; }};
    if (name == "x3")
        return {"x3", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; },
                [](double x) { return 6.0 * x; }};
    if (name == "sin")
        return {"sin", [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
                [](double x) { return -std::sin(x); }};
    if (name == "exp")
        return {"exp", [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); },
                [](double x) { return std::exp(x); }};
    if (name == "smoothed_abs") return smoothed_abs();
    throw ParameterError("unknown function '" + name + "'");
}

/// Piecewise-linear interpolation of samples on a uniform grid; constant
/// extension outside it.
class UniformTable {
public:
    UniformTable(double lo, double step, std::vector<double> values)
        : lo_(lo), step_(step), v_(std::move(values)) {
        if (v_.size() < 2 || !(step_ > 0.0)) throw ParameterError("a table needs >= 2 values and a positive step");
    }
    double operator()(double x) const {
        const double pos = (x - lo_) / step_;
        if (pos <= 0.0) return v_.front();
        const double last = static_cast<double>(v_.size() - 1);
        if (pos >= last) return v_.back();
        const auto k = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * v_[k] + w * v_[k + 1];
    }

private:
    double lo_, step_;
    std::vector<double> v_;
};

/// Function given by tabulated f, f' and f'' on the same uniform grid.
inline FunctionTriple tabulated(std::string name, double lo, double step, std::vector<double> f,
                                std::vector<double> f1, std::vector<double> f2) {
    if (f.size() != f1.size() || f.size() != f2.size()) throw ParameterError("tables must have equal length");
    return {std::move(name), UniformTable(lo, step, std::move(f)), UniformTable(lo, step, std::move(f1)),
            UniformTable(lo, step, std::move(f2))};
}

struct DerivativeCheck {
    double max_err_f1 = 0.0;  ///< max |fd - f1| / max(1, |f1|)
    double max_err_f2 = 0.0;  ///< max |fd - f2| / max(1, |f2|)
    bool passed = true;
};

/// Central differences of f (for f1) and of f1 (for f2) at `points` nodes of [lo, hi].
inline DerivativeCheck check_derivatives(const FunctionTriple& fn, double lo = -3.0, double hi = 3.0,
                                         std::size_t points = 601, double h = 1e-5, double tol = 1e-6) {
    DerivativeCheck c;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        const double d1 = (fn.f(x + h) - fn.f(x - h)) / (2 * h);
        const double d2 = (fn.f1(x + h) - fn.f1(x - h)) / (2 * h);
        const double e1 = fn.f1(x), e2 = fn.f2(x);
        c.max_err_f1 = std::max(c.max_err_f1, std::abs(d1 - e1) / std::max(1.0, std::abs(e1)));
        c.max_err_f2 = std::max(c.max_err_f2, std::abs(d2 - e2) / std::max(1.0, std::abs(e2)));
    }
    c.passed = c.max_err_f1 <= tol && c.max_err_f2 <= tol;
    return c;
}

}  // namespace pqv
