#pragma once

// Exact fractional Gaussian noise on a uniform grid.
//
// Circulant embedding (Davies-Harte) is tried first. If the embedding has a
// negative eigenvalue the Durbin-Levinson recursion is used instead; it is
// the innovations form of the Cholesky factorisation of the Toeplitz
// increment covariance and costs O(n^2).

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include "pqv/errors.hpp"
#include "pqv/rng.hpp"

namespace pqv {

enum class FbmMethod { automatic = 0, circulant = 1, cholesky = 2 };

/// Autocovariance at lag k of fGn increments over steps of length h.
inline double fgn_autocovariance(std::size_t k, double hurst, double h) {
    const double two_h = 2.0 * hurst;
    const double kk = static_cast<double>(k);
    const double c = std::abs(kk + 1.0);
    const double b = std::abs(kk - 1.0);
    return 0.5 * std::pow(h, two_h) *
           (std::pow(c, two_h) - 2.0 * std::pow(kk, two_h) + std::pow(b, two_h));
}

struct FgnSample {
    std::vector<double> increments;
    FbmMethod method = FbmMethod::circulant;
};

namespace detail {

// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place forward DFT of a complex vector.
inline void fft_forward(std::vector<std::complex<double>>& data) {
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

/// Eigenvalues of the minimal circulant embedding of the first n+1 lags.
inline std::vector<double> circulant_eigenvalues(std::size_t n, double hurst, double h) {
    const std::size_t m = 2 * n;
    std::vector<std::complex<double>> row(m);
    for (std::size_t j = 0; j <= n; ++j) row[j] = fgn_autocovariance(j, hurst, h);
    for (std::size_t j = 1; j < n; ++j) row[m - j] = row[j];
    fft_forward(row);
    std::vector<double> lambda(m);
    for (std::size_t k = 0; k < m; ++k) lambda[k] = row[k].real();
    return lambda;
}

inline bool circulant_sample(Rng& rng, std::size_t n, double hurst, double h,
                             std::vector<double>& out) {
    const auto lambda = circulant_eigenvalues(n, hurst, h);
    const std::size_t m = lambda.size();
    double scale = 0.0;
    for (double l : lambda) scale = std::max(scale, std::abs(l));
    for (double l : lambda)
        if (l < -1e-10 * scale) return false;

    std::vector<std::complex<double>> w(m);
    const double norm = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double s = std::sqrt(std::max(lambda[k], 0.0) * norm);
        const double re = rng.normal();
        const double im = rng.normal();
        w[k] = {s * re, s * im};
    }
    fft_forward(w);
    out.resize(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = w[j].real();
    return true;
}

inline void levinson_sample(Rng& rng, std::size_t n, double hurst, double h,
                            std::vector<double>& out) {
    std::vector<double> gamma(n + 1);
    for (std::size_t k = 0; k <= n; ++k) gamma[k] = fgn_autocovariance(k, hurst, h);
    out.assign(n, 0.0);
    if (n == 0) return;

    std::vector<double> phi(n, 0.0), prev(n, 0.0);
    double v = gamma[0];
    out[0] = std::sqrt(v) * rng.normal();
    for (std::size_t t = 1; t < n; ++t) {
        // reflection coefficient for order t
        double acc = gamma[t];
        for (std::size_t j = 1; j < t; ++j) acc -= prev[j] * gamma[t - j];
        const double kappa = acc / v;
        phi[t] = kappa;
        for (std::size_t j = 1; j < t; ++j) phi[j] = prev[j] - kappa * prev[t - j];
        v *= (1.0 - kappa * kappa);
        double mean = 0.0;
        for (std::size_t j = 1; j <= t; ++j) mean += phi[j] * out[t - j];
        out[t] = mean + std::sqrt(std::max(v, 0.0)) * rng.normal();
        std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(t) + 1, prev.begin());
    }
}

}  // namespace detail

/// n fGn increments with Hurst index `hurst` over steps of length h.
inline FgnSample fgn_increments(Rng& rng, std::size_t n, double hurst, double h,
                                FbmMethod method = FbmMethod::automatic) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw ParameterError("Hurst index must lie in (0, 1)");
    if (!(h > 0.0)) throw ParameterError("fGn step must be positive");
    FgnSample s;
    if (method != FbmMethod::cholesky && n > 0 &&
        detail::circulant_sample(rng, n, hurst, h, s.increments)) {
        s.method = FbmMethod::circulant;
        return s;
    }
    detail::levinson_sample(rng, n, hurst, h, s.increments);
    s.method = FbmMethod::cholesky;
    return s;
}

}  // namespace pqv
