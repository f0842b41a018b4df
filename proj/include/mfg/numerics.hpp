#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mfg {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Pairwise (cascade) summation. Deterministic for a given element order, so
/// reductions over per-path results do not depend on the worker count.
inline double pairwise_sum(std::span<const double> v) {
    const size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

/// Sample mean and standard error (ddof = 1).
inline MeanSe mean_and_se(std::span<const double> v) {
    const size_t n = v.size();
    if (n == 0) return {};
    const double mean = pairwise_sum(v) / static_cast<double>(n);
    if (n == 1) return {mean, 0.0};
    std::vector<double> sq(n);
    for (size_t i = 0; i < n; ++i) {
        const double d = v[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = a + b x with the slope's standard error from
/// the residual variance.
inline OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
    const size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("ols_fit: need >= 2 points");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate abscissae");
    OlsFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double ss_res = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            ss_res += r * r;
        }
        f.slope_se = std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either sequence is constant (no ordering information).
inline double spearman(std::span<const double> x, std::span<const double> y) {
    const size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("spearman: need >= 2 points");
    auto ranks = [](std::span<const double> v) {
        const size_t m = v.size();
        std::vector<size_t> idx(m);
        for (size_t i = 0; i < m; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(m);
        size_t i = 0;
        while (i < m) {
            size_t j = i;
            while (j + 1 < m && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// 5-point Gauss-Legendre quadrature of f over [a, b].
template <typename F>
double gauss_legendre_5(F&& f, double a, double b) {
    static constexpr double xs[5] = {-0.9061798459386639928, -0.5384693101056830910, 0.0,
                                     0.5384693101056830910, 0.9061798459386639928};
    static constexpr double ws[5] = {0.2369268850561890875, 0.4786286704993664680,
                                     0.5688888888888888889, 0.4786286704993664680,
                                     0.2369268850561890875};
    const double mid = 0.5 * (a + b);
    const double hw = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += ws[i] * f(mid + hw * xs[i]);
    return s * hw;
}

/// Uniform grid 0 = t_0 < ... < t_steps = T.
inline std::vector<double> make_grid(double T, int steps) {
    if (steps < 1) throw std::invalid_argument("make_grid: steps must be >= 1");
    std::vector<double> g(static_cast<size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) g[static_cast<size_t>(k)] = T * static_cast<double>(k) / static_cast<double>(steps);
    g.back() = T;
    return g;
}

}  // namespace mfg
