#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cara/errors.hpp"

namespace cara {

/// Dense row-major matrix. Rows are paths, columns are time steps throughout
/// the library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }
    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace numeric {

/// Pairwise (cascade) summation of term(0..n-1). The split points depend only
/// on n, so the result is independent of how callers schedule the work.
template <class Term>
double pairwise_sum(std::size_t begin, std::size_t end, const Term& term) {
    constexpr std::size_t kLeaf = 32;
    if (end - begin <= kLeaf) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += term(i);
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
}

inline double pairwise_sum(std::span<const double> v) {
    return pairwise_sum(0, v.size(), [&](std::size_t i) { return v[i]; });
}

struct MeanSe {
    double mean = 0.0;
    double sd = 0.0;
    double se = 0.0;
    std::size_t n = 0;

    double z_against(double reference) const {
        const double gap = mean - reference;
        if (gap == 0.0) return 0.0;
        return se > 0.0 ? gap / se : (gap > 0 ? INFINITY : -INFINITY);
    }
};

/// Sample mean, standard deviation and standard error. Values are shifted by
/// the first sample, so constant samples give their value back exactly with
/// zero spread.
inline MeanSe mean_se(std::span<const double> v) {
    MeanSe out;
    out.n = v.size();
    if (v.empty()) return out;
    const double ref = v[0];
    const auto n = static_cast<double>(v.size());
    const double s1 = pairwise_sum(0, v.size(), [&](std::size_t i) { return v[i] - ref; });
    const double s2 = pairwise_sum(0, v.size(), [&](std::size_t i) {
        const double d = v[i] - ref;
        return d * d;
    });
    out.mean = ref + s1 / n;
    if (v.size() > 1) {
        const double var = std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0));
        out.sd = std::sqrt(var);
        out.se = out.sd / std::sqrt(n);
    }
    return out;
}

/// Mean of a - b with paired samples (common random numbers).
inline MeanSe paired_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ParamError("paired_difference: size mismatch");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return mean_se(d);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ParamError("least_squares: need >= 2 paired points");
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ParamError("least_squares: degenerate abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

/// Slope of log(y) against log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw NumericsError("log_log_slope: non-positive value");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return least_squares(lx, ly).slope;
}

/// Thomas algorithm. lower[0] and upper[n-1] are ignored. Inputs are taken by
/// value and used as scratch.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                             std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0) throw NumericsError("tridiagonal solve: zero pivot");
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0) throw NumericsError("tridiagonal solve: zero pivot");
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    return rhs;
}

/// Linear-interpolated empirical quantile, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ParamError("quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

/// Adaptive Gauss-Kronrod quadrature with an absolute error target.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        f, a, b, 15, 1e-13, &err);
    if (!(err <= abs_tol)) {
        throw ConvergenceError("adaptive quadrature missed its tolerance (estimate " + std::to_string(err) + ")");
    }
    return value;
}

/// Shortest decimal string that round-trips to the same IEEE-754 double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// n points evenly spaced on [lo, hi], endpoints included.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    out.back() = hi;
    return out;
}

}  // namespace numeric
}  // namespace cara
