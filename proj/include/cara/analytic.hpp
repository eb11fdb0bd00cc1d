#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "cara/errors.hpp"
#include "cara/io.hpp"
#include "cara/market.hpp"
#include "cara/numeric.hpp"
#include "cara/paths.hpp"

namespace cara {

/// Uniform (t, x) grid: n_t + 1 times on [0, T], n_x + 1 nodes on [x_lo, x_hi].
struct Grid2D {
    double T = 1.0;
    std::size_t n_t = 400;
    double x_lo = 0.0;
    double x_hi = 1.0;
    std::size_t n_x = 400;

    Grid2D() = default;
    Grid2D(double T_, std::size_t nt, double lo, double hi, std::size_t nx)
        : T(T_), n_t(nt), x_lo(lo), x_hi(hi), n_x(nx) {
        validate();
    }

    void validate() const {
        if (n_t < 2 || n_x < 2) throw ParamError("grid: need at least 2 intervals in time and space");
        if (!(x_lo < x_hi)) throw ParamError("grid: need x_lo < x_hi");
        if (!(T > 0.0)) throw ParamError("grid: horizon must be positive");
    }

    double dt() const { return T / static_cast<double>(n_t); }
    double dx() const { return (x_hi - x_lo) / static_cast<double>(n_x); }
    double t(std::size_t i) const { return i == n_t ? T : static_cast<double>(i) * dt(); }
    double x(std::size_t j) const { return j == n_x ? x_hi : x_lo + static_cast<double>(j) * dx(); }
    Interval space() const { return {x_lo, x_hi}; }

    bool operator==(const Grid2D&) const = default;

    /// Same domain with both step sizes halved.
    Grid2D refined() const { return Grid2D(T, 2 * n_t, x_lo, x_hi, 2 * n_x); }
};

/// Solved field u(t_i, x_j) with its first spatial derivative.
class PDESolution {
public:
    PDESolution(Grid2D grid, Matrix u, std::string equation) : grid_(grid), u_(std::move(u)), name_(std::move(equation)) {
        ux_ = Matrix(u_.rows(), u_.cols());
        for (std::size_t i = 0; i <= grid_.n_t; ++i) derivative_row(u_.row(i), ux_.row(i), grid_.dx());
        for (double v : u_.values())
            if (!std::isfinite(v)) throw NumericsError(name_ + ": solution has non-finite values");
    }

    const Grid2D& grid() const { return grid_; }
    const Matrix& values() const { return u_; }
    const Matrix& derivative() const { return ux_; }
    const std::string& equation() const { return name_; }

    double at(std::size_t i, std::size_t j) const { return u_(i, j); }
    double derivative_at(std::size_t i, std::size_t j) const { return ux_(i, j); }

    double interpolate(double t, double x) const { return bilinear(u_, t, x); }
    double interpolate_derivative(double t, double x) const { return bilinear(ux_, t, x); }

    /// Centered differences inside, one-sided at the two ends.
    static void derivative_row(std::span<const double> u, std::span<double> out, double dx) {
        const std::size_t n = u.size() - 1;
        out[0] = (u[1] - u[0]) / dx;
        out[n] = (u[n] - u[n - 1]) / dx;
        for (std::size_t j = 1; j < n; ++j) out[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
    }

    void write_csv(std::ostream& out, std::string_view digest = {}) const {
        io::CsvWriter w(out, {"t", "x", "u", "u_x"}, digest);
        for (std::size_t i = 0; i <= grid_.n_t; ++i)
            for (std::size_t j = 0; j <= grid_.n_x; ++j) w.row({grid_.t(i), grid_.x(j), u_(i, j), ux_(i, j)});
    }

private:
    double bilinear(const Matrix& m, double t, double x) const {
        constexpr double slack = 1e-12;
        if (!(t >= -slack && t <= grid_.T + slack) || !(x >= grid_.x_lo - slack * std::max(1.0, std::abs(grid_.x_lo)) &&
                                                        x <= grid_.x_hi + slack * std::max(1.0, std::abs(grid_.x_hi))))
            throw ExtrapolationError(name_ + ": point (t=" + numeric::format_double(t) + ", x=" +
                                     numeric::format_double(x) + ") lies outside the solved grid [" +
                                     numeric::format_double(grid_.x_lo) + ", " + numeric::format_double(grid_.x_hi) +
                                     "]");
        const double ft = std::clamp(t / grid_.dt(), 0.0, static_cast<double>(grid_.n_t));
        const double fx = std::clamp((x - grid_.x_lo) / grid_.dx(), 0.0, static_cast<double>(grid_.n_x));
        const auto i = std::min(static_cast<std::size_t>(ft), grid_.n_t - 1);
        const auto j = std::min(static_cast<std::size_t>(fx), grid_.n_x - 1);
        const double wt = ft - static_cast<double>(i), wx = fx - static_cast<double>(j);
        return (1 - wt) * ((1 - wx) * m(i, j) + wx * m(i, j + 1)) + wt * ((1 - wx) * m(i + 1, j) + wx * m(i + 1, j + 1));
    }

    Grid2D grid_;
    Matrix u_;
    Matrix ux_;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Backward parabolic solver
// ---------------------------------------------------------------------------

/// u_t + D u_xx + C u_x - R u + F(u_x) = 0 on a Grid2D, u(T, .) given.
/// Callbacks take node indices (i, j); F also receives the current u_x.
struct BackwardProblem {
    std::function<double(std::size_t, std::size_t)> diffusion;
    std::function<double(std::size_t, std::size_t)> drift;
    std::function<double(std::size_t, std::size_t)> reaction;
    std::function<double(std::size_t, std::size_t, double)> source;
    bool source_depends_on_gradient = false;
    std::vector<double> terminal;
    std::string name;
};

struct SolverSettings {
    double theta = 0.5;  ///< 1 = fully implicit, 0.5 = Crank-Nicolson
    double fixed_point_tol = 1e-10;
    int max_iterations = 50;
};

namespace detail {

struct Stencil {
    double lower = 0.0, diag = 0.0, upper = 0.0;
};

/// Spatial operator row at node j. Interior drift is centered when that keeps
/// the off-diagonals nonnegative and upwinded otherwise. The two boundary rows
/// drop the second derivative (linear extrapolation) and take the drift
/// one-sided toward the interior.
inline Stencil operator_row(std::size_t j, std::size_t n, double D, double C, double R, double dx) {
    Stencil s;
    if (j == 0) {
        s.diag = -C / dx - R;
        s.upper = C / dx;
        return s;
    }
    if (j == n) {
        s.lower = -C / dx;
        s.diag = C / dx - R;
        return s;
    }
    const double d = D / (dx * dx);
    s.lower = d;
    s.diag = -2.0 * d - R;
    s.upper = d;
    if (std::abs(C) * dx <= 2.0 * D) {
        s.lower -= C / (2.0 * dx);
        s.upper += C / (2.0 * dx);
    } else if (C > 0) {
        s.diag -= C / dx;
        s.upper += C / dx;
    } else {
        s.lower -= C / dx;
        s.diag += C / dx;
    }
    return s;
}

}  // namespace detail

inline PDESolution solve_backward(const Grid2D& grid, const BackwardProblem& pb, const SolverSettings& cfg = {}) {
    grid.validate();
    const std::size_t nx = grid.n_x, nt = grid.n_t;
    if (pb.terminal.size() != nx + 1) throw ParamError(pb.name + ": terminal condition size mismatch");
    const double dt = grid.dt(), dx = grid.dx(), th = cfg.theta;
    const auto zero2 = [](std::size_t, std::size_t) { return 0.0; };
    const auto& D = pb.diffusion ? pb.diffusion : std::function<double(std::size_t, std::size_t)>(zero2);
    const auto& C = pb.drift ? pb.drift : std::function<double(std::size_t, std::size_t)>(zero2);
    const auto& R = pb.reaction ? pb.reaction : std::function<double(std::size_t, std::size_t)>(zero2);

    Matrix u(nt + 1, nx + 1);
    for (std::size_t j = 0; j <= nx; ++j) u(nt, j) = pb.terminal[j];

    std::vector<detail::Stencil> st_next(nx + 1), st_now(nx + 1);
    std::vector<double> ux(nx + 1), F_next(nx + 1), F_now(nx + 1), explicit_part(nx + 1);
    std::vector<double> lower(nx + 1), diag(nx + 1), upper(nx + 1), rhs(nx + 1);

    auto stencils = [&](std::size_t i, std::vector<detail::Stencil>& out) {
        for (std::size_t j = 0; j <= nx; ++j) out[j] = detail::operator_row(j, nx, D(i, j), C(i, j), R(i, j), dx);
    };
    auto sources = [&](std::size_t i, std::span<const double> row, std::vector<double>& out) {
        if (!pb.source) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        if (pb.source_depends_on_gradient) PDESolution::derivative_row(row, ux, dx);
        for (std::size_t j = 0; j <= nx; ++j) out[j] = pb.source(i, j, pb.source_depends_on_gradient ? ux[j] : 0.0);
    };

    stencils(nt, st_next);
    sources(nt, u.row(nt), F_next);
    for (std::size_t i = nt; i-- > 0;) {
        stencils(i, st_now);
        const auto un = u.row(i + 1);
        for (std::size_t j = 0; j <= nx; ++j) {
            const auto& s = st_next[j];
            double Lu = s.diag * un[j];
            if (j > 0) Lu += s.lower * un[j - 1];
            if (j < nx) Lu += s.upper * un[j + 1];
            explicit_part[j] = un[j] + (1.0 - th) * dt * (Lu + F_next[j]);
        }
        for (std::size_t j = 0; j <= nx; ++j) {
            lower[j] = -th * dt * st_now[j].lower;
            diag[j] = 1.0 - th * dt * st_now[j].diag;
            upper[j] = -th * dt * st_now[j].upper;
        }
        // Start the fixed point from the later slice.
        std::vector<double> guess(un.begin(), un.end());
        int it = 0;
        for (;; ++it) {
            sources(i, guess, F_now);
            for (std::size_t j = 0; j <= nx; ++j) rhs[j] = explicit_part[j] + th * dt * F_now[j];
            auto next = numeric::solve_tridiagonal(lower, diag, upper, rhs);
            double change = 0.0, scale = 1.0;
            for (std::size_t j = 0; j <= nx; ++j) {
                change = std::max(change, std::abs(next[j] - guess[j]));
                scale = std::max(scale, std::abs(next[j]));
            }
            guess = std::move(next);
            if (!pb.source_depends_on_gradient || change <= cfg.fixed_point_tol * scale) break;
            if (it + 1 >= cfg.max_iterations)
                throw ConvergenceError(pb.name + ": fixed-point iteration did not converge at t=" +
                                       numeric::format_double(grid.t(i)));
        }
        for (std::size_t j = 0; j <= nx; ++j) {
            if (!std::isfinite(guess[j]))
                throw NumericsError(pb.name + ": non-finite value at t=" + numeric::format_double(grid.t(i)));
            u(i, j) = guess[j];
        }
        std::swap(st_next, st_now);
        sources(i, u.row(i), F_next);
    }
    return PDESolution(grid, std::move(u), pb.name);
}

// ---------------------------------------------------------------------------
// Incomplete market
// ---------------------------------------------------------------------------

namespace detail {
inline void require_domain(const IncompleteMarketModel& model, const Grid2D& grid) {
    if (!model.domain().contains(grid.space()))
        throw DomainError("PDE grid leaves the model's declared factor domain");
    if (std::abs(grid.T - model.horizon()) > 1e-12) throw ParamError("PDE grid horizon differs from the model's");
}

/// Node tables of a, b - rho lambda a, lambda.
struct FactorTables {
    Matrix a, drift, lambda;
    FactorTables(const IncompleteMarketModel& m, const Grid2D& g)
        : a(g.n_t + 1, g.n_x + 1), drift(g.n_t + 1, g.n_x + 1), lambda(g.n_t + 1, g.n_x + 1) {
        for (std::size_t i = 0; i <= g.n_t; ++i) {
            const double t = g.t(i);
            for (std::size_t j = 0; j <= g.n_x; ++j) {
                const double y = g.x(j);
                const double av = m.a(t, y), lv = m.lambda(t, y);
                a(i, j) = av;
                lambda(i, j) = lv;
                drift(i, j) = m.b(t, y) - m.rho() * lv * av;
            }
        }
    }
};
}  // namespace detail

/// f_t + 1/2 a^2 f_yy + (b - rho lambda a) f_y + 1/2 (1-rho^2) a^2 f_y^2 = 1/2 lambda^2, f(T) = 0.
inline PDESolution solve_f(const IncompleteMarketModel& model, const Grid2D& grid, const SolverSettings& cfg = {}) {
    grid.validate();
    detail::require_domain(model, grid);
    auto tab = std::make_shared<detail::FactorTables>(model, grid);
    const double k = 0.5 * (1.0 - model.rho() * model.rho());
    BackwardProblem pb;
    pb.name = "f";
    pb.diffusion = [tab](std::size_t i, std::size_t j) { return 0.5 * tab->a(i, j) * tab->a(i, j); };
    pb.drift = [tab](std::size_t i, std::size_t j) { return tab->drift(i, j); };
    pb.source = [tab, k](std::size_t i, std::size_t j, double fy) {
        const double a = tab->a(i, j), l = tab->lambda(i, j);
        return k * a * a * fy * fy - 0.5 * l * l;
    };
    pb.source_depends_on_gradient = true;
    pb.terminal.assign(grid.n_x + 1, 0.0);
    return solve_backward(grid, pb, cfg);
}

/// zeta_t + 1/2 a^2 zeta_yy + (b - rho lambda a) zeta_y = 1/2 (1-rho^2) lambda^2 zeta, zeta(T) = 1.
inline PDESolution solve_zeta(const IncompleteMarketModel& model, const Grid2D& grid, const SolverSettings& cfg = {}) {
    grid.validate();
    detail::require_domain(model, grid);
    auto tab = std::make_shared<detail::FactorTables>(model, grid);
    const double k = 0.5 * (1.0 - model.rho() * model.rho());
    BackwardProblem pb;
    pb.name = "zeta";
    pb.diffusion = [tab](std::size_t i, std::size_t j) { return 0.5 * tab->a(i, j) * tab->a(i, j); };
    pb.drift = [tab](std::size_t i, std::size_t j) { return tab->drift(i, j); };
    pb.reaction = [tab, k](std::size_t i, std::size_t j) { return k * tab->lambda(i, j) * tab->lambda(i, j); };
    pb.terminal.assign(grid.n_x + 1, 1.0);
    return solve_backward(grid, pb, cfg);
}

/// Closed-form f = p(t) y + q(t) for the solvable family.
class RiccatiSolution {
public:
    explicit RiccatiSolution(const SolvableExampleParams& params) : params_(params) {
        if (!(params.discriminant() > 0.0)) throw ParamError("riccati: discriminant must be positive");
        if (!(params.beta > 0.0)) throw ParamError("riccati: beta must be positive");
        if (!(params.rho > -1.0 && params.rho < 1.0)) throw ParamError("riccati: rho must lie in (-1, 1)");
        delta_ = params.discriminant();
        root_ = std::sqrt(delta_);
        const double k = 1.0 + params.rho * params.mu * params.beta;
        if (k + root_ == 0.0) throw ParamError("riccati: 1 + rho mu beta + sqrt(Delta) vanishes");
        scale_ = (k - root_) / ((1.0 - params.rho * params.rho) * params.beta * params.beta);
        ratio_ = (k - root_) / (k + root_);
    }

    const SolvableExampleParams& params() const { return params_; }
    double discriminant() const { return delta_; }

    double p(double t) const {
        const double e = std::exp(-root_ * (params_.horizon - t));
        return scale_ * (1.0 - e) / (1.0 - ratio_ * e);
    }
    /// q(t) = m int_t^T p(s) ds by adaptive quadrature.
    double q(double t) const {
        if (t >= params_.horizon) return 0.0;
        return params_.m * numeric::integrate([this](double s) { return p(s); }, t, params_.horizon, 1e-10);
    }
    double f(double t, double y) const { return p(t) * y + q(t); }

    /// Residual of p' = 1/2 (mu + rho beta p)^2 + p - 1/2 beta^2 p^2 with p'
    /// from central differences of the closed form.
    double ode_residual(double t, double step = 1e-5) const {
        const double dp = (p(t + step) - p(t - step)) / (2.0 * step);
        const double pv = p(t);
        const auto& c = params_;
        return dp - 0.5 * (c.mu + c.rho * c.beta * pv) * (c.mu + c.rho * c.beta * pv) - pv +
               0.5 * c.beta * c.beta * pv * pv;
    }

    /// Table of (t, p, q) at `samples` evenly spaced times on [0, T].
    void write_csv(std::ostream& out, std::size_t samples, std::string_view digest = {}) const {
        if (samples < 2) throw ParamError("riccati table needs at least 2 samples");
        io::CsvWriter w(out, {"t", "p", "q"}, digest);
        for (double t : numeric::linspace(0.0, params_.horizon, samples)) w.row({t, p(t), q(t)});
    }

private:
    SolvableExampleParams params_;
    double delta_ = 0.0, root_ = 0.0, scale_ = 0.0, ratio_ = 0.0;
};

inline RiccatiSolution solve_riccati(const SolvableExampleParams& params) { return RiccatiSolution(params); }

namespace detail {
inline void require_path_shape(const PathBundle& b, const Matrix& path, const char* what) {
    if (path.rows() != b.n_paths() || path.cols() != b.n_steps() + 1)
        throw ParamError(std::string(what) + ": path shape does not match the bundle");
}
}  // namespace detail

/// xi = (1 - rho^2) a(t, Y) f_y(t, Y) at every grid time of every path.
inline Matrix xi_incomplete(const IncompleteMarketModel& model, const PDESolution& f, const PathBundle& bundle) {
    if (!bundle.has_factor) throw ParamError("xi_incomplete: bundle has no factor path");
    const double k = 1.0 - model.rho() * model.rho();
    Matrix xi(bundle.n_paths(), bundle.n_steps() + 1);
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
        for (std::size_t s = 0; s <= bundle.n_steps(); ++s) {
            const double t = bundle.grid().time(s), y = bundle.Y(p, s);
            xi(p, s) = k * model.a(t, y) * f.interpolate_derivative(t, y);
        }
    return xi;
}

struct MinimalEntropy {
    Matrix chi;                     ///< chi(t, Y_t), n_steps + 1 columns
    std::vector<double> log_density;  ///< log dQ^ME/dP per path
};

/// chi = -sqrt(1 - rho^2) a f_y and the left-point log-density
/// -1/2 sum (lambda^2 + chi^2) h - sum lambda dW - sum chi dW_perp.
inline MinimalEntropy me_chi(const IncompleteMarketModel& model, const PDESolution& f, const PathBundle& bundle) {
    if (!bundle.has_factor) throw ParamError("me_chi: bundle has no factor path");
    const double k = std::sqrt(1.0 - model.rho() * model.rho());
    const double h = bundle.grid().h();
    MinimalEntropy out{Matrix(bundle.n_paths(), bundle.n_steps() + 1), std::vector<double>(bundle.n_paths())};
    for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
        double acc = 0.0;
        for (std::size_t s = 0; s <= bundle.n_steps(); ++s) {
            const double t = bundle.grid().time(s), y = bundle.Y(p, s);
            const double chi = -k * model.a(t, y) * f.interpolate_derivative(t, y);
            out.chi(p, s) = chi;
            if (s < bundle.n_steps()) {
                const double l = bundle.lambda(p, s);
                acc += -0.5 * (l * l + chi * chi) * h - l * bundle.dW(p, s) - chi * bundle.dW_perp(p, s);
            }
        }
        out.log_density[p] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Complete market
// ---------------------------------------------------------------------------

namespace detail {
inline void require_domain(const CompleteMarketModel& model, const Grid2D& grid) {
    if (!(grid.x_lo >= 0.0) || !model.domain().contains(grid.space()))
        throw DomainError("PDE grid leaves the model's declared price domain");
    if (std::abs(grid.T - model.horizon()) > 1e-12) throw ParamError("PDE grid horizon differs from the model's");
}
}  // namespace detail

/// delta_t + 1/2 sigma^2 S^2 delta_SS = 0, delta(T, S) = payoff(S).
inline PDESolution solve_delta_price(const CompleteMarketModel& model, const TerminalPayoff& payoff,
                                     const Grid2D& grid, const SolverSettings& cfg = {}) {
    grid.validate();
    detail::require_domain(model, grid);
    if (!(payoff.lower_bound > 0.0)) throw ParamError("risk tolerance payoff needs a positive lower bound");
    BackwardProblem pb;
    pb.name = "delta";
    pb.terminal.resize(grid.n_x + 1);
    for (std::size_t j = 0; j <= grid.n_x; ++j) {
        const double v = payoff(grid.x(j));
        if (!(v >= payoff.lower_bound))
            throw ParamError("risk tolerance payoff falls below its lower bound at S=" + numeric::format_double(grid.x(j)));
        pb.terminal[j] = v;
    }
    auto diff = std::make_shared<Matrix>(grid.n_t + 1, grid.n_x + 1);
    for (std::size_t i = 0; i <= grid.n_t; ++i)
        for (std::size_t j = 0; j <= grid.n_x; ++j) {
            const double s = grid.x(j), sig = model.sigma(grid.t(i), s);
            (*diff)(i, j) = 0.5 * sig * sig * s * s;
        }
    pb.diffusion = [diff](std::size_t i, std::size_t j) { return (*diff)(i, j); };
    return solve_backward(grid, pb, cfg);
}

/// H_t + 1/2 sigma^2 S^2 H_SS + sigma^2 S^2 (delta_S/delta) H_S
///     + 1/2 (lambda - sigma S delta_S/delta)^2 = 0, H(T, S) = 0.
inline PDESolution solve_H(const CompleteMarketModel& model, const PDESolution& delta, const Grid2D& grid,
                           const SolverSettings& cfg = {}) {
    if (!(grid == delta.grid())) throw ParamError("solve_H: grid must equal the risk tolerance solution's grid");
    detail::require_domain(model, grid);
    const std::size_t nt = grid.n_t, nx = grid.n_x;
    auto diff = std::make_shared<Matrix>(nt + 1, nx + 1);
    auto drift = std::make_shared<Matrix>(nt + 1, nx + 1);
    auto src = std::make_shared<Matrix>(nt + 1, nx + 1);
    for (std::size_t i = 0; i <= nt; ++i)
        for (std::size_t j = 0; j <= nx; ++j) {
            const double t = grid.t(i), s = grid.x(j);
            const double d = delta.at(i, j);
            if (!(d > 0.0)) throw DomainError("solve_H: risk tolerance price is not positive on the grid");
            const double sig = model.sigma(t, s);
            const double xi = delta.derivative_at(i, j) / d * s * sig;
            const double gap = model.lambda(t, s) - xi;
            (*diff)(i, j) = 0.5 * sig * sig * s * s;
            (*drift)(i, j) = sig * s * xi;
            (*src)(i, j) = 0.5 * gap * gap;
        }
    BackwardProblem pb;
    pb.name = "H";
    pb.diffusion = [diff](std::size_t i, std::size_t j) { return (*diff)(i, j); };
    pb.drift = [drift](std::size_t i, std::size_t j) { return (*drift)(i, j); };
    pb.source = [src](std::size_t i, std::size_t j, double) { return (*src)(i, j); };
    pb.terminal.assign(nx + 1, 0.0);
    return solve_backward(grid, pb, cfg);
}

struct ComplementPaths {
    Matrix delta;  ///< delta(t, S_t)
    Matrix xi;     ///< delta_S / delta * S sigma
    Matrix H;      ///< H(t, S_t)
    Matrix eta;    ///< H_S S sigma
};

/// Evaluates delta, xi, H and eta along every path at every grid time.
inline ComplementPaths xi_eta_complete(const PDESolution& delta, const PDESolution& H, const CompleteMarketModel& model,
                                       const PathBundle& bundle) {
    const std::size_t n = bundle.n_paths(), m = bundle.n_steps() + 1;
    ComplementPaths out{Matrix(n, m), Matrix(n, m), Matrix(n, m), Matrix(n, m)};
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t s = 0; s < m; ++s) {
            const double t = bundle.grid().time(s), S = bundle.S(p, s);
            const double sig = model.sigma(t, S);
            const double d = delta.interpolate(t, S);
            out.delta(p, s) = d;
            out.xi(p, s) = delta.interpolate_derivative(t, S) / d * S * sig;
            out.H(p, s) = H.interpolate(t, S);
            out.eta(p, s) = H.interpolate_derivative(t, S) * S * sig;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Default spatial domain
// ---------------------------------------------------------------------------

/// [q_0.001, q_0.999] of the pooled state samples padded by 20% of its width,
/// widened to cover every sample.
inline Interval default_domain(const Matrix& states, Interval admissible = {}) {
    std::vector<double> v(states.values().begin(), states.values().end());
    if (v.empty()) throw ParamError("default_domain: no samples");
    const double lo = numeric::quantile(v, 0.001), hi = numeric::quantile(v, 0.999);
    const double pad = 0.2 * std::max(hi - lo, 1e-8 * std::max(1.0, std::abs(hi)));
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double tiny = 1e-6 * std::max(1.0, *mx - *mn);
    Interval d{std::min(lo - pad, *mn - tiny), std::max(hi + pad, *mx + tiny)};
    d.lo = std::max(d.lo, admissible.lo);
    d.hi = std::min(d.hi, admissible.hi);
    return d;
}

}  // namespace cara
