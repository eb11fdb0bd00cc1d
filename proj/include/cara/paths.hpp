#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cara/errors.hpp"
#include "cara/io.hpp"
#include "cara/market.hpp"
#include "cara/numeric.hpp"
#include "cara/parallel.hpp"
#include "cara/rng.hpp"

namespace cara {

struct TimeGrid {
    double t0 = 0.0;
    double T = 1.0;
    std::size_t n_steps = 100;

    TimeGrid() = default;
    TimeGrid(double t0_, double T_, std::size_t n) : t0(t0_), T(T_), n_steps(n) {
        if (n_steps == 0 || !(T > t0)) throw ParamError("time grid: need T > t0 and at least one step");
    }

    double h() const { return (T - t0) / static_cast<double>(n_steps); }
    double time(std::size_t k) const {
        return k == n_steps ? T : t0 + static_cast<double>(k) * h();
    }
    std::vector<double> points() const {
        std::vector<double> out(n_steps + 1);
        for (std::size_t k = 0; k <= n_steps; ++k) out[k] = time(k);
        return out;
    }
};

/// Independent N(0, h) increments for the traded noise W and the orthogonal
/// noise W_perp. Path p uses its own stream keyed by (seed, first_path + p).
struct BrownianIncrements {
    TimeGrid grid;
    std::uint64_t seed = 0;
    std::uint64_t first_path = 0;
    Matrix dW;
    Matrix dW_perp;

    std::size_t n_paths() const { return dW.rows(); }

    static BrownianIncrements draw(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                   std::uint64_t first_path = 0, unsigned threads = 1) {
        if (n_paths == 0) throw ParamError("brownian increments: need at least one path");
        BrownianIncrements inc{grid, seed, first_path, Matrix(n_paths, grid.n_steps), Matrix(n_paths, grid.n_steps)};
        const double sqrt_h = std::sqrt(grid.h());
        parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                auto g = rng::stream(seed, first_path + p, /*domain=*/1);
                rng::StandardNormal normal;
                for (std::size_t k = 0; k < grid.n_steps; ++k) {
                    inc.dW(p, k) = sqrt_h * normal(g);
                    inc.dW_perp(p, k) = sqrt_h * normal(g);
                }
            }
        });
        return inc;
    }

    /// Sums blocks of `factor` consecutive increments: the same Brownian path
    /// sampled on a grid with factor-times larger steps.
    BrownianIncrements coarsen(std::size_t factor) const {
        if (factor == 0 || grid.n_steps % factor != 0)
            throw ParamError("coarsen: factor must divide the number of steps");
        const std::size_t n = grid.n_steps / factor;
        BrownianIncrements out{TimeGrid(grid.t0, grid.T, n), seed, first_path, Matrix(n_paths(), n),
                               Matrix(n_paths(), n)};
        for (std::size_t p = 0; p < n_paths(); ++p) {
            for (std::size_t k = 0; k < n; ++k) {
                double a = 0.0, b = 0.0;
                for (std::size_t j = 0; j < factor; ++j) {
                    a += dW(p, k * factor + j);
                    b += dW_perp(p, k * factor + j);
                }
                out.dW(p, k) = a;
                out.dW_perp(p, k) = b;
            }
        }
        return out;
    }
};

/// Simulated market. State matrices (Y, S) have n_steps + 1 columns;
/// coefficient matrices (lambda, sigma, mu) hold left-point values and have
/// n_steps columns. Y is empty for complete-market bundles.
struct PathBundle {
    BrownianIncrements noise;
    double rho = 0.0;
    bool has_factor = false;
    Matrix Y;
    Matrix S;
    Matrix lambda;
    Matrix sigma;
    Matrix mu;

    const TimeGrid& grid() const { return noise.grid; }
    std::size_t n_paths() const { return S.rows(); }
    std::size_t n_steps() const { return noise.grid.n_steps; }
    double dW(std::size_t p, std::size_t k) const { return noise.dW(p, k); }
    double dW_perp(std::size_t p, std::size_t k) const { return noise.dW_perp(p, k); }
    double dW_Y(std::size_t p, std::size_t k) const {
        return rho * noise.dW(p, k) + std::sqrt(1.0 - rho * rho) * noise.dW_perp(p, k);
    }

    /// Per-path terminal value of the left-point sum of lambda h.
    std::vector<double> int_lambda_ds() const {
        std::vector<double> out(n_paths());
        const double h = grid().h();
        for (std::size_t p = 0; p < n_paths(); ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < n_steps(); ++k) s += lambda(p, k) * h;
            out[p] = s;
        }
        return out;
    }
    /// Per-path terminal value of the left-point sum of lambda dW.
    std::vector<double> int_lambda_dW() const {
        std::vector<double> out(n_paths());
        for (std::size_t p = 0; p < n_paths(); ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < n_steps(); ++k) s += lambda(p, k) * dW(p, k);
            out[p] = s;
        }
        return out;
    }
};

struct SimulationOptions {
    std::uint64_t first_path = 0;
    unsigned threads = 1;
};

namespace detail {
inline void require_finite(double v, const char* what, std::size_t p, std::size_t k) {
    if (!std::isfinite(v))
        throw NumericsError(std::string("simulate: ") + what + " became non-finite on path " + std::to_string(p) +
                            " at step " + std::to_string(k));
}
}  // namespace detail

/// Euler-Maruyama for (Y, S) under P on given noise. Y is clamped at the
/// model's state floor when one is declared.
inline PathBundle simulate(const IncompleteMarketModel& model, BrownianIncrements noise, unsigned threads = 1) {
    const std::size_t n = noise.n_paths(), m = noise.grid.n_steps;
    if (std::abs(noise.grid.T - model.horizon()) > 1e-12 || noise.grid.t0 != 0.0)
        throw ParamError("simulate: time grid must span [0, T] of the model");
    PathBundle b;
    b.rho = model.rho();
    b.has_factor = true;
    b.Y = Matrix(n, m + 1);
    b.S = Matrix(n, m + 1);
    b.lambda = Matrix(n, m);
    b.sigma = Matrix(n, m);
    b.mu = Matrix(n, m);
    b.noise = std::move(noise);
    const double h = b.grid().h();
    const double rho = model.rho(), rho_perp = std::sqrt(1.0 - rho * rho);
    const auto floor = model.state_floor();
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double y = model.y0(), s = model.s0();
            if (floor) y = std::max(y, *floor);
            b.Y(p, 0) = y;
            b.S(p, 0) = s;
            for (std::size_t k = 0; k < m; ++k) {
                const double t = b.grid().time(k);
                const double mu = model.mu(t, y), sig = model.sigma(t, y);
                b.mu(p, k) = mu;
                b.sigma(p, k) = sig;
                b.lambda(p, k) = model.lambda(t, y);
                const double dw = b.noise.dW(p, k);
                const double dwy = rho * dw + rho_perp * b.noise.dW_perp(p, k);
                const double y_next = y + model.b(t, y) * h + model.a(t, y) * dwy;
                s = s + mu * s * h + sig * s * dw;
                y = floor ? std::max(y_next, *floor) : y_next;
                detail::require_finite(y, "Y", p, k);
                detail::require_finite(s, "S", p, k);
                b.Y(p, k + 1) = y;
                b.S(p, k + 1) = s;
            }
        }
    });
    return b;
}

inline PathBundle simulate(const IncompleteMarketModel& model, const TimeGrid& grid, std::size_t n_paths,
                           std::uint64_t seed, SimulationOptions opt = {}) {
    return simulate(model, BrownianIncrements::draw(grid, n_paths, seed, opt.first_path, opt.threads), opt.threads);
}

/// Euler-Maruyama for S with drift rate `drift(t, S)`:
/// dS = drift S dt + sigma S dW. Used directly for simulation under P
/// (drift = mu) and under equivalent measures (drift = 0 for Q).
inline PathBundle simulate_under(const CompleteMarketModel& model, BrownianIncrements noise, const Coefficient& drift,
                                 unsigned threads = 1) {
    const std::size_t n = noise.n_paths(), m = noise.grid.n_steps;
    if (std::abs(noise.grid.T - model.horizon()) > 1e-12 || noise.grid.t0 != 0.0)
        throw ParamError("simulate: time grid must span [0, T] of the model");
    PathBundle b;
    b.has_factor = false;
    b.S = Matrix(n, m + 1);
    b.lambda = Matrix(n, m);
    b.sigma = Matrix(n, m);
    b.mu = Matrix(n, m);
    b.noise = std::move(noise);
    const double h = b.grid().h();
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double s = model.s0();
            b.S(p, 0) = s;
            for (std::size_t k = 0; k < m; ++k) {
                const double t = b.grid().time(k);
                const double sig = model.sigma(t, s);
                b.mu(p, k) = model.mu(t, s);
                b.sigma(p, k) = sig;
                b.lambda(p, k) = model.lambda(t, s);
                s = s + drift(t, s) * s * h + sig * s * b.noise.dW(p, k);
                detail::require_finite(s, "S", p, k);
                b.S(p, k + 1) = s;
            }
        }
    });
    return b;
}

inline PathBundle simulate(const CompleteMarketModel& model, BrownianIncrements noise, unsigned threads = 1) {
    return simulate_under(model, std::move(noise), [&model](double t, double s) { return model.mu(t, s); }, threads);
}

inline PathBundle simulate(const CompleteMarketModel& model, const TimeGrid& grid, std::size_t n_paths,
                           std::uint64_t seed, SimulationOptions opt = {}) {
    return simulate(model, BrownianIncrements::draw(grid, n_paths, seed, opt.first_path, opt.threads), opt.threads);
}

// ---------------------------------------------------------------------------
// Measure changes
// ---------------------------------------------------------------------------

enum class Measure { MinimalMartingale, RiskNeutral, Tilde };

inline const char* measure_name(Measure m) {
    switch (m) {
        case Measure::MinimalMartingale: return "QMM";
        case Measure::RiskNeutral: return "Q";
        default: return "Qtilde";
    }
}

namespace detail {
/// Market price of risk theta with dQ/dP = exp(-1/2 int theta^2 - int theta dW).
inline double kernel(const PathBundle& b, Measure m, const Matrix* xi, std::size_t p, std::size_t k) {
    return m == Measure::Tilde ? b.lambda(p, k) - (*xi)(p, k) : b.lambda(p, k);
}
inline void check_measure(const PathBundle& b, Measure m, const Matrix* xi) {
    if (m != Measure::Tilde) return;
    if (!xi) throw MeasureError("Qtilde density needs a xi path");
    if (xi->rows() != b.n_paths() || xi->cols() < b.n_steps())
        throw MeasureError("Qtilde density: xi path shape does not match the bundle");
}
}  // namespace detail

/// Cumulative log dQ/dP along each path, n_steps + 1 columns.
inline Matrix girsanov_logweight_path(const PathBundle& b, Measure m, const Matrix* xi = nullptr) {
    detail::check_measure(b, m, xi);
    const double h = b.grid().h();
    Matrix out(b.n_paths(), b.n_steps() + 1);
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < b.n_steps(); ++k) {
            const double th = detail::kernel(b, m, xi, p, k);
            acc += -0.5 * th * th * h - th * b.dW(p, k);
            out(p, k + 1) = acc;
        }
    }
    return out;
}

/// Terminal log dQ/dP per path.
inline std::vector<double> girsanov_logweight(const PathBundle& b, Measure m, const Matrix* xi = nullptr) {
    const Matrix path = girsanov_logweight_path(b, m, xi);
    std::vector<double> out(b.n_paths());
    for (std::size_t p = 0; p < b.n_paths(); ++p) out[p] = path(p, b.n_steps());
    return out;
}

/// Increments of the measure's Brownian motion driving S: dW + theta h.
inline Matrix shifted_increments(const PathBundle& b, Measure m, const Matrix* xi = nullptr) {
    detail::check_measure(b, m, xi);
    const double h = b.grid().h();
    Matrix out(b.n_paths(), b.n_steps());
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < b.n_steps(); ++k) out(p, k) = b.dW(p, k) + detail::kernel(b, m, xi, p, k) * h;
    return out;
}

/// Factor noise under Q^MM: dW^Y + rho lambda h.
inline Matrix shifted_factor_increments(const PathBundle& b) {
    if (!b.has_factor) throw MeasureError("bundle has no factor process");
    const double h = b.grid().h();
    Matrix out(b.n_paths(), b.n_steps());
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < b.n_steps(); ++k) out(p, k) = b.dW_Y(p, k) + b.rho * b.lambda(p, k) * h;
    return out;
}

/// One row per (path, step): t, W, W_perp, Y, S, logw_QMM, logw_Qtilde.
/// logw_Qtilde is nan when no xi is supplied; Y is nan for complete markets.
inline void write_paths_csv(std::ostream& out, const PathBundle& b, const Matrix* xi = nullptr,
                            std::string_view digest = {}) {
    io::CsvWriter w(out, {"path", "t", "W", "W_perp", "Y", "S", "logw_QMM", "logw_Qtilde"}, digest);
    const Matrix qmm = girsanov_logweight_path(b, Measure::MinimalMartingale);
    const Matrix qt = xi ? girsanov_logweight_path(b, Measure::Tilde, xi) : Matrix();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        double W = 0.0, Wp = 0.0;
        for (std::size_t k = 0; k <= b.n_steps(); ++k) {
            if (k > 0) {
                W += b.dW(p, k - 1);
                Wp += b.dW_perp(p, k - 1);
            }
            w.row({static_cast<double>(b.noise.first_path + p), b.grid().time(k), W, Wp,
                   b.has_factor ? b.Y(p, k) : nan, b.S(p, k), qmm(p, k), xi ? qt(p, k) : nan});
        }
    }
}

}  // namespace cara
