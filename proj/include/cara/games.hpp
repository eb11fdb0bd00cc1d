#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cara/analytic.hpp"
#include "cara/errors.hpp"
#include "cara/io.hpp"
#include "cara/market.hpp"
#include "cara/numeric.hpp"
#include "cara/paths.hpp"

namespace cara {

// ---------------------------------------------------------------------------
// Interaction algebra
// ---------------------------------------------------------------------------

struct ModifiedRiskTolerance {
    std::vector<double> delta;
    std::vector<double> c;
    std::vector<double> delta_bar;
    double phi = 0.0;
    double psi = 0.0;
};

inline ModifiedRiskTolerance modified_risk_tolerance(const std::vector<PlayerType>& players) {
    const AggregateStats st = aggregate_stats(players);
    if (st.psi >= 1.0)
        throw NoEquilibrium("psi_N = 1: all c_i must equal 1, and no wealth-independent Nash equilibrium exists");
    ModifiedRiskTolerance out;
    out.phi = st.phi;
    out.psi = st.psi;
    const double shift = st.phi / (1.0 - st.psi);
    for (const auto& p : players) {
        out.delta.push_back(p.delta.constant());
        out.c.push_back(p.c);
        out.delta_bar.push_back(p.delta.constant() + shift * p.c);
    }
    return out;
}

/// Maps the (delta', c') parameterization that benchmarks against the
/// average of the other N-1 players to the (delta, c) one.
inline std::pair<double, double> reparameterize_interaction(double delta_prime, double c_prime, std::size_t n) {
    if (n < 2) throw ParamError("reparameterize_interaction: need N >= 2");
    const double N = static_cast<double>(n);
    const double d_den = 1.0 + c_prime / (N - 1.0);
    const double c_den = (N - 1.0) / N + c_prime / N;
    if (d_den == 0.0 || c_den == 0.0) throw ParamError("reparameterize_interaction: division by zero");
    return {delta_prime / d_den, c_prime / c_den};
}

/// delta + E[delta] c / (1 - E[c]).
inline double mfg_coefficient(double delta, double c, double mean_delta, double mean_c) {
    if (mean_c >= 1.0) throw NoEquilibrium("E[c] = 1: no mean-field equilibrium exists");
    return delta + mean_delta * c / (1.0 - mean_c);
}

struct MeanFieldMoments {
    double mean_delta = 1.0;
    double mean_c = 0.0;
    double mean_x = 0.0;

    static MeanFieldMoments of(const TypeDistribution& d) {
        return {d.constant_tolerance() ? d.mean_tolerance() : std::numeric_limits<double>::quiet_NaN(),
                d.mean_interaction(), d.mean_wealth()};
    }
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Strategy matrices hold left-point values (n_paths x n_steps); wealth
/// matrices include t = 0 (n_paths x n_steps + 1).
struct EquilibriumReport {
    std::string game;
    TimeGrid grid;
    bool wealth_dependent = false;
    std::vector<double> x0;
    std::vector<double> c;
    std::vector<Matrix> strategy;
    std::vector<Matrix> wealth;
    std::vector<double> values;
    std::map<std::string, std::vector<double>> player_components;
    std::map<std::string, double> components;
    std::map<std::string, double> diagnostics;

    std::size_t n_players() const { return values.size(); }

    /// Rows (player, path, t, pi, X). pi is nan at the final time. At most
    /// `max_paths` paths are written per player.
    void write_csv(std::ostream& out, std::string_view digest = {},
                   std::size_t max_paths = std::numeric_limits<std::size_t>::max()) const {
        io::CsvWriter w(out, {"player", "path", "t", "pi", "X"}, digest);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 0; i < strategy.size(); ++i) {
            const std::size_t np = std::min(max_paths, wealth[i].rows());
            for (std::size_t p = 0; p < np; ++p)
                for (std::size_t k = 0; k <= grid.n_steps; ++k)
                    w.row({static_cast<double>(i), static_cast<double>(p), grid.time(k),
                           k < grid.n_steps ? strategy[i](p, k) : nan, wealth[i](p, k)});
        }
    }

    nlohmann::json summary() const {
        nlohmann::json j;
        j["game"] = game;
        j["n_players"] = n_players();
        j["wealth_dependent"] = wealth_dependent;
        j["values"] = values;
        j["x0"] = x0;
        j["c"] = c;
        j["components"] = components;
        j["player_components"] = player_components;
        j["diagnostics"] = diagnostics;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Incomplete market
// ---------------------------------------------------------------------------

/// Common factor of every incomplete-market equilibrium strategy:
/// kappa = lambda/sigma + rho xi / ((1 - rho^2) sigma), and the wealth driver
/// g = lambda + rho xi / (1 - rho^2), both at left points.
struct IncompleteFactor {
    Matrix xi;
    Matrix kappa;
    Matrix g;
};

inline IncompleteFactor incomplete_factor(const IncompleteMarketModel& model, const PathBundle& bundle,
                                          const PDESolution& f) {
    IncompleteFactor out{xi_incomplete(model, f, bundle), Matrix(bundle.n_paths(), bundle.n_steps()),
                         Matrix(bundle.n_paths(), bundle.n_steps())};
    const double k = model.rho() / (1.0 - model.rho() * model.rho());
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
        for (std::size_t s = 0; s < bundle.n_steps(); ++s) {
            const double g = bundle.lambda(p, s) + k * out.xi(p, s);
            out.g(p, s) = g;
            out.kappa(p, s) = g / bundle.sigma(p, s);
        }
    return out;
}

namespace detail {
/// X = x + coef * sum g (lambda h + dW), left point.
inline Matrix factor_wealth(double x0, double coef, const IncompleteFactor& fac, const PathBundle& b) {
    const double h = b.grid().h();
    Matrix X(b.n_paths(), b.n_steps() + 1);
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        double acc = 0.0;
        X(p, 0) = x0;
        for (std::size_t s = 0; s < b.n_steps(); ++s) {
            acc += fac.g(p, s) * (b.lambda(p, s) * h + b.dW(p, s));
            X(p, s + 1) = x0 + coef * acc;
        }
    }
    return X;
}

inline Matrix scaled(const Matrix& m, double a) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.values().size(); ++i) out.values()[i] = a * m.values()[i];
    return out;
}

/// E_P[Z^MM exp(-1/2 (1 - rho^2) sum lambda^2 h)] over the bundle.
inline numeric::MeanSe mc_M0(const IncompleteMarketModel& model, const PathBundle& b) {
    const auto lw = girsanov_logweight(b, Measure::MinimalMartingale);
    const double h = b.grid().h(), k = 0.5 * (1.0 - model.rho() * model.rho());
    std::vector<double> v(b.n_paths());
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        double s = 0.0;
        for (std::size_t t = 0; t < b.n_steps(); ++t) s += b.lambda(p, t) * b.lambda(p, t) * h;
        v[p] = std::exp(lw[p] - k * s);
    }
    return numeric::mean_se(v);
}
}  // namespace detail

struct IncompleteOptions {
    bool mc_M0 = false;
};

/// Wealth-independent Nash equilibrium pi_i = delta_bar_i kappa.
inline EquilibriumReport nplayer_incomplete(const std::vector<PlayerType>& players,
                                            const IncompleteMarketModel& model, const PathBundle& bundle,
                                            const PDESolution& f, const PDESolution& zeta,
                                            IncompleteOptions opt = {}) {
    const ModifiedRiskTolerance mrt = modified_risk_tolerance(players);
    const IncompleteFactor fac = incomplete_factor(model, bundle, f);
    const double rho2 = model.rho() * model.rho();
    const double M0 = zeta.interpolate(0.0, model.y0());
    const std::size_t n = players.size();

    EquilibriumReport r;
    r.game = "nplayer_incomplete";
    r.grid = bundle.grid();
    std::vector<double> xs;
    for (const auto& p : players) xs.push_back(p.x0);
    const double xbar = detail::symmetric_mean(xs);
    for (std::size_t i = 0; i < n; ++i) {
        r.x0.push_back(players[i].x0);
        r.c.push_back(players[i].c);
        r.strategy.push_back(detail::scaled(fac.kappa, mrt.delta_bar[i]));
        r.wealth.push_back(detail::factor_wealth(players[i].x0, mrt.delta_bar[i], fac, bundle));
        r.values.push_back(-std::exp(-(players[i].x0 - players[i].c * xbar) / mrt.delta[i]) *
                           std::pow(M0, 1.0 / (1.0 - rho2)));
    }
    r.player_components["delta"] = mrt.delta;
    r.player_components["delta_bar"] = mrt.delta_bar;
    r.components["phi_N"] = mrt.phi;
    r.components["psi_N"] = mrt.psi;
    r.components["M0"] = M0;
    r.components["x_bar"] = xbar;

    // Best-response fixed point and average-strategy identity.
    double fp = 0.0, avg = 0.0;
    const double avg_coef = mrt.phi / (1.0 - mrt.psi);
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
        for (std::size_t s = 0; s < bundle.n_steps(); ++s) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += r.strategy[i](p, s);
            const double kap = fac.kappa(p, s);
            for (std::size_t i = 0; i < n; ++i) {
                const double best = mrt.delta[i] * kap + mrt.c[i] / static_cast<double>(n) * sum;
                fp = std::max(fp, std::abs(r.strategy[i](p, s) - best) / std::max(1.0, std::abs(best)));
            }
            const double mean = sum / static_cast<double>(n);
            avg = std::max(avg, std::abs(mean - avg_coef * kap) / std::max(1.0, std::abs(mean)));
        }
    r.diagnostics["fixed_point_residual"] = fp;
    r.diagnostics["average_identity_residual"] = avg;
    if (opt.mc_M0) {
        const auto est = detail::mc_M0(model, bundle);
        r.diagnostics["M0_mc"] = est.mean;
        r.diagnostics["M0_mc_se"] = est.se;
    }
    return r;
}

inline EquilibriumReport nplayer_incomplete(const std::vector<PlayerType>& players,
                                            const IncompleteMarketModel& model, const PathBundle& bundle,
                                            const PDESolution& f, IncompleteOptions opt = {}) {
    modified_risk_tolerance(players);
    return nplayer_incomplete(players, model, bundle, f, solve_zeta(model, f.grid()), opt);
}

/// Mean-field equilibrium for the given sampled (or chosen) types.
inline EquilibriumReport mfg_incomplete(const std::vector<PlayerType>& types, const MeanFieldMoments& moments,
                                        const IncompleteMarketModel& model, const PathBundle& bundle,
                                        const PDESolution& f, const PDESolution& zeta, IncompleteOptions opt = {}) {
    if (moments.mean_c >= 1.0) throw NoEquilibrium("E[c] = 1: no mean-field equilibrium exists");
    if (types.empty()) throw SampleError("mfg_incomplete: need at least one type");
    const IncompleteFactor fac = incomplete_factor(model, bundle, f);
    const double rho2 = model.rho() * model.rho();
    const double M0 = zeta.interpolate(0.0, model.y0());
    EquilibriumReport r;
    r.game = "mfg_incomplete";
    r.grid = bundle.grid();
    std::vector<double> coef;
    for (const auto& t : types) {
        const double d = t.delta.constant();
        const double k = mfg_coefficient(d, t.c, moments.mean_delta, moments.mean_c);
        coef.push_back(k);
        r.x0.push_back(t.x0);
        r.c.push_back(t.c);
        r.strategy.push_back(detail::scaled(fac.kappa, k));
        r.wealth.push_back(detail::factor_wealth(t.x0, k, fac, bundle));
        r.values.push_back(-std::exp(-(t.x0 - t.c * moments.mean_x) / d) * std::pow(M0, 1.0 / (1.0 - rho2)));
    }
    r.player_components["coefficient"] = coef;
    r.components["E_delta"] = moments.mean_delta;
    r.components["E_c"] = moments.mean_c;
    r.components["m"] = moments.mean_x;
    r.components["M0"] = M0;
    if (opt.mc_M0) {
        const auto est = detail::mc_M0(model, bundle);
        r.diagnostics["M0_mc"] = est.mean;
        r.diagnostics["M0_mc_se"] = est.se;
    }
    return r;
}

inline EquilibriumReport mfg_incomplete(const std::vector<PlayerType>& types, const MeanFieldMoments& moments,
                                        const IncompleteMarketModel& model, const PathBundle& bundle,
                                        const PDESolution& f, IncompleteOptions opt = {}) {
    if (moments.mean_c >= 1.0) throw NoEquilibrium("E[c] = 1: no mean-field equilibrium exists");
    return mfg_incomplete(types, moments, model, bundle, f, solve_zeta(model, f.grid()), opt);
}

// ---------------------------------------------------------------------------
// Complete market
// ---------------------------------------------------------------------------

/// delta(t, S) and H(t, S) for one terminal risk tolerance.
struct RiskToleranceSolution {
    PDESolution delta;
    PDESolution H;
};

inline RiskToleranceSolution solve_risk_tolerance(const CompleteMarketModel& model, const TerminalPayoff& payoff,
                                                  const Grid2D& grid, const SolverSettings& cfg = {}) {
    PDESolution d = solve_delta_price(model, payoff, grid, cfg);
    PDESolution H = solve_H(model, d, grid, cfg);
    return {std::move(d), std::move(H)};
}

/// (delta (lambda - xi - eta) + x xi) / sigma: the best response to a
/// benchmark-adjusted wealth x.
inline double individual_term(double delta, double xi, double eta, double lambda, double sigma, double x) {
    return (delta * (lambda - xi - eta) + x * xi) / sigma;
}

struct SinglePlayerSolution {
    ComplementPaths fields;  ///< delta, xi, H, eta along paths
    Matrix log_phi;          ///< log Phi_{0,s}, n_steps + 1 columns
    Matrix pi;               ///< pi* from the closed-form wealth
    Matrix x_star;           ///< closed-form wealth
    Matrix x_euler;          ///< Euler wealth under pi* fed back
    Matrix pi_euler;
    double delta0 = 0.0;
    double H0 = 0.0;
    double value = 0.0;      ///< v_0(x) = -exp(-x/delta_0 - H_0)

    /// Phi_{u,s} on path p, u <= s grid indices.
    double phi(std::size_t p, std::size_t u, std::size_t s) const { return std::exp(log_phi(p, s) - log_phi(p, u)); }
};

namespace detail {
/// log Phi_{0,s} = sum_{v<s} (lambda - xi/2) xi h + xi dW.
inline Matrix log_phi(const ComplementPaths& cp, const PathBundle& b) {
    const double h = b.grid().h();
    Matrix L(b.n_paths(), b.n_steps() + 1);
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        double acc = 0.0;
        for (std::size_t s = 0; s < b.n_steps(); ++s) {
            const double xi = cp.xi(p, s);
            acc += (b.lambda(p, s) - 0.5 * xi) * xi * h + xi * b.dW(p, s);
            L(p, s + 1) = acc;
        }
    }
    return L;
}

/// x_s = Phi_{0,s} (x + sum_{u<s} Phi_{0,u}^{-1} (A (lambda - xi) h + A dW)),
/// A = delta (lambda - eta - xi).
inline Matrix closed_form_wealth(double x0, const ComplementPaths& cp, const Matrix& L, const PathBundle& b) {
    const double h = b.grid().h();
    Matrix X(b.n_paths(), b.n_steps() + 1);
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        double acc = 0.0;
        X(p, 0) = x0;
        for (std::size_t s = 0; s < b.n_steps(); ++s) {
            const double l = b.lambda(p, s), xi = cp.xi(p, s);
            const double A = cp.delta(p, s) * (l - cp.eta(p, s) - xi);
            acc += std::exp(-L(p, s)) * (A * (l - xi) * h + A * b.dW(p, s));
            X(p, s + 1) = std::exp(L(p, s + 1)) * (x0 + acc);
        }
    }
    return X;
}

inline void require_complete_bundle(const PathBundle& b) {
    if (b.has_factor) throw ParamError("complete-market games need a complete-market bundle");
}
inline double check_functional(const PlayerType& p) {
    if (p.delta.is_constant()) return p.delta.constant();
    return p.delta.payoff().lower_bound;
}
}  // namespace detail

inline SinglePlayerSolution single_player_complete(const PlayerType& player, const CompleteMarketModel& model,
                                                   const PathBundle& bundle, const RiskToleranceSolution& sol) {
    detail::require_complete_bundle(bundle);
    detail::check_functional(player);
    SinglePlayerSolution out;
    out.fields = xi_eta_complete(sol.delta, sol.H, model, bundle);
    out.log_phi = detail::log_phi(out.fields, bundle);
    out.x_star = detail::closed_form_wealth(player.x0, out.fields, out.log_phi, bundle);
    const std::size_t n = bundle.n_paths(), m = bundle.n_steps();
    const double h = bundle.grid().h();
    out.pi = Matrix(n, m);
    out.pi_euler = Matrix(n, m);
    out.x_euler = Matrix(n, m + 1);
    const auto& F = out.fields;
    for (std::size_t p = 0; p < n; ++p) {
        double x = player.x0;
        out.x_euler(p, 0) = x;
        for (std::size_t s = 0; s < m; ++s) {
            const double l = bundle.lambda(p, s), sig = bundle.sigma(p, s);
            out.pi(p, s) = individual_term(F.delta(p, s), F.xi(p, s), F.eta(p, s), l, sig, out.x_star(p, s));
            const double pe = individual_term(F.delta(p, s), F.xi(p, s), F.eta(p, s), l, sig, x);
            out.pi_euler(p, s) = pe;
            x += pe * (bundle.mu(p, s) * h + sig * bundle.dW(p, s));
            out.x_euler(p, s + 1) = x;
        }
    }
    out.delta0 = sol.delta.interpolate(0.0, model.s0());
    out.H0 = sol.H.interpolate(0.0, model.s0());
    out.value = -std::exp(-player.x0 / out.delta0 - out.H0);
    return out;
}

/// N-player equilibrium with functional risk tolerances. `solutions[i]`
/// belongs to player i; players may share solutions.
inline EquilibriumReport nplayer_complete(const std::vector<PlayerType>& players, const CompleteMarketModel& model,
                                          const PathBundle& bundle,
                                          const std::vector<const RiskToleranceSolution*>& solutions) {
    detail::require_complete_bundle(bundle);
    const std::size_t N = players.size();
    if (N == 0) throw ParamError("nplayer_complete: need at least one player");
    if (solutions.size() != N) throw ParamError("nplayer_complete: one risk tolerance solution per player");
    const double psi = mean_interaction(players);
    if (psi >= 1.0)
        throw NoEquilibrium("psi_N = 1: all c_i must equal 1, and no wealth-independent Nash equilibrium exists");
    for (std::size_t i = 1; i < N; ++i)
        if (!(solutions[i]->delta.grid() == solutions[0]->delta.grid()))
            throw ParamError("nplayer_complete: every risk tolerance must be solved on a shared grid");

    std::vector<double> xs;
    for (const auto& p : players) {
        detail::check_functional(p);
        xs.push_back(p.x0);
    }
    const double xbar0 = detail::symmetric_mean(xs);
    const double Nd = static_cast<double>(N);
    const std::size_t n = bundle.n_paths(), m = bundle.n_steps();

    std::vector<ComplementPaths> cps;
    std::vector<Matrix> xt;  // tilde wealth per player
    std::vector<double> d0, h0;
    EquilibriumReport r;
    r.game = "nplayer_complete";
    r.grid = bundle.grid();
    r.wealth_dependent = true;
    for (std::size_t i = 0; i < N; ++i) {
        cps.push_back(xi_eta_complete(solutions[i]->delta, solutions[i]->H, model, bundle));
        const double xtilde = players[i].x0 - players[i].c * xbar0;
        const Matrix L = detail::log_phi(cps.back(), bundle);
        xt.push_back(detail::closed_form_wealth(xtilde, cps.back(), L, bundle));
        d0.push_back(solutions[i]->delta.interpolate(0.0, model.s0()));
        h0.push_back(solutions[i]->H.interpolate(0.0, model.s0()));
        r.x0.push_back(players[i].x0);
        r.c.push_back(players[i].c);
        r.values.push_back(-std::exp(-xtilde / d0.back() - h0.back()));
    }

    // X_bar = mean(tilde X) / (1 - psi); X_i = c_i X_bar + tilde X_i.
    Matrix Xbar(n, m + 1);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t s = 0; s <= m; ++s) {
            double acc = 0.0;
            for (std::size_t i = 0; i < N; ++i) acc += xt[i](p, s);
            Xbar(p, s) = acc / Nd / (1.0 - psi);
        }
    for (std::size_t i = 0; i < N; ++i) {
        Matrix X(n, m + 1);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t s = 0; s <= m; ++s) X(p, s) = players[i].c * Xbar(p, s) + xt[i](p, s);
        r.wealth.push_back(std::move(X));
        r.strategy.emplace_back(n, m);
    }

    // pi_bar from phi^1..phi^4, then pi_i = c_i pi_bar + individual term.
    double resid = 0.0, wealth_resid = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t s = 0; s < m; ++s) {
            const double l = bundle.lambda(p, s), sig = bundle.sigma(p, s);
            double phi1 = 0, phi2 = 0, phi3 = 0, phi4 = 0, xsum = 0;
            for (std::size_t j = 0; j < N; ++j) {
                const auto& F = cps[j];
                phi1 += F.delta(p, s);
                phi2 += F.delta(p, s) * (F.xi(p, s) + F.eta(p, s));
                phi3 += r.wealth[j](p, s) * F.xi(p, s);
                phi4 += players[j].c * F.xi(p, s);
                xsum += r.wealth[j](p, s);
            }
            phi1 /= Nd;
            phi2 /= Nd;
            phi3 /= Nd;
            phi4 /= Nd;
            const double pibar = (l * phi1 - phi2 + phi3 - phi4 * Xbar(p, s)) / ((1.0 - psi) * sig);
            double pisum = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const auto& F = cps[i];
                const double v = players[i].c * pibar +
                                 individual_term(F.delta(p, s), F.xi(p, s), F.eta(p, s), l, sig, xt[i](p, s));
                r.strategy[i](p, s) = v;
                pisum += v;
            }
            wealth_resid = std::max(wealth_resid, std::abs(xsum / Nd - Xbar(p, s)));
            for (std::size_t i = 0; i < N; ++i) {
                const auto& F = cps[i];
                const double rel = r.wealth[i](p, s) - players[i].c / Nd * xsum;
                const double rhs = individual_term(F.delta(p, s), F.xi(p, s), F.eta(p, s), l, sig, rel) +
                                   players[i].c / Nd * pisum;
                resid = std::max(resid, std::abs(r.strategy[i](p, s) - rhs));
            }
        }
    r.player_components["delta0"] = d0;
    r.player_components["H0"] = h0;
    r.components["psi_N"] = psi;
    r.components["x_bar"] = xbar0;
    r.diagnostics["fixed_point_residual"] = resid;
    r.diagnostics["average_wealth_residual"] = wealth_resid;
    return r;
}

struct MfgCompleteOptions {
    /// Strategy and wealth matrices are kept for at most this many types.
    std::size_t stored_types = 16;
};

/// Mean-field equilibrium with functional risk tolerances. Each type j uses
/// solutions[component[j]]. Conditional expectations given the market path
/// are cross-sectional means over the type sample on that path.
inline EquilibriumReport mfg_complete(const std::vector<PlayerType>& types, const std::vector<std::size_t>& component,
                                      const std::vector<const RiskToleranceSolution*>& solutions,
                                      const MeanFieldMoments& moments, const CompleteMarketModel& model,
                                      const PathBundle& bundle, MfgCompleteOptions opt = {}) {
    detail::require_complete_bundle(bundle);
    if (moments.mean_c >= 1.0) throw NoEquilibrium("E[c] = 1: no mean-field equilibrium exists");
    const std::size_t K = types.size();
    if (K < 2) throw SampleError("mfg_complete: need at least 2 type samples");
    if (component.size() != K) throw ParamError("mfg_complete: one component index per type");
    for (std::size_t j : component)
        if (j >= solutions.size()) throw ParamError("mfg_complete: component index out of range");
    for (const auto& t : types) detail::check_functional(t);

    const std::size_t C = solutions.size(), n = bundle.n_paths(), m = bundle.n_steps();
    const double h = bundle.grid().h(), Kd = static_cast<double>(K);
    std::vector<ComplementPaths> cps;
    for (const auto* s : solutions) cps.push_back(xi_eta_complete(s->delta, s->H, model, bundle));

    EquilibriumReport r;
    r.game = "mfg_complete";
    r.grid = bundle.grid();
    r.wealth_dependent = true;
    const std::size_t stored = std::min(opt.stored_types, K);
    std::vector<double> d0, h0;
    for (std::size_t j = 0; j < K; ++j) {
        const auto& sol = *solutions[component[j]];
        d0.push_back(sol.delta.interpolate(0.0, model.s0()));
        h0.push_back(sol.H.interpolate(0.0, model.s0()));
        r.x0.push_back(types[j].x0);
        r.c.push_back(types[j].c);
        r.values.push_back(-std::exp(-(types[j].x0 - types[j].c * moments.mean_x) / d0.back() - h0.back()));
        if (j < stored) {
            r.strategy.emplace_back(n, m);
            r.wealth.emplace_back(n, m + 1);
        }
    }
    // Types sharing a component share delta, xi, eta; component counts and
    // c-sums let the means be formed per component.
    std::vector<double> count(C, 0.0), csum(C, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
        count[component[j]] += 1.0;
        csum[component[j]] += types[j].c;
    }

    double consistency = 0.0;
    std::vector<double> X(K);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t j = 0; j < K; ++j) X[j] = types[j].x0;
        for (std::size_t j = 0; j < stored; ++j) r.wealth[j](p, 0) = X[j];
        for (std::size_t s = 0; s < m; ++s) {
            const double l = bundle.lambda(p, s), sig = bundle.sigma(p, s);
            double e_delta = 0, e_dxe = 0, e_cxi = 0;
            for (std::size_t q = 0; q < C; ++q) {
                const double d = cps[q].delta(p, s), xi = cps[q].xi(p, s), eta = cps[q].eta(p, s);
                e_delta += count[q] * d;
                e_dxe += count[q] * d * (xi + eta);
                e_cxi += csum[q] * xi;
            }
            double e_x = 0, e_xxi = 0, e_c = 0;
            for (std::size_t j = 0; j < K; ++j) {
                e_x += X[j];
                e_xxi += X[j] * cps[component[j]].xi(p, s);
                e_c += types[j].c;
            }
            e_delta /= Kd;
            e_dxe /= Kd;
            e_cxi /= Kd;
            e_x /= Kd;
            e_xxi /= Kd;
            e_c /= Kd;
            const double pibar = (l * e_delta - e_dxe + e_xxi - e_cxi * e_x) / ((1.0 - moments.mean_c) * sig);
            double tilde_mean = 0.0;
            for (std::size_t j = 0; j < K; ++j) tilde_mean += X[j] - types[j].c * e_x;
            tilde_mean /= Kd;
            consistency = std::max(consistency, std::abs(tilde_mean - (1.0 - e_c) * e_x));
            const double move = bundle.mu(p, s) * h + sig * bundle.dW(p, s);
            for (std::size_t j = 0; j < K; ++j) {
                const auto& F = cps[component[j]];
                const double pi = types[j].c * pibar + individual_term(F.delta(p, s), F.xi(p, s), F.eta(p, s), l,
                                                                       sig, X[j] - types[j].c * e_x);
                if (j < stored) r.strategy[j](p, s) = pi;
                X[j] += pi * move;
                if (j < stored) r.wealth[j](p, s + 1) = X[j];
            }
        }
    }
    r.player_components["delta0"] = d0;
    r.player_components["H0"] = h0;
    r.components["E_c"] = moments.mean_c;
    r.components["m"] = moments.mean_x;
    r.components["n_types"] = Kd;
    r.diagnostics["type_average_residual"] = consistency;
    return r;
}

}  // namespace cara
