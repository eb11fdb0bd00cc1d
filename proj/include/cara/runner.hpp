#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cara/analytic.hpp"
#include "cara/config.hpp"
#include "cara/errors.hpp"
#include "cara/games.hpp"
#include "cara/io.hpp"
#include "cara/market.hpp"
#include "cara/paths.hpp"
#include "cara/verify.hpp"

namespace cara::runner {

using config::ExperimentConfig;
using nlohmann::json;

enum ExitCode : int { Ok = 0, VerificationFailed = 1, BadConfig = 2, NumericalFailure = 3 };

/// Digest of everything that can change a number in the outputs. The output
/// directory and the thread count cannot.
inline std::string run_digest(const ExperimentConfig& c) {
    json j = config::to_json(c);
    j.erase("out");
    j.erase("threads");
    return io::hex_digest(j.dump());
}

/// Rows with optional leading text columns, emitted as CSV or JSON.
struct Table {
    std::vector<std::string> text_columns;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> text;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> values) { rows.push_back(std::move(values)); }
    void add(std::vector<std::string> labels, std::vector<double> values) {
        text.push_back(std::move(labels));
        rows.push_back(std::move(values));
    }
};

class Output {
public:
    Output(const ExperimentConfig& c) : dir_(c.out), format_(c.format), digest_(run_digest(c)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory " + dir_.string());
    }

    const std::string& digest() const { return digest_; }
    const std::filesystem::path& dir() const { return dir_; }

    void table(const std::string& name, const Table& t) const {
        if (format_ == "json") {
            json j;
            std::vector<std::string> cols = t.text_columns;
            cols.insert(cols.end(), t.columns.begin(), t.columns.end());
            j["columns"] = cols;
            j["rows"] = json::array();
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                json row = json::array();
                if (!t.text.empty())
                    for (const auto& s : t.text[r]) row.push_back(s);
                for (double v : t.rows[r]) row.push_back(v);
                j["rows"].push_back(std::move(row));
            }
            document(name, std::move(j));
            return;
        }
        auto f = io::open_output((dir_ / (name + ".csv")).string());
        std::vector<std::string> header = t.text_columns;
        header.insert(header.end(), t.columns.begin(), t.columns.end());
        io::CsvWriter w(f, header, digest_);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (t.text.empty())
                w.row(t.rows[r]);
            else
                w.row(t.text[r], t.rows[r]);
        }
    }

    void document(const std::string& name, json j) const {
        j["config_digest"] = digest_;
        auto f = io::open_output((dir_ / (name + ".json")).string());
        f << j.dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    std::string format_;
    std::string digest_;
};

// ---------------------------------------------------------------------------
// Shared setup
// ---------------------------------------------------------------------------

inline TimeGrid time_grid(const ExperimentConfig& c, double horizon) {
    if (c.simulation.steps == 0) throw ConfigError("simulation.steps must be positive");
    return TimeGrid(0.0, horizon, c.simulation.steps);
}

inline Grid2D pde_grid(const ExperimentConfig& c, double horizon, Interval domain) {
    const double lo = c.pde.x_lo.value_or(domain.lo), hi = c.pde.x_hi.value_or(domain.hi);
    return Grid2D(horizon, c.pde.n_t, lo, hi, c.pde.n_x);
}

struct IncompleteSetup {
    IncompleteMarketModel model;
    PathBundle bundle;
    Grid2D grid;
    std::unique_ptr<PDESolution> f, zeta;
};

inline IncompleteSetup incomplete_setup(const ExperimentConfig& c) {
    if (c.simulation.paths < 2) throw ConfigError("simulation.paths must be at least 2");
    IncompleteMarketModel model = config::incomplete_model(c.model);
    PathBundle b = simulate(model, time_grid(c, model.horizon()), c.simulation.paths, c.seed, {0, c.threads});
    Grid2D g = pde_grid(c, model.horizon(), default_domain(b.Y, model.domain()));
    auto f = std::make_unique<PDESolution>(solve_f(model, g));
    auto z = std::make_unique<PDESolution>(solve_zeta(model, g));
    return {std::move(model), std::move(b), g, std::move(f), std::move(z)};
}

struct CompleteSetup {
    CompleteMarketModel model;
    PathBundle bundle;
    Grid2D grid;
    std::vector<RiskToleranceSolution> solutions;

    std::vector<const RiskToleranceSolution*> pointers() const {
        std::vector<const RiskToleranceSolution*> out;
        for (const auto& s : solutions) out.push_back(&s);
        return out;
    }
};

inline CompleteSetup complete_setup(const ExperimentConfig& c, const std::vector<TerminalPayoff>& payoffs) {
    if (c.simulation.paths < 2) throw ConfigError("simulation.paths must be at least 2");
    CompleteMarketModel model = config::complete_model(c.model);
    PathBundle b = simulate(model, time_grid(c, model.horizon()), c.simulation.paths, c.seed, {0, c.threads});
    Grid2D g = pde_grid(c, model.horizon(), default_domain(b.S, model.domain()));
    std::vector<RiskToleranceSolution> sols;
    for (const auto& p : payoffs) sols.push_back(solve_risk_tolerance(model, p, g));
    return {std::move(model), std::move(b), g, std::move(sols)};
}

inline std::vector<TerminalPayoff> payoffs_of(const std::vector<PlayerType>& players) {
    std::vector<TerminalPayoff> out;
    for (const auto& p : players) out.push_back(p.delta.payoff());
    return out;
}

inline std::vector<PlayerType> require_players(const ExperimentConfig& c) {
    auto p = config::players(c);
    if (p.empty()) throw ConfigError("this command needs a non-empty players list");
    return p;
}

inline json grid_json(const Grid2D& g) {
    return {{"T", g.T}, {"n_t", g.n_t}, {"x_lo", g.x_lo}, {"x_hi", g.x_hi}, {"n_x", g.n_x}};
}

inline Table solution_table(const PDESolution& s) {
    Table t;
    t.columns = {"t", "x", "u", "u_x"};
    const Grid2D& g = s.grid();
    for (std::size_t i = 0; i <= g.n_t; ++i)
        for (std::size_t j = 0; j <= g.n_x; ++j) t.add({g.t(i), g.x(j), s.at(i, j), s.derivative_at(i, j)});
    return t;
}

inline Table equilibrium_table(const EquilibriumReport& r, std::size_t max_paths) {
    Table t;
    t.columns = {"player", "path", "t", "pi", "X"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < r.strategy.size(); ++i) {
        const std::size_t np = std::min(max_paths, r.wealth[i].rows());
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t k = 0; k <= r.grid.n_steps; ++k)
                t.add({static_cast<double>(i), static_cast<double>(p), r.grid.time(k),
                       k < r.grid.n_steps ? r.strategy[i](p, k) : nan, r.wealth[i](p, k)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Figure 1
// ---------------------------------------------------------------------------

struct SurfacePoint {
    double c, psi, shift;
};

/// delta_bar - delta = phi c / (1 - psi) over the product grid.
inline std::vector<SurfacePoint> figure1_surface(std::size_t N, double phi, const std::vector<double>& c_grid,
                                                 const std::vector<double>& psi_grid) {
    if (N < 2) throw ParamError("figure1: N must be at least 2");
    for (double psi : psi_grid)
        if (!(psi < 1.0)) throw ParamError("figure1: psi grid must stay below 1");
    std::vector<SurfacePoint> out;
    for (double c : c_grid)
        for (double psi : psi_grid) out.push_back({c, psi, phi * c / (1.0 - psi)});
    return out;
}

inline int cmd_figure1(const ExperimentConfig& c, const Output& out) {
    const auto& f = c.figure1;
    if (f.c_n < 2 || f.psi_n < 2) throw ConfigError("figure1: grids need at least 2 points");
    const auto surf = figure1_surface(f.N, f.phi, numeric::linspace(f.c_lo, f.c_hi, f.c_n),
                                      numeric::linspace(f.psi_lo, f.psi_hi, f.psi_n));
    Table t;
    t.columns = {"c", "psi", "delta_bar_minus_delta"};
    for (const auto& p : surf) t.add({p.c, p.psi, p.shift});
    out.table("figure1", t);
    out.document("figure1", {{"N", f.N}, {"phi", f.phi}, {"points", surf.size()}});
    return Ok;
}

// ---------------------------------------------------------------------------
// solve / simulate
// ---------------------------------------------------------------------------

inline int cmd_solve(const ExperimentConfig& c, const Output& out) {
    json summary;
    if (!c.model.complete()) {
        const auto s = incomplete_setup(c);
        const auto& m = s.model;
        out.table("f", solution_table(*s.f));
        out.table("zeta", solution_table(*s.zeta));
        summary = {{"grid", grid_json(s.grid)},
                   {"f0", s.f->interpolate(0.0, m.y0())},
                   {"M0", s.zeta->interpolate(0.0, m.y0())}};
        if (c.model.family == "solvable") {
            const RiccatiSolution ric = solve_riccati(c.model.solvable);
            Table t;
            t.columns = {"t", "p", "q"};
            for (double tt : numeric::linspace(0.0, m.horizon(), std::max<std::size_t>(c.samples, 2)))
                t.add({tt, ric.p(tt), ric.q(tt)});
            out.table("riccati", t);
            double worst = 0.0;
            const Grid2D& g = s.grid;
            for (std::size_t i = 0; i < g.n_t; ++i) {
                const double p = ric.p(g.t(i)), q = ric.q(g.t(i));
                for (std::size_t j = 1; j < g.n_x; ++j) {
                    const double exact = p * g.x(j) + q;
                    worst = std::max(worst, std::abs(s.f->at(i, j) - exact) / std::abs(exact));
                }
            }
            summary["riccati"] = {{"p0", ric.p(0.0)}, {"q0", ric.q(0.0)}, {"max_relative_error", worst}};
        }
    } else {
        const auto players = require_players(c);
        const auto s = complete_setup(c, payoffs_of(players));
        summary["grid"] = grid_json(s.grid);
        for (std::size_t i = 0; i < s.solutions.size(); ++i) {
            out.table("delta_" + std::to_string(i), solution_table(s.solutions[i].delta));
            out.table("H_" + std::to_string(i), solution_table(s.solutions[i].H));
            summary["delta0"].push_back(s.solutions[i].delta.interpolate(0.0, s.model.s0()));
            summary["H0"].push_back(s.solutions[i].H.interpolate(0.0, s.model.s0()));
        }
    }
    out.document("solve", summary);
    return Ok;
}

inline int cmd_simulate(const ExperimentConfig& c, const Output& out) {
    const std::size_t shown = std::min(c.samples, c.simulation.paths);
    Table t;
    t.columns = {"path", "t", "W", "W_perp", "Y", "S", "logw_QMM", "logw_Qtilde"};
    json summary;
    auto emit = [&](const PathBundle& b, const Matrix* xi) {
        const Matrix qmm = girsanov_logweight_path(b, Measure::MinimalMartingale);
        const Matrix qt = xi ? girsanov_logweight_path(b, Measure::Tilde, xi) : Matrix();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t p = 0; p < shown; ++p) {
            double W = 0.0, Wp = 0.0;
            for (std::size_t k = 0; k <= b.n_steps(); ++k) {
                if (k > 0) {
                    W += b.dW(p, k - 1);
                    Wp += b.dW_perp(p, k - 1);
                }
                t.add({static_cast<double>(p), b.grid().time(k), W, Wp, b.has_factor ? b.Y(p, k) : nan, b.S(p, k),
                       qmm(p, k), xi ? qt(p, k) : nan});
            }
        }
        std::vector<double> st(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) st[p] = b.S(p, b.n_steps());
        const auto s = numeric::mean_se(st);
        summary["S_T"] = {{"mean", s.mean}, {"se", s.se}};
        summary["paths"] = b.n_paths();
        summary["steps"] = b.n_steps();
    };
    if (!c.model.complete()) {
        IncompleteMarketModel model = config::incomplete_model(c.model);
        emit(simulate(model, time_grid(c, model.horizon()), c.simulation.paths, c.seed, {0, c.threads}), nullptr);
    } else {
        const auto players = config::players(c);
        if (players.empty()) {
            CompleteMarketModel model = config::complete_model(c.model);
            emit(simulate(model, time_grid(c, model.horizon()), c.simulation.paths, c.seed, {0, c.threads}), nullptr);
        } else {
            const auto s = complete_setup(c, {players.front().delta.payoff()});
            const auto cp = xi_eta_complete(s.solutions[0].delta, s.solutions[0].H, s.model, s.bundle);
            emit(s.bundle, &cp.xi);
        }
    }
    out.table("paths", t);
    out.document("simulate", summary);
    return Ok;
}

// ---------------------------------------------------------------------------
// Equilibria
// ---------------------------------------------------------------------------

inline int cmd_nplayer(const ExperimentConfig& c, const Output& out) {
    const auto players = require_players(c);
    if (!c.model.complete()) {
        modified_risk_tolerance(players);
        const auto s = incomplete_setup(c);
        const auto r = nplayer_incomplete(players, s.model, s.bundle, *s.f, *s.zeta, {true});
        out.table("equilibrium", equilibrium_table(r, c.samples));
        out.document("nplayer", r.summary());
    } else {
        const auto s = complete_setup(c, payoffs_of(players));
        const auto r = nplayer_complete(players, s.model, s.bundle, s.pointers());
        out.table("equilibrium", equilibrium_table(r, c.samples));
        out.document("nplayer", r.summary());
    }
    return Ok;
}

inline int cmd_mfg(const ExperimentConfig& c, const Output& out) {
    if (!c.types) throw ConfigError("mfg needs a types table");
    const auto dist = config::type_distribution(*c.types);
    const auto moments = MeanFieldMoments::of(dist);
    if (!c.model.complete()) {
        if (!dist.constant_tolerance()) throw ConfigError("incomplete-market types need a constant delta law");
        if (moments.mean_c >= 1.0) throw NoEquilibrium("E[c] = 1: no mean-field equilibrium exists");
        const auto types = dist.sample(std::min(c.types->stored, c.types->samples), c.seed);
        const auto s = incomplete_setup(c);
        const auto r = mfg_incomplete(types, moments, s.model, s.bundle, *s.f, *s.zeta, {true});
        out.table("equilibrium", equilibrium_table(r, c.samples));
        out.document("mfg", r.summary());
    } else {
        if (dist.constant_tolerance()) throw ConfigError("complete-market types need a payoff mixture");
        std::vector<std::size_t> comp;
        const auto types = dist.sample(c.types->samples, c.seed, 0, &comp);
        std::vector<TerminalPayoff> payoffs;
        for (const auto& m : dist.payoff_mixture().components) payoffs.push_back(affine_payoff(m.intercept, m.slope));
        const auto s = complete_setup(c, payoffs);
        const auto r = mfg_complete(types, comp, s.pointers(), moments, s.model, s.bundle, {c.types->stored});
        out.table("equilibrium", equilibrium_table(r, c.samples));
        out.document("mfg", r.summary());
    }
    return Ok;
}

inline int cmd_single(const ExperimentConfig& c, const Output& out) {
    auto players = require_players(c);
    if (!c.model.complete()) {
        for (auto& p : players) p.c = 0.0;
        const auto s = incomplete_setup(c);
        const auto r = nplayer_incomplete(players, s.model, s.bundle, *s.f, *s.zeta, {true});
        out.table("single", equilibrium_table(r, c.samples));
        out.document("single", r.summary());
        return Ok;
    }
    const auto s = complete_setup(c, payoffs_of(players));
    Table t;
    t.columns = {"player", "path", "t", "pi", "x_star", "x_euler"};
    json summary;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < players.size(); ++i) {
        const auto sp = single_player_complete(players[i], s.model, s.bundle, s.solutions[i]);
        const std::size_t m = s.bundle.n_steps(), np = std::min(c.samples, s.bundle.n_paths());
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t k = 0; k <= m; ++k)
                t.add({static_cast<double>(i), static_cast<double>(p), s.bundle.grid().time(k),
                       k < m ? sp.pi(p, k) : nan, sp.x_star(p, k), sp.x_euler(p, k)});
        std::vector<double> gap(s.bundle.n_paths());
        for (std::size_t p = 0; p < gap.size(); ++p) gap[p] = std::abs(sp.x_star(p, m) - sp.x_euler(p, m));
        summary["players"].push_back({{"value", sp.value},
                                      {"delta0", sp.delta0},
                                      {"H0", sp.H0},
                                      {"mean_terminal_gap", numeric::mean_se(gap).mean}});
    }
    out.table("single", t);
    out.document("single", summary);
    return Ok;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

inline std::vector<Deviation> scale_deviations(const std::vector<double>& scales) {
    std::vector<Deviation> out;
    for (double s : scales) out.push_back({"scale_" + numeric::format_double(s), s, {}});
    return out;
}

inline Table deviation_table(const DeviationTestResult& r) {
    Table t;
    t.text_columns = {"label"};
    t.columns = {"player", "utility", "utility_se", "difference", "combined_se", "z", "pass"};
    for (const auto& a : r.arms)
        t.add({a.label}, {static_cast<double>(a.player), a.utility.mean, a.utility.se, a.difference.mean,
                          a.combined_se, a.z, a.pass ? 1.0 : 0.0});
    return t;
}

inline json utility_check(const std::vector<PlayerType>& players, const EquilibriumReport& eq, const PathBundle& b,
                          double threshold, bool& pass) {
    std::vector<Policy> pol;
    for (const auto& s : eq.strategy) pol.push_back(policy_from(s));
    const UtilityRun run = estimate_utility(players, pol, b);
    json st;
    pass = true;
    for (std::size_t i = 0; i < players.size(); ++i) {
        const auto& u = run.players[i].stats;
        const double z = u.z_against(eq.values[i]);
        const bool ok = std::abs(z) <= threshold;
        pass = pass && ok;
        st["players"].push_back({{"estimate", u.mean}, {"se", u.se}, {"closed_form", eq.values[i]}, {"z", z},
                                 {"clipped", run.players[i].clipped},
                                 {"square_integrability", run.square_integrability[i]}, {"pass", ok}});
    }
    return st;
}

inline int cmd_verify(const ExperimentConfig& c, const Output& out) {
    const auto& v = c.verify;
    json records = json::array();
    bool all = true;
    auto record = [&](const std::string& test, json st, bool pass) {
        records.push_back(test_record(test, out.digest(), std::move(st), pass));
        all = all && pass;
    };
    auto wants = [&](const char* t) { return std::find(v.tests.begin(), v.tests.end(), t) != v.tests.end(); };
    const bool needs_game = wants("nash") || wants("utility") || wants("drift") || wants("entropy");

    if (!c.model.complete()) {
        if (needs_game) {
            const auto players = require_players(c);
            modified_risk_tolerance(players);
            const auto s = incomplete_setup(c);
            const auto eq = nplayer_incomplete(players, s.model, s.bundle, *s.f, *s.zeta);
            if (wants("nash")) {
                auto devs = scale_deviations(v.scales);
                devs.push_back(single_player_deviation(eq));
                const auto r = nash_deviation_test(players, eq, devs, s.bundle, v.deviation_threshold);
                out.table("deviations", deviation_table(r));
                record("nash", r.statistics(), r.pass);
            }
            if (wants("utility")) {
                bool ok = false;
                json st = utility_check(players, eq, s.bundle, v.drift_threshold, ok);
                record("utility", st, ok);
            }
            if (wants("drift")) {
                const double d = players.front().delta.constant();
                const PlayerType solo = PlayerType::constant(players.front().x0, d, 0.0);
                const IncompleteFactor fac = incomplete_factor(s.model, s.bundle, *s.f);
                const Matrix pi_star = detail::scaled(fac.kappa, d);
                const auto run_star = estimate_utility({solo}, {policy_from(pi_star)}, s.bundle, true);
                const auto run_zero = estimate_utility({solo}, {zero_policy()}, s.bundle, true);
                const auto a = drift_test(verification_process(run_star.wealth[0], d, *s.f, s.bundle), "u_optimal",
                                          v.drift_threshold);
                const auto z = drift_test(verification_process(run_zero.wealth[0], d, *s.f, s.bundle), "u_zero",
                                          v.drift_threshold);
                record("drift_u_optimal", a.statistics(), a.classification == DriftClass::Martingale);
                record("drift_u_zero", z.statistics(), z.classification == DriftClass::Supermartingale);
            }
            if (wants("entropy")) {
                const auto e = entropy_identity_check(s.model, *s.f, *s.zeta, s.bundle, v.entropy_threshold);
                record("entropy", e.statistics(), e.pass);
            }
        }
        if (wants("convergence")) {
            if (!c.types) throw ConfigError("verify.convergence needs a types table");
            const auto dist = config::type_distribution(*c.types);
            const auto players = config::players(c);
            const PlayerType tracked = players.empty() ? dist.sample(1, c.seed ^ 0x5eedULL).front() : players.front();
            IncompleteMarketModel model = config::incomplete_model(c.model);
            PathBundle b = simulate(model, time_grid(c, model.horizon()), std::min<std::size_t>(c.simulation.paths, 1000),
                                    c.seed, {0, c.threads});
            const Grid2D g = pde_grid(c, model.horizon(), default_domain(b.Y, model.domain()));
            const PDESolution f = solve_f(model, g);
            double ksup = 0.0;
            for (double k : incomplete_factor(model, b, f).kappa.values()) ksup = std::max(ksup, std::abs(k));
            const auto st = convergence_study(dist, tracked, ksup, v.convergence_N, v.resamples, c.seed);
            const bool zero = std::all_of(st.rows.begin(), st.rows.end(), [](const auto& r) { return r.mean_gap == 0.0; });
            record("convergence", st.statistics(), zero || (st.monotone && st.slope < 0.0));
        }
    } else {
        const auto players = require_players(c);
        const auto s = complete_setup(c, payoffs_of(players));
        if (wants("nash") || wants("utility")) {
            const auto eq = nplayer_complete(players, s.model, s.bundle, s.pointers());
            if (wants("nash")) {
                const auto r =
                    nash_deviation_test(players, eq, scale_deviations(v.scales), s.bundle, v.deviation_threshold);
                out.table("deviations", deviation_table(r));
                record("nash", r.statistics(), r.pass);
            }
            if (wants("utility")) {
                bool ok = false;
                json st = utility_check(players, eq, s.bundle, v.drift_threshold, ok);
                record("utility", st, ok);
            }
        }
        if (wants("drift")) {
            const auto& noise = s.bundle.noise;
            for (std::size_t i = 0; i < s.solutions.size(); ++i) {
                const PDESolution& d = s.solutions[i].delta;
                const PathBundle q = simulate_under(s.model, noise, [](double, double) { return 0.0; }, c.threads);
                const PathBundle qt = simulate_under(
                    s.model, noise,
                    [&](double t, double S) {
                        const double sg = s.model.sigma(t, S);
                        return sg * sg * S * d.interpolate_derivative(t, S) / d.interpolate(t, S);
                    },
                    c.threads);
                Matrix dq(q.n_paths(), q.n_steps() + 1), ratio(qt.n_paths(), qt.n_steps() + 1);
                for (std::size_t p = 0; p < q.n_paths(); ++p)
                    for (std::size_t k = 0; k <= q.n_steps(); ++k) {
                        const double t = q.grid().time(k);
                        dq(p, k) = d.interpolate(t, q.S(p, k));
                        ratio(p, k) = qt.S(p, k) / d.interpolate(t, qt.S(p, k));
                    }
                const auto a = drift_test(dq, "delta_Q_" + std::to_string(i), v.drift_threshold);
                const auto b = drift_test(ratio, "S_over_delta_Qtilde_" + std::to_string(i), v.drift_threshold);
                record(a.label, a.statistics(), a.classification == DriftClass::Martingale);
                record(b.label, b.statistics(), b.classification == DriftClass::Martingale);
            }
        }
        if (wants("entropy") || wants("convergence"))
            throw ConfigError("entropy and convergence checks apply to incomplete markets only");
    }
    out.document("verify", {{"records", records}, {"pass", all}});
    return all ? Ok : VerificationFailed;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"solve", "simulate", "nplayer", "mfg", "single", "verify", "figure1"};
    return c;
}

inline int dispatch(const std::string& command, const ExperimentConfig& c, const Output& out) {
    if (command == "solve") return cmd_solve(c, out);
    if (command == "simulate") return cmd_simulate(c, out);
    if (command == "nplayer") return cmd_nplayer(c, out);
    if (command == "mfg") return cmd_mfg(c, out);
    if (command == "single") return cmd_single(c, out);
    if (command == "verify") return cmd_verify(c, out);
    if (command == "figure1") return cmd_figure1(c, out);
    throw ConfigError("unknown command " + command);
}

inline int exit_code_for(const Error& e) {
    const std::string k = e.kind();
    if (k == "ConfigError" || k == "ParamError" || k == "DomainError") return BadConfig;
    return NumericalFailure;
}

/// Writes `error.json` into `dir` (when it can) and a one-line message to
/// `err`.
inline void report_error(const std::filesystem::path& dir, const std::string& kind, const std::string& message,
                         int code, const std::string& digest, std::ostream& err) {
    json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!digest.empty()) j["config_digest"] = digest;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream f(dir / "error.json", std::ios::binary | std::ios::trunc);
    if (f) f << j.dump(2) << '\n';
    err << "error: " << kind << ": " << message << '\n';
}

/// Runs one command and maps library errors onto exit codes.
inline int execute(const std::string& command, const ExperimentConfig& c, std::ostream& err = std::cerr) {
    std::string digest;
    try {
        digest = run_digest(c);
        const Output out(c);
        return dispatch(command, c, out);
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        report_error(c.out, e.kind(), e.what(), code, digest, err);
        return code;
    } catch (const std::exception& e) {
        report_error(c.out, "InternalError", e.what(), NumericalFailure, digest, err);
        return NumericalFailure;
    }
}

}  // namespace cara::runner
