#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cara/analytic.hpp"
#include "cara/errors.hpp"
#include "cara/games.hpp"
#include "cara/market.hpp"
#include "cara/numeric.hpp"
#include "cara/paths.hpp"
#include "cara/rng.hpp"

namespace cara {

// ---------------------------------------------------------------------------
// Utility estimation
// ---------------------------------------------------------------------------

/// Amount invested at step k of path p given the current wealth of every
/// player. Wealth-independent strategies ignore the last argument.
using Policy = std::function<double(std::size_t p, std::size_t k, std::span<const double> wealth)>;

inline Policy policy_from(const Matrix& strategy) {
    return [&strategy](std::size_t p, std::size_t k, std::span<const double>) { return strategy(p, k); };
}
inline Policy scaled_policy(const Matrix& strategy, double factor) {
    return [&strategy, factor](std::size_t p, std::size_t k, std::span<const double>) {
        return factor * strategy(p, k);
    };
}
inline Policy zero_policy() {
    return [](std::size_t, std::size_t, std::span<const double>) { return 0.0; };
}

struct UtilityEstimate {
    numeric::MeanSe stats;
    std::vector<double> samples;  ///< per-path utility, kept for paired comparisons
    std::size_t clipped = 0;
};

struct UtilityRun {
    std::vector<UtilityEstimate> players;
    std::vector<Matrix> wealth;  ///< filled when requested
    std::vector<double> square_integrability;  ///< E[sum sigma^2 pi^2 h] per player
};

namespace detail {
constexpr double kUtilityFloor = -1e300;

inline double cara_utility(double x, double tolerance, std::size_t& clipped) {
    const double e = -x / tolerance;
    const double u = -std::exp(e);
    if (!std::isfinite(u) || u < kUtilityFloor) {
        ++clipped;
        return kUtilityFloor;
    }
    return u;
}
}  // namespace detail

/// Simulates all players' wealth jointly by Euler steps on the bundle and
/// returns the Monte Carlo mean of -exp(-(X_T^i - c_i C_T)/delta_T^i) with
/// C_T the average terminal wealth.
inline UtilityRun estimate_utility(const std::vector<PlayerType>& players, const std::vector<Policy>& policies,
                                   const PathBundle& bundle, bool keep_wealth = false) {
    const std::size_t N = players.size(), n = bundle.n_paths(), m = bundle.n_steps();
    if (N == 0 || policies.size() != N) throw ParamError("estimate_utility: one policy per player");
    UtilityRun run;
    run.players.resize(N);
    run.square_integrability.assign(N, 0.0);
    for (auto& u : run.players) u.samples.resize(n);
    if (keep_wealth) run.wealth.assign(N, Matrix(n, m + 1));
    const double h = bundle.grid().h();
    std::vector<double> X(N), pi(N), sq(N, 0.0);
    std::vector<std::vector<double>> sq_paths(N, std::vector<double>(n));
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t i = 0; i < N; ++i) X[i] = players[i].x0;
        std::fill(sq.begin(), sq.end(), 0.0);
        if (keep_wealth)
            for (std::size_t i = 0; i < N; ++i) run.wealth[i](p, 0) = X[i];
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t i = 0; i < N; ++i) pi[i] = policies[i](p, k, X);
            const double sig = bundle.sigma(p, k);
            const double move = bundle.mu(p, k) * h + sig * bundle.dW(p, k);
            for (std::size_t i = 0; i < N; ++i) {
                X[i] += pi[i] * move;
                sq[i] += sig * sig * pi[i] * pi[i] * h;
                if (keep_wealth) run.wealth[i](p, k + 1) = X[i];
            }
        }
        for (std::size_t i = 0; i < N; ++i)
            if (!std::isfinite(X[i])) throw NumericsError("estimate_utility: wealth became non-finite");
        double C = 0.0;
        for (std::size_t i = 0; i < N; ++i) C += X[i];
        C /= static_cast<double>(N);
        const double ST = bundle.S(p, m);
        for (std::size_t i = 0; i < N; ++i) {
            const double rel = players[i].c == 0.0 ? X[i] : X[i] - players[i].c * C;
            run.players[i].samples[p] = detail::cara_utility(rel, players[i].delta.terminal(ST), run.players[i].clipped);
            sq_paths[i][p] = sq[i];
        }
    }
    for (std::size_t i = 0; i < N; ++i) {
        run.players[i].stats = numeric::mean_se(run.players[i].samples);
        run.square_integrability[i] = numeric::mean_se(sq_paths[i]).mean;
    }
    return run;
}

// ---------------------------------------------------------------------------
// Nash deviation test
// ---------------------------------------------------------------------------

struct Deviation {
    std::string label;
    /// Multiplicative scaling of the equilibrium strategy, or a replacement
    /// policy for each player when `replacement` is set.
    double scale = 1.0;
    std::function<Policy(std::size_t player)> replacement;
};

inline std::vector<Deviation> default_deviations() {
    std::vector<Deviation> out;
    for (double s : {0.5, 0.9, 1.0, 1.1, 1.5}) out.push_back({"scale_" + numeric::format_double(s), s, {}});
    return out;
}

/// Incomplete market: player i ignores the interaction and plays delta_i * kappa,
/// i.e. the equilibrium strategy scaled by delta_i / delta_bar_i.
inline Deviation single_player_deviation(const EquilibriumReport& eq) {
    const auto d = eq.player_components.find("delta");
    const auto db = eq.player_components.find("delta_bar");
    if (d == eq.player_components.end() || db == eq.player_components.end())
        throw ParamError("single_player_deviation: report has no modified risk tolerances");
    return {"single_player", 1.0, [&eq, delta = d->second, bar = db->second](std::size_t i) {
                return scaled_policy(eq.strategy.at(i), delta.at(i) / bar.at(i));
            }};
}

struct ArmResult {
    std::string label;
    std::size_t player = 0;
    numeric::MeanSe utility;
    numeric::MeanSe difference;  ///< deviation minus baseline, paired by path
    double combined_se = 0.0;     ///< sqrt(se_base^2 + se_dev^2)
    double z = 0.0;               ///< difference / combined SE
    bool strictly_worse = false;  ///< difference < -threshold * combined SE
    bool pass = true;
};

struct DeviationTestResult {
    std::vector<numeric::MeanSe> baseline;
    std::vector<ArmResult> arms;
    double threshold = 2.0;
    bool pass = true;

    const ArmResult* find(std::size_t player, const std::string& label) const {
        for (const auto& a : arms)
            if (a.player == player && a.label == label) return &a;
        return nullptr;
    }

    nlohmann::json statistics() const {
        nlohmann::json j;
        j["threshold"] = threshold;
        for (std::size_t i = 0; i < baseline.size(); ++i) {
            j["baseline"].push_back({{"mean", baseline[i].mean}, {"se", baseline[i].se}});
        }
        for (const auto& a : arms)
            j["arms"].push_back({{"label", a.label},
                                 {"player", a.player},
                                 {"utility", a.utility.mean},
                                 {"utility_se", a.utility.se},
                                 {"difference", a.difference.mean},
                                 {"difference_se", a.difference.se},
                                 {"combined_se", a.combined_se},
                                 {"z", a.z},
                                 {"strictly_worse", a.strictly_worse},
                                 {"pass", a.pass}});
        return j;
    }
};

/// For every player i and deviation d, replaces player i's strategy and keeps
/// everyone else on the equilibrium. All arms reuse the bundle's noise, so the
/// zero deviation reproduces the baseline bit for bit. A deviation passes
/// when its utility does not exceed the baseline by more than `threshold`
/// combined standard errors.
inline DeviationTestResult nash_deviation_test(const std::vector<PlayerType>& players, const EquilibriumReport& eq,
                                               const std::vector<Deviation>& deviations, const PathBundle& bundle,
                                               double threshold = 2.0) {
    const std::size_t N = players.size();
    if (eq.strategy.size() != N) throw ParamError("nash_deviation_test: report does not match the player list");
    std::vector<Policy> base;
    for (std::size_t i = 0; i < N; ++i) base.push_back(policy_from(eq.strategy[i]));
    const UtilityRun b = estimate_utility(players, base, bundle);
    DeviationTestResult out;
    out.threshold = threshold;
    for (const auto& u : b.players) out.baseline.push_back(u.stats);
    for (std::size_t i = 0; i < N; ++i) {
        for (const auto& d : deviations) {
            std::vector<Policy> pol = base;
            pol[i] = d.replacement ? d.replacement(i) : scaled_policy(eq.strategy[i], d.scale);
            const UtilityRun r = estimate_utility(players, pol, bundle);
            ArmResult a;
            a.label = d.label;
            a.player = i;
            a.utility = r.players[i].stats;
            a.difference = numeric::paired_difference(r.players[i].samples, b.players[i].samples);
            a.combined_se = std::hypot(a.utility.se, b.players[i].stats.se);
            const double gap = a.difference.mean;
            a.z = gap == 0.0 ? 0.0 : (a.combined_se > 0.0 ? gap / a.combined_se : (gap > 0 ? INFINITY : -INFINITY));
            a.strictly_worse = gap < -threshold * a.combined_se;
            a.pass = gap <= threshold * a.combined_se;
            out.pass = out.pass && a.pass;
            out.arms.push_back(std::move(a));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Drift test
// ---------------------------------------------------------------------------

enum class DriftClass { Martingale, Supermartingale, Violation };

inline const char* drift_class_name(DriftClass c) {
    switch (c) {
        case DriftClass::Martingale: return "martingale-consistent";
        case DriftClass::Supermartingale: return "supermartingale-consistent";
        default: return "violation";
    }
}

struct DriftTestResult {
    std::string label;
    numeric::MeanSe per_step;  ///< mean increment per step with its SE
    double z = 0.0;
    double threshold = 3.0;
    DriftClass classification = DriftClass::Martingale;

    /// |z| <= threshold: martingale; z < -threshold: supermartingale;
    /// z > threshold: violation.
    static DriftClass classify(double z, double threshold) {
        if (std::abs(z) <= threshold) return DriftClass::Martingale;
        return z < 0 ? DriftClass::Supermartingale : DriftClass::Violation;
    }

    nlohmann::json statistics() const {
        return {{"label", label},
                {"mean_increment", per_step.mean},
                {"se", per_step.se},
                {"z", z},
                {"threshold", threshold},
                {"classification", drift_class_name(classification)}};
    }
};

/// Pools all n_paths x n_steps one-step increments. Under the martingale
/// hypothesis they are uncorrelated, so the pooled SE is sd / sqrt(n m).
/// Optional log-weights (one per path) turn P-samples into estimates under an
/// equivalent measure.
inline DriftTestResult drift_test(const Matrix& process, const std::string& label, double threshold = 3.0,
                                  const std::vector<double>* log_weights = nullptr) {
    if (process.rows() < 2 || process.cols() < 2) throw ParamError("drift_test: need >= 2 paths and >= 1 step");
    if (log_weights && log_weights->size() != process.rows()) throw ParamError("drift_test: weight count mismatch");
    const std::size_t n = process.rows(), m = process.cols() - 1;
    std::vector<double> inc(n * m);
    for (std::size_t p = 0; p < n; ++p) {
        const double w = log_weights ? std::exp((*log_weights)[p]) : 1.0;
        for (std::size_t k = 0; k < m; ++k) inc[p * m + k] = w * (process(p, k + 1) - process(p, k));
    }
    DriftTestResult r;
    r.label = label;
    r.threshold = threshold;
    r.per_step = numeric::mean_se(inc);
    r.z = r.per_step.z_against(0.0);
    r.classification = DriftTestResult::classify(r.z, threshold);
    return r;
}

/// u_t = -exp(-x_t/delta + f(t, Y_t)) for a single non-interacting player
/// with wealth paths x (n_paths x n_steps + 1).
inline Matrix verification_process(const Matrix& wealth, double delta, const PDESolution& f, const PathBundle& bundle) {
    Matrix u(wealth.rows(), wealth.cols());
    for (std::size_t p = 0; p < wealth.rows(); ++p)
        for (std::size_t s = 0; s < wealth.cols(); ++s) {
            const double t = bundle.grid().time(s);
            u(p, s) = -std::exp(-wealth(p, s) / delta + f.interpolate(t, bundle.Y(p, s)));
        }
    return u;
}

// ---------------------------------------------------------------------------
// N -> infinity convergence
// ---------------------------------------------------------------------------

struct ConvergenceRow {
    std::size_t N = 0;
    double mean_gap = 0.0;
    double se = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double slope = 0.0;
    bool monotone = true;

    nlohmann::json statistics() const {
        nlohmann::json j;
        for (const auto& r : rows) j["rows"].push_back({{"N", r.N}, {"mean_gap", r.mean_gap}, {"se", r.se}});
        j["slope"] = slope;
        j["monotone"] = monotone;
        return j;
    }
};

/// Player 1 has the fixed `tracked` type; players 2..N are i.i.d. draws. The
/// gap max_t |pi^1_N - pi_MFG| = |delta_bar_1 - mfg coefficient| max_t |kappa|
/// is averaged over `resamples` independent populations per N.
inline ConvergenceStudy convergence_study(const TypeDistribution& dist, const PlayerType& tracked, double kappa_sup,
                                          const std::vector<std::size_t>& N_list, std::size_t resamples,
                                          std::uint64_t seed) {
    if (N_list.size() < 3) throw ParamError("convergence_study: need at least 3 population sizes");
    for (std::size_t i = 1; i < N_list.size(); ++i)
        if (N_list[i] <= N_list[i - 1]) throw ParamError("convergence_study: N list must increase");
    if (!dist.constant_tolerance()) throw ParamError("convergence_study: needs constant risk tolerances");
    if (resamples == 0) throw ParamError("convergence_study: need at least one resample");
    const double target = mfg_coefficient(tracked.delta.constant(), tracked.c, dist.mean_tolerance(), dist.mean_interaction());
    ConvergenceStudy out;
    for (std::size_t N : N_list) {
        if (N < 2) throw ParamError("convergence_study: N must be >= 2");
        std::vector<double> gaps(resamples);
        for (std::size_t r = 0; r < resamples; ++r) {
            const std::uint64_t sub = rng::splitmix64(seed ^ rng::splitmix64(N * 0x9e3779b97f4a7c15ULL + r));
            std::vector<PlayerType> pop = dist.sample(N - 1, sub);
            pop.insert(pop.begin(), tracked);
            const ModifiedRiskTolerance mrt = modified_risk_tolerance(pop);
            gaps[r] = std::abs(mrt.delta_bar[0] - target) * kappa_sup;
        }
        const auto st = numeric::mean_se(gaps);
        out.rows.push_back({N, st.mean, st.se});
    }
    std::vector<double> ns, gs;
    bool all_zero = true;
    for (const auto& r : out.rows) {
        ns.push_back(static_cast<double>(r.N));
        gs.push_back(r.mean_gap);
        all_zero = all_zero && r.mean_gap == 0.0;
    }
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        out.monotone = out.monotone && out.rows[i].mean_gap <= out.rows[i - 1].mean_gap;
    out.slope = all_zero ? 0.0 : numeric::log_log_slope(ns, gs);
    return out;
}

// ---------------------------------------------------------------------------
// Entropy identity
// ---------------------------------------------------------------------------

struct EntropyCheck {
    numeric::MeanSe lhs;        ///< -E_P[Z ln Z], Z = dQ^ME/dP
    double rhs = 0.0;           ///< ln zeta(0, Y_0) / (1 - rho^2)
    double z = 0.0;
    numeric::MeanSe weight_mean;  ///< E_P[Z], should be 1
    double threshold = 3.0;
    bool pass = false;

    nlohmann::json statistics() const {
        return {{"lhs", lhs.mean}, {"lhs_se", lhs.se}, {"rhs", rhs}, {"z", z},
                {"weight_mean", weight_mean.mean}, {"weight_se", weight_mean.se}, {"threshold", threshold}};
    }
};

inline EntropyCheck entropy_identity_check(const IncompleteMarketModel& model, const PDESolution& f,
                                           const PDESolution& zeta, const PathBundle& bundle, double threshold = 3.0) {
    const MinimalEntropy me = me_chi(model, f, bundle);
    std::vector<double> zlz(bundle.n_paths()), w(bundle.n_paths());
    for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
        const double l = me.log_density[p];
        w[p] = std::exp(l);
        zlz[p] = -w[p] * l;
    }
    EntropyCheck c;
    c.lhs = numeric::mean_se(zlz);
    c.weight_mean = numeric::mean_se(w);
    c.rhs = std::log(zeta.interpolate(0.0, model.y0())) / (1.0 - model.rho() * model.rho());
    c.z = c.lhs.z_against(c.rhs);
    c.threshold = threshold;
    c.pass = std::abs(c.z) <= threshold;
    return c;
}

/// {test, inputs_digest, statistics, pass}.
inline nlohmann::json test_record(const std::string& test, const std::string& digest, nlohmann::json statistics,
                                  bool pass) {
    return {{"test", test}, {"inputs_digest", digest}, {"statistics", std::move(statistics)}, {"pass", pass}};
}

}  // namespace cara
