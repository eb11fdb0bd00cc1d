#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cara/errors.hpp"
#include "cara/numeric.hpp"
#include "cara/rng.hpp"

namespace cara {

/// Coefficient function of time and one state variable (the factor y for the
/// incomplete market, the price S for the complete market).
using Coefficient = std::function<double(double, double)>;

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double x) const { return x >= lo && x <= hi; }
    bool contains(const Interval& other) const { return other.lo >= lo && other.hi <= hi; }
    double width() const { return hi - lo; }
};

// ---------------------------------------------------------------------------
// Market models
// ---------------------------------------------------------------------------

/// Single-factor incomplete market:
///   dS = mu(t,Y) S dt + sigma(t,Y) S dW,   dY = b(t,Y) dt + a(t,Y) dW^Y,
/// with d<W, W^Y> = rho dt.
class IncompleteMarketModel {
public:
    struct Spec {
        Coefficient mu, sigma, b, a;
        /// Optional closed form of mu/sigma. Used as-is when given.
        Coefficient sharpe;
        double rho = 0.0;
        double horizon = 1.0;
        double y0 = 0.0;
        double s0 = 1.0;
        /// Declared domain of the factor; validation grids must lie inside it.
        Interval domain{};
        /// Euler paths of Y are clamped at this level when set.
        std::optional<double> state_floor;
        std::string label = "incomplete";
    };

    explicit IncompleteMarketModel(Spec spec) : spec_(std::move(spec)) {
        if (!spec_.mu || !spec_.sigma || !spec_.b || !spec_.a)
            throw ParamError("incomplete model: every coefficient function must be set");
        if (!(spec_.rho > -1.0 && spec_.rho < 1.0))
            throw ParamError("incomplete model: correlation must lie strictly inside (-1, 1)");
        if (!(spec_.horizon > 0.0)) throw ParamError("incomplete model: horizon must be positive");
        if (!(spec_.s0 > 0.0)) throw ParamError("incomplete model: initial price must be positive");
        if (!spec_.domain.contains(spec_.y0)) throw DomainError("incomplete model: y0 outside declared domain");
    }

    double mu(double t, double y) const { return spec_.mu(t, y); }
    double sigma(double t, double y) const { return spec_.sigma(t, y); }
    double b(double t, double y) const { return spec_.b(t, y); }
    double a(double t, double y) const { return spec_.a(t, y); }
    double lambda(double t, double y) const {
        return spec_.sharpe ? spec_.sharpe(t, y) : spec_.mu(t, y) / spec_.sigma(t, y);
    }

    double rho() const { return spec_.rho; }
    double horizon() const { return spec_.horizon; }
    double y0() const { return spec_.y0; }
    double s0() const { return spec_.s0; }
    const Interval& domain() const { return spec_.domain; }
    const std::optional<double>& state_floor() const { return spec_.state_floor; }
    const std::string& label() const { return spec_.label; }

    const Spec& spec() const { return spec_; }

private:
    Spec spec_;
};

/// Complete market: dS = mu(t,S) S dt + sigma(t,S) S dW.
class CompleteMarketModel {
public:
    struct Spec {
        Coefficient mu, sigma;
        Coefficient sharpe;
        double horizon = 1.0;
        double s0 = 1.0;
        Interval domain{0.0, std::numeric_limits<double>::infinity()};
        std::string label = "complete";
    };

    explicit CompleteMarketModel(Spec spec) : spec_(std::move(spec)) {
        if (!spec_.mu || !spec_.sigma) throw ParamError("complete model: mu and sigma must be set");
        if (!(spec_.horizon > 0.0)) throw ParamError("complete model: horizon must be positive");
        if (!(spec_.s0 > 0.0)) throw ParamError("complete model: initial price must be positive");
        if (!spec_.domain.contains(spec_.s0)) throw DomainError("complete model: s0 outside declared domain");
    }

    double mu(double t, double s) const { return spec_.mu(t, s); }
    double sigma(double t, double s) const { return spec_.sigma(t, s); }
    double lambda(double t, double s) const {
        return spec_.sharpe ? spec_.sharpe(t, s) : spec_.mu(t, s) / spec_.sigma(t, s);
    }
    double horizon() const { return spec_.horizon; }
    double s0() const { return spec_.s0; }
    const Interval& domain() const { return spec_.domain; }
    const std::string& label() const { return spec_.label; }
    const Spec& spec() const { return spec_; }

private:
    Spec spec_;
};

/// Parameters of the autonomous family mu(y) = mu y^{1/(2l)+1/2},
/// sigma(y) = y^{1/(2l)}, b(y) = m - y, a(y) = beta sqrt(y).
struct SolvableExampleParams {
    double mu = 0.5;
    double beta = 0.3;
    double ell = 1.0;
    double m = 0.5;
    double rho = -0.5;
    double horizon = 1.0;
    double y0 = 0.5;
    double s0 = 1.0;
    double y_floor = 1e-6;

    bool operator==(const SolvableExampleParams&) const = default;

    double discriminant() const { return 1.0 + beta * beta * mu * mu + 2.0 * rho * mu * beta; }

    void validate() const {
        if (!(mu > 0.0)) throw ParamError("solvable example: mu must be positive");
        if (!(beta > 0.0)) throw ParamError("solvable example: beta must be positive");
        if (ell == 0.0) throw ParamError("solvable example: ell must be nonzero");
        if (!(m > 0.5 * beta * beta)) throw ParamError("solvable example: need m > beta^2/2");
        if (!(rho > -1.0 && rho < 1.0)) throw ParamError("solvable example: rho must lie in (-1, 1)");
        if (!(horizon > 0.0)) throw ParamError("solvable example: horizon must be positive");
        if (!(y0 > 0.0)) throw ParamError("solvable example: y0 must be positive");
        if (!(y_floor > 0.0)) throw ParamError("solvable example: y_floor must be positive");
        if (!(discriminant() > 0.0)) throw ParamError("solvable example: 1 + beta^2 mu^2 + 2 rho mu beta must be positive");
    }
};

inline IncompleteMarketModel build_solvable_example(const SolvableExampleParams& p) {
    p.validate();
    const double mu = p.mu, beta = p.beta, m = p.m;
    const double vol_power = 1.0 / (2.0 * p.ell);
    IncompleteMarketModel::Spec s;
    s.mu = [mu, vol_power](double, double y) { return mu * std::pow(y, vol_power + 0.5); };
    s.sigma = [vol_power](double, double y) { return std::pow(y, vol_power); };
    s.b = [m](double, double y) { return m - y; };
    s.a = [beta](double, double y) { return beta * std::sqrt(y); };
    // The Sharpe ratio mu sqrt(y) does not depend on ell.
    s.sharpe = [mu](double, double y) { return mu * std::sqrt(y); };
    s.rho = p.rho;
    s.horizon = p.horizon;
    s.y0 = p.y0;
    s.s0 = p.s0;
    s.domain = Interval{p.y_floor, std::numeric_limits<double>::infinity()};
    s.state_floor = p.y_floor;
    s.label = "solvable(ell=" + numeric::format_double(p.ell) + ")";
    return IncompleteMarketModel(std::move(s));
}

// ---------------------------------------------------------------------------
// Assumption checks by grid sampling
// ---------------------------------------------------------------------------

struct SamplingGrid {
    Interval time{0.0, 1.0};
    Interval space{0.0, 1.0};
    std::size_t n_time = 200;
    std::size_t n_space = 200;
};

struct ValidationBounds {
    double sigma_lo = 1e-6;
    double coefficient_hi = 1e6;
    double sharpe_hi = 1e6;
};

struct BoundCheck {
    std::string name;
    bool passed = true;
    double worst_value = 0.0;
    double worst_t = 0.0;
    double worst_x = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<BoundCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.passed; });
    }
    const BoundCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail {

/// Tracks the grid point farthest on the wrong side of a bound; `excess`
/// is positive when the bound is violated, NaN always counts as violated.
class BoundTracker {
public:
    BoundTracker(std::string name, std::string message) {
        check_.name = std::move(name);
        message_ = std::move(message);
    }
    void observe(double value, double excess, double t, double x) {
        const bool bad = std::isnan(excess) || !std::isfinite(value) || excess > 0.0;
        const double score = std::isnan(excess) || !std::isfinite(value) ? INFINITY : excess;
        if (first_ || score > worst_) {
            first_ = false;
            worst_ = score;
            check_.worst_value = value;
            check_.worst_t = t;
            check_.worst_x = x;
        }
        if (bad) check_.passed = false;
    }
    BoundCheck finish() {
        if (!check_.passed) check_.message = message_;
        return check_;
    }

private:
    BoundCheck check_;
    std::string message_;
    double worst_ = 0.0;
    bool first_ = true;
};

template <class Model>
ValidationReport validate_coefficients(const Model& model, const SamplingGrid& grid, const ValidationBounds& bounds,
                                       bool has_factor) {
    if (grid.n_time == 0 || grid.n_space == 0) throw ParamError("validate_model: sampling grid is empty");
    if (!model.domain().contains(grid.space))
        throw DomainError("validate_model: sampling grid lies outside the model's declared domain");
    if (grid.time.lo < 0.0 || grid.time.hi > model.horizon() + 1e-12)
        throw DomainError("validate_model: sampling times outside [0, T]");

    BoundTracker vol_lo("sigma_lower", "volatility lower bound violated");
    BoundTracker vol_hi("sigma_upper", "volatility upper bound violated");
    BoundTracker drift("mu_bounded", "drift bound violated");
    BoundTracker sharpe("sharpe_bounded", "Sharpe ratio bound violated");
    BoundTracker fb("b_bounded", "factor drift bound violated");
    BoundTracker fa("a_bounded", "factor volatility bound violated");

    const auto ts = numeric::linspace(grid.time.lo, grid.time.hi, grid.n_time);
    const auto xs = numeric::linspace(grid.space.lo, grid.space.hi, grid.n_space);
    for (double t : ts) {
        for (double x : xs) {
            const double s = model.sigma(t, x);
            vol_lo.observe(s, bounds.sigma_lo - s, t, x);
            vol_hi.observe(s, s - bounds.coefficient_hi, t, x);
            const double m = model.mu(t, x);
            drift.observe(m, std::abs(m) - bounds.coefficient_hi, t, x);
            const double l = model.lambda(t, x);
            sharpe.observe(l, std::abs(l) - bounds.sharpe_hi, t, x);
            if constexpr (requires { model.b(t, x); }) {
                if (has_factor) {
                    const double bv = model.b(t, x);
                    fb.observe(bv, std::abs(bv) - bounds.coefficient_hi, t, x);
                    const double av = model.a(t, x);
                    fa.observe(av, std::abs(av) - bounds.coefficient_hi, t, x);
                }
            }
        }
    }
    ValidationReport report;
    report.checks = {vol_lo.finish(), vol_hi.finish(), drift.finish(), sharpe.finish()};
    if (has_factor) {
        report.checks.push_back(fb.finish());
        report.checks.push_back(fa.finish());
    }
    return report;
}

}  // namespace detail

inline ValidationReport validate_model(const IncompleteMarketModel& model, const SamplingGrid& grid,
                                       const ValidationBounds& bounds = {}) {
    return detail::validate_coefficients(model, grid, bounds, true);
}

inline ValidationReport validate_model(const CompleteMarketModel& model, const SamplingGrid& grid,
                                       const ValidationBounds& bounds = {}) {
    return detail::validate_coefficients(model, grid, bounds, false);
}

// ---------------------------------------------------------------------------
// Players and type distributions
// ---------------------------------------------------------------------------

/// Risk tolerance delta_T = payoff(S_T), bounded below by `lower_bound`.
struct TerminalPayoff {
    std::function<double(double)> fn;
    double lower_bound = 0.0;
    std::string label;

    double operator()(double s) const { return fn(s); }
};

/// Affine payoff intercept + slope * S.
inline TerminalPayoff affine_payoff(double intercept, double slope) {
    if (!(intercept > 0.0) || slope < 0.0)
        throw ParamError("affine payoff needs a positive intercept and a nonnegative slope");
    TerminalPayoff p;
    p.fn = [intercept, slope](double s) { return intercept + slope * s; };
    p.lower_bound = intercept;
    p.label = numeric::format_double(intercept) + "+" + numeric::format_double(slope) + "*S";
    return p;
}

class RiskTolerance {
public:
    explicit RiskTolerance(double constant) : value_(constant) {}
    explicit RiskTolerance(TerminalPayoff payoff) : value_(std::move(payoff)) {}

    bool is_constant() const { return std::holds_alternative<double>(value_); }
    double constant() const {
        if (!is_constant()) throw ParamError("risk tolerance is functional, not constant");
        return std::get<double>(value_);
    }
    const TerminalPayoff& payoff() const {
        if (is_constant()) throw ParamError("risk tolerance is constant, not functional");
        return std::get<TerminalPayoff>(value_);
    }
    /// delta_T given the terminal price.
    double terminal(double s) const { return is_constant() ? std::get<double>(value_) : payoff()(s); }

private:
    std::variant<double, TerminalPayoff> value_;
};

/// (initial wealth, risk tolerance, interaction weight).
struct PlayerType {
    double x0 = 0.0;
    RiskTolerance delta{1.0};
    double c = 0.0;

    static PlayerType constant(double x0, double delta, double c) {
        if (!(delta > 0.0)) throw ParamError("player: constant risk tolerance must be positive");
        if (!(c <= 1.0)) throw ParamError("player: interaction weight must be <= 1");
        if (!std::isfinite(x0)) throw ParamError("player: initial wealth must be finite");
        return PlayerType{x0, RiskTolerance(delta), c};
    }

    /// Functional risk tolerance, checked against its lower bound on a
    /// log-spaced sample of prices in `sample`.
    static PlayerType functional(double x0, TerminalPayoff payoff, double c, Interval sample = {1e-2, 1e3}) {
        if (!payoff.fn) throw ParamError("player: payoff function missing");
        if (!(payoff.lower_bound > 0.0)) throw ParamError("player: payoff lower bound must be positive");
        if (!(c <= 1.0)) throw ParamError("player: interaction weight must be <= 1");
        if (!std::isfinite(x0)) throw ParamError("player: initial wealth must be finite");
        if (!(sample.lo > 0.0 && sample.hi > sample.lo)) throw ParamError("player: bad payoff sample range");
        const auto ls = numeric::linspace(std::log(sample.lo), std::log(sample.hi), 200);
        for (double l : ls) {
            const double s = std::exp(l);
            const double v = payoff(s);
            if (!(v >= payoff.lower_bound))
                throw ParamError("player: payoff " + payoff.label + " falls below its lower bound at S=" +
                                 numeric::format_double(s));
        }
        return PlayerType{x0, RiskTolerance(std::move(payoff)), c};
    }
};

struct AggregateStats {
    double phi = 0.0;  ///< mean risk tolerance
    double psi = 0.0;  ///< mean interaction weight
    bool psi_is_one() const { return psi >= 1.0; }
};

namespace detail {
/// Order-independent mean: values are sorted, then averaged relative to the
/// smallest one.
inline double symmetric_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double ref = v.front();
    const double s = numeric::pairwise_sum(0, v.size(), [&](std::size_t i) { return v[i] - ref; });
    return ref + s / static_cast<double>(v.size());
}
}  // namespace detail

inline AggregateStats aggregate_stats(const std::vector<PlayerType>& players) {
    if (players.empty()) throw ParamError("aggregate_stats: need at least one player");
    std::vector<double> d, c;
    d.reserve(players.size());
    c.reserve(players.size());
    for (const auto& p : players) {
        d.push_back(p.delta.constant());
        c.push_back(p.c);
    }
    return AggregateStats{detail::symmetric_mean(std::move(d)), detail::symmetric_mean(std::move(c))};
}

/// Mean interaction weight, valid for constant and functional players alike.
inline double mean_interaction(const std::vector<PlayerType>& players) {
    if (players.empty()) throw ParamError("mean_interaction: need at least one player");
    std::vector<double> c;
    for (const auto& p : players) c.push_back(p.c);
    return detail::symmetric_mean(std::move(c));
}

/// One-dimensional law with known first two moments.
struct ScalarLaw {
    enum class Kind { Constant, Uniform, Normal };
    Kind kind = Kind::Constant;
    double a = 0.0;  ///< value | lower end | mean
    double b = 0.0;  ///< unused | upper end | standard deviation

    static ScalarLaw constant(double v) { return {Kind::Constant, v, 0.0}; }
    static ScalarLaw uniform(double lo, double hi) {
        if (!(hi >= lo)) throw ParamError("uniform law needs lo <= hi");
        return {Kind::Uniform, lo, hi};
    }
    static ScalarLaw normal(double mean, double sd) {
        if (!(sd >= 0.0)) throw ParamError("normal law needs sd >= 0");
        return {Kind::Normal, mean, sd};
    }

    double mean() const {
        switch (kind) {
            case Kind::Constant: return a;
            case Kind::Uniform: return 0.5 * (a + b);
            default: return a;
        }
    }
    double variance() const {
        switch (kind) {
            case Kind::Constant: return 0.0;
            case Kind::Uniform: return (b - a) * (b - a) / 12.0;
            default: return b * b;
        }
    }
    double support_lo() const {
        return kind == Kind::Normal && b > 0 ? -INFINITY : a;
    }
    double support_hi() const {
        switch (kind) {
            case Kind::Constant: return a;
            case Kind::Uniform: return b;
            default: return b > 0 ? INFINITY : a;
        }
    }

    template <class Gen>
    double sample(Gen& g, rng::StandardNormal& normal) const {
        switch (kind) {
            case Kind::Constant: return a;
            case Kind::Uniform: return a + (b - a) * rng::StandardNormal::to_unit(g());
            default: return a + b * normal(g);
        }
    }
};

/// Finite mixture of affine payoffs intercept + slope * S, used as the risk
/// tolerance law of complete-market populations.
struct PayoffMixture {
    struct Component {
        double intercept = 1.0;
        double slope = 0.0;
        double weight = 1.0;
    };
    std::vector<Component> components;
};

/// Law of a player's type. Every draw is independent; draw k of a given seed
/// is the same no matter how many draws are requested.
class TypeDistribution {
public:
    TypeDistribution(ScalarLaw wealth, ScalarLaw tolerance, ScalarLaw interaction)
        : wealth_(wealth), tolerance_(tolerance), interaction_(interaction) {
        if (!(tolerance.support_lo() > 0.0)) throw ParamError("type distribution: risk tolerance must be positive");
        check_interaction();
    }
    TypeDistribution(ScalarLaw wealth, PayoffMixture tolerance, ScalarLaw interaction)
        : wealth_(wealth), tolerance_(std::move(tolerance)), interaction_(interaction) {
        const auto& mix = std::get<PayoffMixture>(tolerance_);
        if (mix.components.empty()) throw ParamError("type distribution: empty payoff mixture");
        double total = 0.0;
        for (const auto& c : mix.components) {
            affine_payoff(c.intercept, c.slope);
            if (!(c.weight > 0.0)) throw ParamError("type distribution: mixture weights must be positive");
            total += c.weight;
        }
        cumulative_.clear();
        double acc = 0.0;
        for (const auto& c : mix.components) {
            acc += c.weight / total;
            cumulative_.push_back(acc);
        }
        cumulative_.back() = 1.0;
        check_interaction();
    }

    bool constant_tolerance() const { return std::holds_alternative<ScalarLaw>(tolerance_); }
    const ScalarLaw& wealth_law() const { return wealth_; }
    const ScalarLaw& interaction_law() const { return interaction_; }
    const ScalarLaw& tolerance_law() const { return std::get<ScalarLaw>(tolerance_); }
    const PayoffMixture& payoff_mixture() const { return std::get<PayoffMixture>(tolerance_); }

    double mean_wealth() const { return wealth_.mean(); }
    double mean_interaction() const { return interaction_.mean(); }
    double mean_tolerance() const { return tolerance_law().mean(); }

    /// Draws `count` types starting at draw index `first`. For payoff
    /// mixtures `components`, when given, receives the mixture index of
    /// each draw.
    std::vector<PlayerType> sample(std::size_t count, std::uint64_t seed, std::uint64_t first = 0,
                                   std::vector<std::size_t>* components = nullptr) const {
        std::vector<PlayerType> out;
        out.reserve(count);
        if (components) components->assign(count, 0);
        for (std::size_t k = 0; k < count; ++k) {
            auto g = rng::stream(seed, first + k, /*domain=*/0x7e);
            rng::StandardNormal normal;
            const double x = wealth_.sample(g, normal);
            const double c = interaction_.sample(g, normal);
            if (constant_tolerance()) {
                const double d = tolerance_law().sample(g, normal);
                out.push_back(PlayerType{x, RiskTolerance(d), c});
            } else {
                const double u = rng::StandardNormal::to_unit(g());
                const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
                const auto idx = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                    it - cumulative_.begin(), static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
                const auto& comp = payoff_mixture().components[idx];
                out.push_back(PlayerType{x, RiskTolerance(affine_payoff(comp.intercept, comp.slope)), c});
                if (components) (*components)[k] = idx;
            }
        }
        return out;
    }

private:
    void check_interaction() const {
        if (!(interaction_.support_hi() <= 1.0))
            throw ParamError("type distribution: interaction weights must be <= 1");
    }

    ScalarLaw wealth_;
    std::variant<ScalarLaw, PayoffMixture> tolerance_;
    ScalarLaw interaction_;
    std::vector<double> cumulative_;
};

}  // namespace cara
