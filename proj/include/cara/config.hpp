#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cara/errors.hpp"
#include "cara/expression.hpp"
#include "cara/io.hpp"
#include "cara/market.hpp"

namespace cara::config {

using nlohmann::json;

struct LawConfig {
    std::string law = "constant";  ///< constant | uniform | normal
    double a = 0.0;                ///< value, lo or mean
    double b = 0.0;                ///< hi or sd
    bool operator==(const LawConfig&) const = default;
};

struct MixtureComponentConfig {
    double intercept = 1.0;
    double slope = 0.0;
    double weight = 1.0;
    bool operator==(const MixtureComponentConfig&) const = default;
};

struct TypesConfig {
    LawConfig x;
    std::optional<LawConfig> delta;             ///< constant risk tolerances
    std::vector<MixtureComponentConfig> mixture;  ///< or a payoff mixture
    LawConfig c;
    std::size_t samples = 10000;
    std::size_t stored = 16;
    bool operator==(const TypesConfig&) const = default;
};

struct PlayerConfig {
    double x0 = 0.0;
    double c = 0.0;
    double delta = 1.0;
    std::string delta_expr;  ///< payoff of S; overrides `delta` when set
    double delta_floor = 0.0;
    bool operator==(const PlayerConfig&) const = default;
};

struct ModelConfig {
    /// solvable | incomplete | gbm | complete
    std::string family = "solvable";
    SolvableExampleParams solvable;
    std::string mu = "0", sigma = "1", b = "0", a = "0";  ///< expressions in (t, y) or (t, S)
    double rho = 0.0, horizon = 1.0, y0 = 0.0, s0 = 1.0;
    double domain_lo = -std::numeric_limits<double>::infinity();
    double domain_hi = std::numeric_limits<double>::infinity();
    std::optional<double> state_floor;
    double gbm_mu = 0.1, gbm_sigma = 0.2;
    bool operator==(const ModelConfig&) const = default;

    bool complete() const { return family == "gbm" || family == "complete"; }
};

struct SimulationConfig {
    std::size_t paths = 10000;
    std::size_t steps = 50;
    bool operator==(const SimulationConfig&) const = default;
};

struct PdeConfig {
    std::size_t n_t = 400, n_x = 400;
    std::optional<double> x_lo, x_hi;
    bool operator==(const PdeConfig&) const = default;
};

struct VerifyConfig {
    std::vector<std::string> tests{"nash"};  ///< nash | drift | entropy | convergence | utility
    double deviation_threshold = 2.0;
    double drift_threshold = 3.0;
    double entropy_threshold = 3.0;
    std::vector<double> scales{0.5, 0.9, 1.0, 1.1, 1.5};
    std::vector<std::size_t> convergence_N{10, 100, 1000, 10000};
    std::size_t resamples = 100;
    bool operator==(const VerifyConfig&) const = default;
};

struct Figure1Config {
    std::size_t N = 25;
    double phi = 6.0;
    double c_lo = -1.0, c_hi = 1.0;
    std::size_t c_n = 21;
    double psi_lo = -1.0, psi_hi = 0.9;
    std::size_t psi_n = 20;
    bool operator==(const Figure1Config&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string out = "out";
    std::string format = "csv";
    std::size_t samples = 100;  ///< paths written to per-path outputs
    ModelConfig model;
    std::vector<PlayerConfig> players;
    std::optional<TypesConfig> types;
    SimulationConfig simulation;
    PdeConfig pde;
    VerifyConfig verify;
    Figure1Config figure1;
    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

/// Reads keys of one table, rejecting anything not consumed.
class Table {
public:
    Table(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be a table");
    }
    ~Table() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key " + prefix() + it.key());
    }

    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }
    const json& raw(const std::string& k) {
        seen_.insert(k);
        return j_.at(k);
    }
    template <class T>
    void get(const std::string& k, T& out) {
        if (!has(k)) return;
        try {
            out = j_.at(k).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("bad value for " + prefix() + k);
        }
    }
    template <class T>
    void get(const std::string& k, std::optional<T>& out) {
        if (!has(k)) return;
        T v{};
        get(k, v);
        out = v;
    }
    std::string child(const std::string& k) const { return prefix() + k; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }
    std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline double number(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError("bad value for " + what);
}
inline json number_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline LawConfig read_law(const json& j, const std::string& path) {
    Table t(j, path);
    LawConfig l;
    t.get("law", l.law);
    if (l.law == "constant") {
        t.get("value", l.a);
    } else if (l.law == "uniform") {
        t.get("lo", l.a);
        t.get("hi", l.b);
    } else if (l.law == "normal") {
        t.get("mean", l.a);
        t.get("sd", l.b);
    } else {
        throw ConfigError(path + ".law must be constant, uniform or normal");
    }
    return l;
}
inline json write_law(const LawConfig& l) {
    if (l.law == "constant") return {{"law", l.law}, {"value", l.a}};
    if (l.law == "uniform") return {{"law", l.law}, {"lo", l.a}, {"hi", l.b}};
    return {{"law", l.law}, {"mean", l.a}, {"sd", l.b}};
}

}  // namespace detail

inline ExperimentConfig from_json(const json& j) {
    using detail::Table;
    ExperimentConfig c;
    Table root(j, "");
    root.get("seed", c.seed);
    root.get("threads", c.threads);
    root.get("out", c.out);
    root.get("format", c.format);
    root.get("samples", c.samples);
    if (c.format != "csv" && c.format != "json") throw ConfigError("format must be csv or json");

    if (root.has("model")) {
        Table t(root.raw("model"), "model");
        auto& m = c.model;
        t.get("family", m.family);
        if (m.family == "solvable") {
            auto& p = m.solvable;
            t.get("mu", p.mu);
            t.get("beta", p.beta);
            t.get("ell", p.ell);
            t.get("m", p.m);
            t.get("rho", p.rho);
            t.get("horizon", p.horizon);
            t.get("y0", p.y0);
            t.get("s0", p.s0);
            t.get("y_floor", p.y_floor);
        } else if (m.family == "incomplete") {
            t.get("mu", m.mu);
            t.get("sigma", m.sigma);
            t.get("b", m.b);
            t.get("a", m.a);
            t.get("rho", m.rho);
            t.get("horizon", m.horizon);
            t.get("y0", m.y0);
            t.get("s0", m.s0);
            if (t.has("domain_lo")) m.domain_lo = detail::number(t.raw("domain_lo"), "model.domain_lo");
            if (t.has("domain_hi")) m.domain_hi = detail::number(t.raw("domain_hi"), "model.domain_hi");
            t.get("state_floor", m.state_floor);
        } else if (m.family == "gbm") {
            t.get("mu", m.gbm_mu);
            t.get("sigma", m.gbm_sigma);
            t.get("horizon", m.horizon);
            t.get("s0", m.s0);
        } else if (m.family == "complete") {
            t.get("mu", m.mu);
            t.get("sigma", m.sigma);
            t.get("horizon", m.horizon);
            t.get("s0", m.s0);
        } else {
            throw ConfigError("model.family must be solvable, incomplete, gbm or complete");
        }
    }

    if (root.has("players")) {
        const json& arr = root.raw("players");
        if (!arr.is_array()) throw ConfigError("players must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Table t(arr[i], "players[" + std::to_string(i) + "]");
            PlayerConfig p;
            t.get("x0", p.x0);
            t.get("c", p.c);
            if (t.has("delta")) {
                const json& d = t.raw("delta");
                if (d.is_string()) {
                    p.delta_expr = d.get<std::string>();
                    t.get("delta_floor", p.delta_floor);
                } else {
                    p.delta = detail::number(d, t.child("delta"));
                }
            }
            c.players.push_back(p);
        }
    }

    if (root.has("types")) {
        Table t(root.raw("types"), "types");
        TypesConfig ty;
        if (t.has("x")) ty.x = detail::read_law(t.raw("x"), "types.x");
        if (t.has("c")) ty.c = detail::read_law(t.raw("c"), "types.c");
        if (t.has("delta")) ty.delta = detail::read_law(t.raw("delta"), "types.delta");
        if (t.has("mixture")) {
            const json& arr = t.raw("mixture");
            if (!arr.is_array()) throw ConfigError("types.mixture must be an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Table mt(arr[i], "types.mixture[" + std::to_string(i) + "]");
                MixtureComponentConfig mc;
                mt.get("intercept", mc.intercept);
                mt.get("slope", mc.slope);
                mt.get("weight", mc.weight);
                ty.mixture.push_back(mc);
            }
        }
        if (ty.delta && !ty.mixture.empty()) throw ConfigError("types: give either delta or mixture, not both");
        if (!ty.delta && ty.mixture.empty()) ty.delta = LawConfig{"constant", 1.0, 0.0};
        t.get("samples", ty.samples);
        t.get("stored", ty.stored);
        c.types = ty;
    }

    if (root.has("simulation")) {
        Table t(root.raw("simulation"), "simulation");
        t.get("paths", c.simulation.paths);
        t.get("steps", c.simulation.steps);
    }
    if (root.has("pde")) {
        Table t(root.raw("pde"), "pde");
        t.get("n_t", c.pde.n_t);
        t.get("n_x", c.pde.n_x);
        t.get("x_lo", c.pde.x_lo);
        t.get("x_hi", c.pde.x_hi);
    }
    if (root.has("verify")) {
        Table t(root.raw("verify"), "verify");
        auto& v = c.verify;
        t.get("tests", v.tests);
        t.get("deviation_threshold", v.deviation_threshold);
        t.get("drift_threshold", v.drift_threshold);
        t.get("entropy_threshold", v.entropy_threshold);
        t.get("scales", v.scales);
        t.get("convergence_N", v.convergence_N);
        t.get("resamples", v.resamples);
        static const std::set<std::string> known{"nash", "drift", "entropy", "convergence", "utility"};
        for (const auto& s : v.tests)
            if (!known.count(s)) throw ConfigError("verify.tests: unknown test " + s);
        for (double th : {v.deviation_threshold, v.drift_threshold, v.entropy_threshold})
            if (!(th > 0.0)) throw ConfigError("verify: thresholds must be positive");
    }
    if (root.has("figure1")) {
        Table t(root.raw("figure1"), "figure1");
        auto& f = c.figure1;
        t.get("N", f.N);
        t.get("phi", f.phi);
        t.get("c_lo", f.c_lo);
        t.get("c_hi", f.c_hi);
        t.get("c_n", f.c_n);
        t.get("psi_lo", f.psi_lo);
        t.get("psi_hi", f.psi_hi);
        t.get("psi_n", f.psi_n);
    }
    return c;
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["out"] = c.out;
    j["format"] = c.format;
    j["samples"] = c.samples;

    const auto& m = c.model;
    json mj{{"family", m.family}};
    if (m.family == "solvable") {
        const auto& p = m.solvable;
        mj.update({{"mu", p.mu}, {"beta", p.beta}, {"ell", p.ell}, {"m", p.m}, {"rho", p.rho},
                   {"horizon", p.horizon}, {"y0", p.y0}, {"s0", p.s0}, {"y_floor", p.y_floor}});
    } else if (m.family == "incomplete") {
        mj.update({{"mu", m.mu}, {"sigma", m.sigma}, {"b", m.b}, {"a", m.a}, {"rho", m.rho},
                   {"horizon", m.horizon}, {"y0", m.y0}, {"s0", m.s0},
                   {"domain_lo", detail::number_json(m.domain_lo)}, {"domain_hi", detail::number_json(m.domain_hi)}});
        if (m.state_floor) mj["state_floor"] = *m.state_floor;
    } else if (m.family == "gbm") {
        mj.update({{"mu", m.gbm_mu}, {"sigma", m.gbm_sigma}, {"horizon", m.horizon}, {"s0", m.s0}});
    } else {
        mj.update({{"mu", m.mu}, {"sigma", m.sigma}, {"horizon", m.horizon}, {"s0", m.s0}});
    }
    j["model"] = mj;

    j["players"] = json::array();
    for (const auto& p : c.players) {
        json pj{{"x0", p.x0}, {"c", p.c}};
        if (p.delta_expr.empty()) {
            pj["delta"] = p.delta;
        } else {
            pj["delta"] = p.delta_expr;
            pj["delta_floor"] = p.delta_floor;
        }
        j["players"].push_back(pj);
    }

    if (c.types) {
        const auto& t = *c.types;
        json tj{{"x", detail::write_law(t.x)}, {"c", detail::write_law(t.c)}, {"samples", t.samples},
                {"stored", t.stored}};
        if (t.delta) tj["delta"] = detail::write_law(*t.delta);
        for (const auto& mc : t.mixture)
            tj["mixture"].push_back({{"intercept", mc.intercept}, {"slope", mc.slope}, {"weight", mc.weight}});
        j["types"] = tj;
    }

    j["simulation"] = {{"paths", c.simulation.paths}, {"steps", c.simulation.steps}};
    json pde{{"n_t", c.pde.n_t}, {"n_x", c.pde.n_x}};
    if (c.pde.x_lo) pde["x_lo"] = *c.pde.x_lo;
    if (c.pde.x_hi) pde["x_hi"] = *c.pde.x_hi;
    j["pde"] = pde;
    const auto& v = c.verify;
    j["verify"] = {{"tests", v.tests},
                   {"deviation_threshold", v.deviation_threshold},
                   {"drift_threshold", v.drift_threshold},
                   {"entropy_threshold", v.entropy_threshold},
                   {"scales", v.scales},
                   {"convergence_N", v.convergence_N},
                   {"resamples", v.resamples}};
    const auto& f = c.figure1;
    j["figure1"] = {{"N", f.N},         {"phi", f.phi},       {"c_lo", f.c_lo},   {"c_hi", f.c_hi},
                    {"c_n", f.c_n},     {"psi_lo", f.psi_lo}, {"psi_hi", f.psi_hi}, {"psi_n", f.psi_n}};
    return j;
}

inline ExperimentConfig parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config does not parse: ") + e.what());
    }
    return from_json(j);
}

inline ExperimentConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

/// Digest of the canonical serialization, so equivalent files share it.
inline std::string digest(const ExperimentConfig& c) { return io::hex_digest(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Building library objects
// ---------------------------------------------------------------------------

inline Coefficient coefficient(const std::string& src, const char* state) {
    auto e = std::make_shared<Expression>(Expression::parse(src, {"t", state}));
    return [e](double t, double x) { return (*e)(t, x); };
}

inline IncompleteMarketModel incomplete_model(const ModelConfig& m) {
    if (m.family == "solvable") return build_solvable_example(m.solvable);
    if (m.family != "incomplete") throw ConfigError("model family " + m.family + " is not an incomplete market");
    IncompleteMarketModel::Spec s;
    s.mu = coefficient(m.mu, "y");
    s.sigma = coefficient(m.sigma, "y");
    s.b = coefficient(m.b, "y");
    s.a = coefficient(m.a, "y");
    s.rho = m.rho;
    s.horizon = m.horizon;
    s.y0 = m.y0;
    s.s0 = m.s0;
    s.domain = {m.domain_lo, m.domain_hi};
    s.state_floor = m.state_floor;
    s.label = "incomplete";
    return IncompleteMarketModel(std::move(s));
}

inline CompleteMarketModel complete_model(const ModelConfig& m) {
    CompleteMarketModel::Spec s;
    s.horizon = m.horizon;
    s.s0 = m.s0;
    if (m.family == "gbm") {
        const double mu = m.gbm_mu, sig = m.gbm_sigma;
        s.mu = [mu](double, double) { return mu; };
        s.sigma = [sig](double, double) { return sig; };
        s.label = "gbm";
    } else if (m.family == "complete") {
        s.mu = coefficient(m.mu, "S");
        s.sigma = coefficient(m.sigma, "S");
    } else {
        throw ConfigError("model family " + m.family + " is not a complete market");
    }
    return CompleteMarketModel(std::move(s));
}

inline TerminalPayoff payoff(const PlayerConfig& p) {
    auto e = std::make_shared<Expression>(Expression::parse(p.delta_expr, {"S"}));
    TerminalPayoff out;
    out.fn = [e](double s) { return (*e)(s); };
    out.lower_bound = p.delta_floor;
    out.label = p.delta_expr;
    return out;
}

inline std::vector<PlayerType> players(const ExperimentConfig& c) {
    std::vector<PlayerType> out;
    for (const auto& p : c.players) {
        if (p.delta_expr.empty()) {
            if (c.model.complete()) throw ConfigError("complete-market players need a payoff expression for delta");
            out.push_back(PlayerType::constant(p.x0, p.delta, p.c));
        } else {
            if (!c.model.complete()) throw ConfigError("incomplete-market players need a constant delta");
            out.push_back(PlayerType::functional(p.x0, payoff(p), p.c));
        }
    }
    return out;
}

inline ScalarLaw law(const LawConfig& l) {
    if (l.law == "uniform") return ScalarLaw::uniform(l.a, l.b);
    if (l.law == "normal") return ScalarLaw::normal(l.a, l.b);
    return ScalarLaw::constant(l.a);
}

inline TypeDistribution type_distribution(const TypesConfig& t) {
    if (t.delta) return TypeDistribution(law(t.x), law(*t.delta), law(t.c));
    PayoffMixture mix;
    for (const auto& m : t.mixture) mix.components.push_back({m.intercept, m.slope, m.weight});
    return TypeDistribution(law(t.x), std::move(mix), law(t.c));
}

}  // namespace cara::config
