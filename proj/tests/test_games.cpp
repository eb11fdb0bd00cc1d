#include "cara/games.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

namespace cara {
namespace {

constexpr double kM0 = 0.952980627103825;  // tests/oracles/derive.py

IncompleteMarketModel constant_incomplete(double mu, double sigma, double rho) {
    IncompleteMarketModel::Spec s;
    s.mu = [mu](double, double) { return mu; };
    s.sigma = [sigma](double, double) { return sigma; };
    s.b = [](double, double y) { return -y; };
    s.a = [](double, double) { return 0.3; };
    s.rho = rho;
    return IncompleteMarketModel(s);
}

CompleteMarketModel gbm(double mu = 0.1, double sigma = 0.2, double s0 = 10.0) {
    CompleteMarketModel::Spec s;
    s.mu = [mu](double, double) { return mu; };
    s.sigma = [sigma](double, double) { return sigma; };
    s.s0 = s0;
    return CompleteMarketModel(s);
}

TerminalPayoff constant_payoff(double d) {
    TerminalPayoff p;
    p.fn = [d](double) { return d; };
    p.lower_bound = d;
    p.label = "const";
    return p;
}

TerminalPayoff quadratic_payoff() {
    TerminalPayoff p;
    p.fn = [](double s) { return 1.0 + 0.02 * s * s; };
    p.lower_bound = 1.0;
    p.label = "1+0.02S^2";
    return p;
}

std::vector<PlayerType> three_players() {
    return {PlayerType::constant(1, 1, 0.3), PlayerType::constant(0, 2, 0.5), PlayerType::constant(2, 3, -0.2)};
}

struct SolvableFixture : ::testing::Test {
    IncompleteMarketModel model = build_solvable_example({});
    PathBundle bundle = simulate(model, TimeGrid(0, 1, 50), 400, 42);
    Interval dom = default_domain(bundle.Y, model.domain());
    PDESolution f = solve_f(model, Grid2D(1, 400, dom.lo, dom.hi, 400));
    PDESolution zeta = solve_zeta(model, f.grid());
};

TEST(ModifiedRiskTolerance, NoInteraction) {
    std::vector<PlayerType> p{PlayerType::constant(0, 1, 0), PlayerType::constant(0, 4, 0)};
    const auto m = modified_risk_tolerance(p);
    EXPECT_EQ(m.delta_bar, m.delta);
}

TEST(ModifiedRiskTolerance, FormulaAndAverage) {
    // phi = mean delta = 6, psi = mean c = 0.5: delta_bar = 2 + 6 * 0.5 / 0.5 = 8
    std::vector<PlayerType> p{PlayerType::constant(0, 2, 0.5), PlayerType::constant(0, 10, 0.5),
                              PlayerType::constant(0, 6, 0.5)};
    const auto m = modified_risk_tolerance(p);
    EXPECT_DOUBLE_EQ(m.phi, 6.0);
    EXPECT_DOUBLE_EQ(m.psi, 0.5);
    EXPECT_DOUBLE_EQ(m.delta_bar[0], 8.0);
    const auto q = modified_risk_tolerance(three_players());
    double avg = 0.0;
    for (double d : q.delta_bar) avg += d / 3.0;
    EXPECT_NEAR(avg / (q.phi / (1.0 - q.psi)), 1.0, 1e-12);
}

TEST(ModifiedRiskTolerance, AllOnesHasNoEquilibrium) {
    std::vector<PlayerType> p(3, PlayerType::constant(0, 1, 1));
    try {
        modified_risk_tolerance(p);
        FAIL() << "expected NoEquilibrium";
    } catch (const NoEquilibrium& e) {
        EXPECT_NE(std::string(e.what()).find("all c_i must equal 1"), std::string::npos);
    }
}

TEST(Reparameterize, Examples) {
    const auto [d0, c0] = reparameterize_interaction(1.7, 0.0, 5);
    EXPECT_EQ(d0, 1.7);
    EXPECT_EQ(c0, 0.0);
    const auto [d1, c1] = reparameterize_interaction(1.0, 1.0, 2);
    EXPECT_DOUBLE_EQ(d1, 0.5);
    EXPECT_DOUBLE_EQ(c1, 1.0);
    const auto [d2, c2] = reparameterize_interaction(1.3, 0.4, 1000000);
    EXPECT_NEAR(d2, 1.3, 1e-5);
    EXPECT_NEAR(c2, 0.4, 1e-5);
    EXPECT_THROW(reparameterize_interaction(1.0, 0.5, 1), ParamError);
    EXPECT_THROW(reparameterize_interaction(1.0, -1.0, 2), ParamError);
}

TEST(MfgCoefficient, Example) {
    EXPECT_DOUBLE_EQ(mfg_coefficient(1.0, 0.5, 1.0, 0.5), 2.0);
    EXPECT_THROW(mfg_coefficient(1.0, 0.5, 1.0, 1.0), NoEquilibrium);
}

TEST(NplayerIncomplete, DeterministicSharpeRatio) {
    const auto model = constant_incomplete(0.08, 0.2, 0.4);
    const auto b = simulate(model, TimeGrid(0, 1, 20), 50, 1);
    const auto dom = default_domain(b.Y);
    const auto f = solve_f(model, Grid2D(1, 50, dom.lo, dom.hi, 50));
    const auto players = three_players();
    const auto r = nplayer_incomplete(players, model, b, f);
    const auto m = modified_risk_tolerance(players);
    for (std::size_t i = 0; i < 3; ++i)
        for (double v : r.strategy[i].values()) EXPECT_NEAR(v, m.delta_bar[i] * 0.4 / 0.2, 1e-12);
}

TEST_F(SolvableFixture, StrategyIsDeterministicInTime) {
    const auto r = nplayer_incomplete(three_players(), model, bundle, f, zeta);
    const auto ric = solve_riccati({});
    const auto& db = r.player_components.at("delta_bar");
    const SolvableExampleParams p;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t q = 0; q < bundle.n_paths(); q += 37)
            for (std::size_t s = 0; s < bundle.n_steps(); ++s) {
                const double expected = db[i] * (p.mu + p.rho * p.beta * ric.p(bundle.grid().time(s)));
                EXPECT_NEAR(r.strategy[i](q, s), expected, 1e-3 * std::abs(expected));
            }
}

TEST_F(SolvableFixture, FixedPointAndAverageIdentity) {
    const auto players = three_players();
    const auto r = nplayer_incomplete(players, model, bundle, f, zeta);
    EXPECT_LE(r.diagnostics.at("fixed_point_residual"), 1e-12);
    EXPECT_LE(r.diagnostics.at("average_identity_residual"), 1e-12);
    // Recheck the best-response identity directly.
    const auto fac = incomplete_factor(model, bundle, f);
    for (std::size_t q = 0; q < bundle.n_paths(); q += 53)
        for (std::size_t s = 0; s < bundle.n_steps(); ++s) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 3; ++j) sum += r.strategy[j](q, s);
            for (std::size_t i = 0; i < 3; ++i) {
                const double br = players[i].delta.constant() * fac.kappa(q, s) + players[i].c / 3.0 * sum;
                EXPECT_NEAR(r.strategy[i](q, s), br, 1e-12);
            }
        }
}

TEST_F(SolvableFixture, ValuesUseZeta) {
    const auto players = three_players();
    const auto r = nplayer_incomplete(players, model, bundle, f, zeta);
    EXPECT_NEAR(r.components.at("M0"), kM0, 1e-5);
    const double xbar = 1.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double v = -std::exp(-(players[i].x0 - players[i].c * xbar) / players[i].delta.constant()) *
                         std::pow(kM0, 1.0 / 0.75);
        EXPECT_NEAR(r.values[i], v, 1e-5);
        EXPECT_LT(r.values[i], 0.0);
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t q = 0; q < bundle.n_paths(); ++q) EXPECT_EQ(r.wealth[i](q, 0), players[i].x0);
}

TEST_F(SolvableFixture, WealthIndependentAndMonotoneValue) {
    auto players = three_players();
    const auto a = nplayer_incomplete(players, model, bundle, f, zeta);
    players[1].x0 = 5.0;
    const auto b = nplayer_incomplete(players, model, bundle, f, zeta);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.strategy[i], b.strategy[i]);
    std::vector<double> ladder;
    for (double x : {-1.0, 0.0, 1.0}) {
        players[0].x0 = x;
        ladder.push_back(nplayer_incomplete(players, model, bundle, f, zeta).values[0]);
    }
    EXPECT_LT(ladder[0], ladder[1]);
    EXPECT_LT(ladder[1], ladder[2]);
}

TEST_F(SolvableFixture, MfgMatchesFormula) {
    const std::vector<PlayerType> types{PlayerType::constant(1, 1, 0.5), PlayerType::constant(0, 2, 0.0)};
    const MeanFieldMoments mom{1.0, 0.5, 0.7};
    const auto r = mfg_incomplete(types, mom, model, bundle, f, zeta);
    const auto fac = incomplete_factor(model, bundle, f);
    for (std::size_t q = 0; q < bundle.n_paths(); q += 41)
        for (std::size_t s = 0; s < bundle.n_steps(); ++s) {
            EXPECT_NEAR(r.strategy[0](q, s), 2.0 * fac.kappa(q, s), 1e-14);
            EXPECT_NEAR(r.strategy[1](q, s), 2.0 * fac.kappa(q, s), 1e-14);
        }
    EXPECT_NEAR(r.values[0], -std::exp(-(1.0 - 0.5 * 0.7) / 1.0) * std::pow(kM0, 1.0 / 0.75), 1e-5);
    EXPECT_THROW(mfg_incomplete(types, {1.0, 1.0, 0.0}, model, bundle, f, zeta), NoEquilibrium);
}

TEST_F(SolvableFixture, ReportCsvAndSummary) {
    const auto r = nplayer_incomplete(three_players(), model, bundle, f, zeta);
    std::ostringstream out;
    r.write_csv(out, "d1", 1);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# config_digest=d1");
    std::getline(in, line);
    EXPECT_EQ(line, "player,path,t,pi,X");
    const auto j = r.summary();
    EXPECT_EQ(j["n_players"], 3);
    EXPECT_TRUE(j["components"].contains("phi_N"));
}

TEST(NplayerIncomplete, RejectsFunctionalRiskTolerance) {
    std::vector<PlayerType> p{PlayerType::functional(0, affine_payoff(2, 0.1), 0.1), PlayerType::constant(0, 1, 0)};
    EXPECT_THROW(modified_risk_tolerance(p), ParamError);
}

struct CompleteFixture : ::testing::Test {
    CompleteMarketModel model = gbm();
    PathBundle bundle = simulate(model, TimeGrid(0, 1, 64), 300, 9);
    Grid2D grid{1.0, 400, 0.5, 60.0, 400};
    RiskToleranceSolution affine = solve_risk_tolerance(model, affine_payoff(2.0, 0.1), grid);
    RiskToleranceSolution steep = solve_risk_tolerance(model, affine_payoff(1.0, 0.3), grid);
    RiskToleranceSolution quad = solve_risk_tolerance(model, quadratic_payoff(), grid);
    RiskToleranceSolution flat = solve_risk_tolerance(model, constant_payoff(2.0), grid);
};

TEST_F(CompleteFixture, SinglePlayerInitialConditionsAndValue) {
    const auto player = PlayerType::functional(0.0, affine_payoff(2.0, 0.1), 0.0);
    const auto sp = single_player_complete(player, model, bundle, affine);
    for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
        EXPECT_EQ(sp.x_star(p, 0), 0.0);
        EXPECT_EQ(sp.phi(p, 5, 5), 1.0);
    }
    EXPECT_NEAR(sp.delta0, 3.0, 1e-10);
    EXPECT_NEAR(sp.H0, 0.0939085544854825, 1e-5);
    EXPECT_DOUBLE_EQ(sp.value, -std::exp(-sp.H0));
}

TEST_F(CompleteFixture, PhiCocycleAndTerminalConsistency) {
    const auto player = PlayerType::functional(1.0, quadratic_payoff(), 0.0);
    const auto sp = single_player_complete(player, model, bundle, quad);
    const std::size_t m = bundle.n_steps();
    for (std::size_t p = 0; p < bundle.n_paths(); p += 11) {
        EXPECT_NEAR(sp.phi(p, 3, 20) * sp.phi(p, 20, 50), sp.phi(p, 3, 50), 1e-12 * sp.phi(p, 3, 50));
        EXPECT_EQ(sp.fields.H(p, m), 0.0);
        const double dT = quadratic_payoff()(bundle.S(p, m));
        // linear interpolation of 1 + 0.02 S^2 errs by at most 0.04 h^2 / 8
        const double h = grid.dx();
        EXPECT_NEAR(sp.fields.delta(p, m), dT, 0.04 * h * h / 8 + 1e-12);
        const double vT = -std::exp(-sp.x_star(p, m) / sp.fields.delta(p, m) - sp.fields.H(p, m));
        EXPECT_NEAR(vT, -std::exp(-sp.x_star(p, m) / dT), 1e-4 * std::abs(vT));
    }
}

TEST_F(CompleteFixture, ConstantDeltaIsMerton) {
    const auto player = PlayerType::functional(1.0, constant_payoff(2.0), 0.0);
    const auto sp = single_player_complete(player, model, bundle, flat);
    for (double v : sp.pi.values()) EXPECT_NEAR(v, 2.0 * 0.5 / 0.2, 1e-10);
}

TEST_F(CompleteFixture, NplayerFixedPoint) {
    const std::vector<PlayerType> players{PlayerType::functional(1, affine_payoff(2.0, 0.1), 0.4),
                                          PlayerType::functional(0.5, affine_payoff(1.0, 0.3), -0.3),
                                          PlayerType::functional(2, quadratic_payoff(), 0.6)};
    const auto r = nplayer_complete(players, model, bundle, {&affine, &steep, &quad});
    EXPECT_LE(r.diagnostics.at("fixed_point_residual"), 1e-10);
    EXPECT_LE(r.diagnostics.at("average_wealth_residual"), 1e-10);
    EXPECT_TRUE(r.wealth_dependent);
    for (double v : r.values) EXPECT_LT(v, 0.0);
}

TEST_F(CompleteFixture, NplayerWithoutInteractionIsSinglePlayerBitwise) {
    const std::vector<PlayerType> players{PlayerType::functional(1, affine_payoff(2.0, 0.1), 0.0),
                                          PlayerType::functional(0.5, affine_payoff(1.0, 0.3), 0.0),
                                          PlayerType::functional(2, quadratic_payoff(), 0.0)};
    const std::vector<const RiskToleranceSolution*> sols{&affine, &steep, &quad};
    const auto r = nplayer_complete(players, model, bundle, sols);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto sp = single_player_complete(players[i], model, bundle, *sols[i]);
        EXPECT_EQ(r.strategy[i], sp.pi);
        EXPECT_EQ(r.wealth[i], sp.x_star);
        EXPECT_EQ(r.values[i], sp.value);
    }
}

TEST_F(CompleteFixture, NplayerConstantDeltaMatchesIncompleteFormula) {
    const std::vector<PlayerType> players{PlayerType::functional(1, constant_payoff(2.0), 0.4),
                                          PlayerType::functional(0, constant_payoff(2.0), -0.2),
                                          PlayerType::functional(3, constant_payoff(2.0), 0.7)};
    const auto r = nplayer_complete(players, model, bundle, {&flat, &flat, &flat});
    const double psi = (0.4 - 0.2 + 0.7) / 3.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (double v : r.strategy[i].values())
            EXPECT_NEAR(v, (2.0 + 2.0 * players[i].c / (1.0 - psi)) * 0.5 / 0.2, 1e-9);
}

TEST_F(CompleteFixture, NplayerNoEquilibrium) {
    const std::vector<PlayerType> players(2, PlayerType::functional(1, affine_payoff(2.0, 0.1), 1.0));
    EXPECT_THROW(nplayer_complete(players, model, bundle, {&affine, &affine}), NoEquilibrium);
}

TEST_F(CompleteFixture, MfgDegenerateMatchesSinglePlayer) {
    const auto t = PlayerType::functional(1.0, affine_payoff(2.0, 0.1), 0.0);
    const MeanFieldMoments mom{std::numeric_limits<double>::quiet_NaN(), 0.0, 1.0};
    const auto r = mfg_complete({t, t}, {0, 0}, {&affine}, mom, model, bundle);
    const auto sp = single_player_complete(t, model, bundle, affine);
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
        for (std::size_t s = 0; s <= bundle.n_steps(); ++s) {
            EXPECT_NEAR(r.wealth[0](p, s), sp.x_euler(p, s), 1e-10);
            if (s < bundle.n_steps()) {
                EXPECT_NEAR(r.strategy[0](p, s), sp.pi_euler(p, s), 1e-10);
            }
        }
    EXPECT_NEAR(r.values[0], sp.value, 1e-14);
}

TEST_F(CompleteFixture, MfgConstantDeltaMatchesIncompleteFormula) {
    const std::vector<PlayerType> types{PlayerType::functional(1, constant_payoff(2.0), 0.2),
                                        PlayerType::functional(-1, constant_payoff(2.0), 0.6)};
    const MeanFieldMoments mom{2.0, 0.4, 0.0};
    const auto r = mfg_complete(types, {0, 0}, {&flat}, mom, model, bundle);
    for (std::size_t j = 0; j < 2; ++j)
        for (double v : r.strategy[j].values()) EXPECT_NEAR(v, (2.0 + 2.0 * types[j].c / 0.6) * 0.5 / 0.2, 1e-9);
    EXPECT_LE(r.diagnostics.at("type_average_residual"), 1e-10);
}

TEST_F(CompleteFixture, MfgHeterogeneousTypes) {
    PayoffMixture mix{{{2.0, 0.1, 1.0}, {1.0, 0.3, 1.0}}};
    const TypeDistribution dist(ScalarLaw::normal(1.0, 0.5), mix, ScalarLaw::uniform(-0.5, 0.8));
    std::vector<std::size_t> comp;
    const auto types = dist.sample(500, 77, 0, &comp);
    const auto r = mfg_complete(types, comp, {&affine, &steep}, MeanFieldMoments::of(dist), model, bundle, {4});
    EXPECT_EQ(r.strategy.size(), 4u);
    EXPECT_EQ(r.values.size(), 500u);
    EXPECT_LE(r.diagnostics.at("type_average_residual"), 1e-10);
    EXPECT_THROW(mfg_complete({types[0]}, {comp[0]}, {&affine, &steep}, MeanFieldMoments::of(dist), model, bundle),
                 SampleError);
}

TEST(CompleteGames, RejectIncompleteBundle) {
    const auto inc = build_solvable_example({});
    const auto b = simulate(inc, TimeGrid(0, 1, 10), 10, 1);
    const auto model = gbm();
    const auto sol = solve_risk_tolerance(model, affine_payoff(2.0, 0.1), Grid2D(1, 10, 0.5, 20, 10));
    EXPECT_THROW(single_player_complete(PlayerType::functional(0, affine_payoff(2.0, 0.1), 0), model, b, sol),
                 ParamError);
}

}  // namespace
}  // namespace cara
