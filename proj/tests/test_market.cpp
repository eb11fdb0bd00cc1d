#include "cara/market.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cara {
namespace {

IncompleteMarketModel::Spec constant_spec(double mu, double sigma) {
    IncompleteMarketModel::Spec s;
    s.mu = [mu](double, double) { return mu; };
    s.sigma = [sigma](double, double) { return sigma; };
    s.b = [](double, double) { return 0.0; };
    s.a = [](double, double) { return 0.0; };
    s.rho = 0.3;
    return s;
}

SamplingGrid grid_on(double lo, double hi, double T = 1.0) { return SamplingGrid{{0.0, T}, {lo, hi}}; }

TEST(SolvableExample, HestonFamilyPassesValidation) {
    const auto model = build_solvable_example({});
    const auto report = validate_model(model, grid_on(0.01, 4.0));
    EXPECT_TRUE(report.passed());
    EXPECT_NE(report.find("sigma_lower"), nullptr);
}

TEST(SolvableExample, CoefficientsForEll) {
    SolvableExampleParams p;
    p.ell = 1.0;
    const auto heston = build_solvable_example(p);
    EXPECT_DOUBLE_EQ(heston.sigma(0.2, 0.49), 0.7);
    p.ell = -1.0;
    const auto inverse = build_solvable_example(p);
    EXPECT_DOUBLE_EQ(inverse.sigma(0.2, 4.0), 0.5);
    for (double ell : {1.0, -1.0, 2.0, 0.5}) {
        p.ell = ell;
        const auto m = build_solvable_example(p);
        EXPECT_DOUBLE_EQ(m.lambda(0.3, 4.0), 2.0 * p.mu);
        EXPECT_NEAR(m.mu(0.3, 4.0) / m.sigma(0.3, 4.0), 2.0 * p.mu, 1e-14);
    }
}

TEST(SolvableExample, FactorInputsDoNotDependOnEll) {
    SolvableExampleParams p;
    p.ell = 1.0;
    const auto a = build_solvable_example(p);
    p.ell = -3.0;
    const auto b = build_solvable_example(p);
    for (double y : {0.01, 0.3, 1.7, 9.0}) {
        EXPECT_EQ(a.lambda(0.1, y), b.lambda(0.1, y));
        EXPECT_EQ(a.b(0.1, y), b.b(0.1, y));
        EXPECT_EQ(a.a(0.1, y), b.a(0.1, y));
    }
}

TEST(SolvableExample, RejectsBadParameters) {
    SolvableExampleParams p;
    p.ell = 0.0;
    EXPECT_THROW(build_solvable_example(p), ParamError);
    p = {};
    p.m = 0.04;  // beta^2/2 = 0.045
    EXPECT_THROW(build_solvable_example(p), ParamError);
}

TEST(Validation, ZeroVolatilityFails) {
    const IncompleteMarketModel model(constant_spec(0.1, 0.0));
    const auto report = validate_model(model, grid_on(-1.0, 1.0));
    EXPECT_FALSE(report.passed());
    const auto* check = report.find("sigma_lower");
    ASSERT_NE(check, nullptr);
    EXPECT_FALSE(check->passed);
    EXPECT_NE(check->message.find("volatility lower bound violated"), std::string::npos);
}

TEST(Validation, GridOutsideDomainIsRejected) {
    const auto model = build_solvable_example({});
    EXPECT_THROW(validate_model(model, grid_on(-1.0, 1.0)), DomainError);
    EXPECT_THROW(validate_model(model, grid_on(0.1, 1.0, 2.0)), DomainError);
}

TEST(Validation, BoundedCompleteModelPasses) {
    CompleteMarketModel::Spec s;
    s.mu = [](double, double) { return 0.1; };
    s.sigma = [](double, double S) { return 0.2 + 0.01 * std::sin(S); };
    EXPECT_TRUE(validate_model(CompleteMarketModel(s), grid_on(0.5, 50.0)).passed());
}

TEST(Model, CorrelationMustBeInterior) {
    auto s = constant_spec(0.1, 0.2);
    s.rho = 1.0;
    EXPECT_THROW(IncompleteMarketModel{s}, ParamError);
    s.rho = -1.0;
    EXPECT_THROW(IncompleteMarketModel{s}, ParamError);
}

TEST(Players, ConstantAndFunctionalInvariants) {
    EXPECT_THROW(PlayerType::constant(0.0, 0.0, 0.1), ParamError);
    EXPECT_THROW(PlayerType::constant(0.0, 1.0, 1.5), ParamError);
    EXPECT_NO_THROW(PlayerType::constant(0.0, 1.0, 1.0));
    EXPECT_NO_THROW(PlayerType::functional(0.0, affine_payoff(2.0, 0.1), 0.5));
    TerminalPayoff dips;
    dips.fn = [](double s) { return 2.0 - 0.1 * s; };
    dips.lower_bound = 1.0;
    EXPECT_THROW(PlayerType::functional(0.0, dips, 0.0), ParamError);
    const auto p = PlayerType::functional(0.0, affine_payoff(2.0, 0.1), 0.0);
    EXPECT_DOUBLE_EQ(p.delta.terminal(10.0), 3.0);
    EXPECT_THROW(p.delta.constant(), ParamError);
}

TEST(AggregateStats, ArithmeticMeans) {
    const std::vector<PlayerType> players{PlayerType::constant(0, 1, 0.5), PlayerType::constant(0, 2, 0.5),
                                          PlayerType::constant(0, 3, 0.5)};
    const auto st = aggregate_stats(players);
    EXPECT_DOUBLE_EQ(st.phi, 2.0);
    EXPECT_DOUBLE_EQ(st.psi, 0.5);
    const auto one = aggregate_stats({PlayerType::constant(0, 5, 0)});
    EXPECT_EQ(one.phi, 5.0);
    EXPECT_EQ(one.psi, 0.0);
    const auto ones = aggregate_stats(std::vector<PlayerType>(3, PlayerType::constant(0, 1, 1)));
    EXPECT_TRUE(ones.psi_is_one());
}

TEST(AggregateStats, PermutationInvariant) {
    std::vector<PlayerType> players;
    for (int i = 0; i < 7; ++i) players.push_back(PlayerType::constant(i, 0.1 + 0.37 * i, 0.9 - 0.31 * i));
    const auto ref = aggregate_stats(players);
    std::reverse(players.begin(), players.end());
    std::rotate(players.begin(), players.begin() + 3, players.end());
    const auto perm = aggregate_stats(players);
    EXPECT_EQ(ref.phi, perm.phi);
    EXPECT_EQ(ref.psi, perm.psi);
}

TEST(TypeDistribution, SampleMeansMatchDeclaredMoments) {
    const TypeDistribution d(ScalarLaw::normal(1.0, 2.0), ScalarLaw::uniform(1.0, 3.0), ScalarLaw::uniform(-0.5, 0.8));
    const auto types = d.sample(100000, 9);
    std::vector<double> x, delta, c;
    for (const auto& t : types) {
        x.push_back(t.x0);
        delta.push_back(t.delta.constant());
        c.push_back(t.c);
    }
    const auto sx = numeric::mean_se(x), sd = numeric::mean_se(delta), sc = numeric::mean_se(c);
    EXPECT_LT(std::abs(sx.z_against(d.mean_wealth())), 4.0);
    EXPECT_LT(std::abs(sd.z_against(d.mean_tolerance())), 4.0);
    EXPECT_LT(std::abs(sc.z_against(d.mean_interaction())), 4.0);
}

TEST(TypeDistribution, ReproducibleAndPrefixStable) {
    const TypeDistribution d(ScalarLaw::normal(0.0, 1.0), ScalarLaw::uniform(1.0, 2.0), ScalarLaw::constant(0.2));
    const auto a = d.sample(50, 3), b = d.sample(80, 3), tail = d.sample(30, 3, 50);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(a[i].x0, b[i].x0);
        EXPECT_EQ(a[i].delta.constant(), b[i].delta.constant());
    }
    for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(tail[i].x0, b[50 + i].x0);
}

TEST(TypeDistribution, RejectsInteractionAboveOne) {
    EXPECT_THROW(TypeDistribution(ScalarLaw::constant(0), ScalarLaw::constant(1), ScalarLaw::uniform(0.5, 1.5)),
                 ParamError);
    EXPECT_THROW(TypeDistribution(ScalarLaw::constant(0), ScalarLaw::uniform(-1, 1), ScalarLaw::constant(0)),
                 ParamError);
}

TEST(TypeDistribution, PayoffMixtureComponents) {
    PayoffMixture mix{{{2.0, 0.1, 1.0}, {1.0, 0.3, 3.0}}};
    const TypeDistribution d(ScalarLaw::constant(0), mix, ScalarLaw::constant(0.1));
    std::vector<std::size_t> comp;
    const auto types = d.sample(20000, 5, 0, &comp);
    const double share = static_cast<double>(std::count(comp.begin(), comp.end(), 1u)) / 20000.0;
    EXPECT_NEAR(share, 0.75, 4.0 * std::sqrt(0.75 * 0.25 / 20000.0));
    EXPECT_DOUBLE_EQ(types[0].delta.terminal(10.0), comp[0] == 0 ? 3.0 : 4.0);
}

}  // namespace
}  // namespace cara
