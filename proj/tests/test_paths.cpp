#include "cara/paths.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

namespace cara {
namespace {

IncompleteMarketModel constant_model(double mu, double sigma, double rho = 0.0, double a = 0.0) {
    IncompleteMarketModel::Spec s;
    s.mu = [mu](double, double) { return mu; };
    s.sigma = [sigma](double, double) { return sigma; };
    s.b = [](double, double) { return 0.0; };
    s.a = [a](double, double) { return a; };
    s.rho = rho;
    s.y0 = 0.7;
    return IncompleteMarketModel(s);
}

std::vector<double> terminal(const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t p = 0; p < m.rows(); ++p) out[p] = m(p, m.cols() - 1);
    return out;
}

TEST(TimeGrid, EndpointsAndStep) {
    const TimeGrid g(0.0, 2.0, 8);
    EXPECT_DOUBLE_EQ(g.h(), 0.25);
    EXPECT_EQ(g.time(8), 2.0);
    EXPECT_EQ(g.points().size(), 9u);
    EXPECT_THROW(TimeGrid(1.0, 1.0, 4), ParamError);
}

TEST(Simulate, DriftlessStockIsMartingale) {
    const auto b = simulate(constant_model(0.0, 1.0), TimeGrid(0, 1, 50), 20000, 3);
    const auto st = numeric::mean_se(terminal(b.S));
    EXPECT_LT(std::abs(st.z_against(1.0)), 4.0);
}

TEST(Simulate, FrozenFactorStaysPut) {
    const auto b = simulate(constant_model(0.1, 0.2), TimeGrid(0, 1, 20), 100, 3);
    for (double y : b.Y.values()) EXPECT_EQ(y, 0.7);
}

TEST(Simulate, HestonFactorMean) {
    SolvableExampleParams p;
    const auto model = build_solvable_example(p);
    const auto b = simulate(model, TimeGrid(0, 1, 100), 100000, 17);
    const auto st = numeric::mean_se(terminal(b.Y));
    const double ode = p.m + (p.y0 - p.m) * std::exp(-p.horizon);
    EXPECT_LT(std::abs(st.z_against(ode)), 4.0);
    for (double y : b.Y.values()) EXPECT_GE(y, p.y_floor);
}

TEST(Simulate, CorrelationOfNoise) {
    const double rho = -0.6;
    const auto b = simulate(constant_model(0.1, 0.2, rho), TimeGrid(0, 1, 20), 5000, 8);
    std::vector<double> prod;
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < b.n_steps(); ++k) prod.push_back(b.dW(p, k) * b.dW_Y(p, k));
    const auto st = numeric::mean_se(prod);
    EXPECT_LT(std::abs(st.z_against(rho * b.grid().h())), 4.0);
}

TEST(Simulate, DeterministicAndThreadIndependent) {
    const auto model = build_solvable_example({});
    const auto a = simulate(model, TimeGrid(0, 1, 30), 300, 5, {0, 1});
    const auto b = simulate(model, TimeGrid(0, 1, 30), 300, 5, {0, 3});
    EXPECT_EQ(a.S, b.S);
    EXPECT_EQ(a.Y, b.Y);
    const auto tail = simulate(model, TimeGrid(0, 1, 30), 100, 5, {200, 1});
    for (std::size_t k = 0; k <= 30; ++k) EXPECT_EQ(tail.S(0, k), a.S(200, k));
}

TEST(Simulate, NonFiniteStateThrows) {
    const auto model = constant_model(1e300, 1.0);
    EXPECT_THROW(simulate(model, TimeGrid(0, 1, 10), 2, 1), NumericsError);
}

TEST(Girsanov, ZeroSharpeRatioGivesZeroWeight) {
    const auto b = simulate(constant_model(0.0, 0.3), TimeGrid(0, 1, 10), 50, 1);
    for (double w : girsanov_logweight(b, Measure::MinimalMartingale)) EXPECT_EQ(w, 0.0);
    EXPECT_EQ(shifted_increments(b, Measure::RiskNeutral), b.noise.dW);
}

TEST(Girsanov, ConstantSharpeShiftsBrownianMean) {
    const auto b = simulate(constant_model(0.08, 0.2), TimeGrid(0, 1, 20), 100000, 21);
    const auto lw = girsanov_logweight(b, Measure::MinimalMartingale);
    std::vector<double> w(lw.size()), wW(lw.size());
    for (std::size_t p = 0; p < lw.size(); ++p) {
        double W = 0.0;
        for (std::size_t k = 0; k < b.n_steps(); ++k) W += b.dW(p, k);
        w[p] = std::exp(lw[p]);
        wW[p] = w[p] * W;
    }
    EXPECT_LT(std::abs(numeric::mean_se(w).z_against(1.0)), 4.0);
    EXPECT_LT(std::abs(numeric::mean_se(wW).z_against(-0.4)), 4.0);
    const Matrix shifted = shifted_increments(b, Measure::MinimalMartingale);
    std::vector<double> sw(lw.size());
    for (std::size_t p = 0; p < lw.size(); ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < b.n_steps(); ++k) s += shifted(p, k);
        sw[p] = s;
    }
    EXPECT_LT(std::abs(numeric::mean_se(sw).z_against(0.4)), 4.0);
}

TEST(Girsanov, TildeNeedsXiAndVanishesWhenXiEqualsLambda) {
    const auto b = simulate(constant_model(0.08, 0.2), TimeGrid(0, 1, 10), 20, 1);
    EXPECT_THROW(girsanov_logweight(b, Measure::Tilde), MeasureError);
    Matrix bad(3, 3);
    EXPECT_THROW(girsanov_logweight(b, Measure::Tilde, &bad), MeasureError);
    const Matrix xi = b.lambda;
    for (double w : girsanov_logweight(b, Measure::Tilde, &xi)) EXPECT_EQ(w, 0.0);
}

TEST(Girsanov, FactorNoiseShiftUnderMinimalMartingale) {
    const auto b = simulate(constant_model(0.08, 0.2, 0.5, 0.1), TimeGrid(0, 1, 10), 10, 1);
    const Matrix s = shifted_factor_increments(b);
    EXPECT_DOUBLE_EQ(s(3, 4), b.dW_Y(3, 4) + 0.5 * 0.4 * 0.1);
}

TEST(Girsanov, WeightedEstimatorMatchesDirectSimulation) {
    // E_Q[min(S_T, 1.2)] by reweighting P-paths and by simulating with zero drift.
    CompleteMarketModel::Spec s;
    s.mu = [](double, double) { return 0.1; };
    s.sigma = [](double, double) { return 0.25; };
    const CompleteMarketModel model(s);
    const auto noise = BrownianIncrements::draw(TimeGrid(0, 1, 25), 40000, 4);
    const auto p = simulate(model, noise);
    const auto lw = girsanov_logweight(p, Measure::RiskNeutral);
    const auto q = simulate_under(model, BrownianIncrements::draw(TimeGrid(0, 1, 25), 40000, 99),
                                  [](double, double) { return 0.0; });
    std::vector<double> wg(lw.size()), g(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) {
        wg[i] = std::exp(lw[i]) * std::min(p.S(i, 25), 1.2);
        g[i] = std::min(q.S(i, 25), 1.2);
    }
    const auto a = numeric::mean_se(wg), c = numeric::mean_se(g);
    EXPECT_LT(std::abs(a.mean - c.mean), 4.0 * std::hypot(a.se, c.se));
}

TEST(Simulate, StrongOrderOfEuler) {
    // Exact GBM against Euler on the same Brownian path.
    CompleteMarketModel::Spec s;
    s.mu = [](double, double) { return 0.1; };
    s.sigma = [](double, double) { return 0.4; };
    const CompleteMarketModel model(s);
    const auto fine = BrownianIncrements::draw(TimeGrid(0, 1, 512), 2000, 12);
    std::vector<double> h, gap;
    for (std::size_t f : {32, 16, 8, 4, 2}) {
        const auto b = simulate(model, fine.coarsen(f));
        std::vector<double> e(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) {
            double W = 0.0;
            for (std::size_t k = 0; k < b.n_steps(); ++k) W += b.dW(p, k);
            e[p] = std::abs(b.S(p, b.n_steps()) - std::exp((0.1 - 0.08) + 0.4 * W));
        }
        h.push_back(b.grid().h());
        gap.push_back(numeric::mean_se(e).mean);
    }
    const double slope = numeric::log_log_slope(h, gap);
    EXPECT_GE(slope, 0.4);
    EXPECT_LE(slope, 1.1);
}

TEST(PathsCsv, HeaderAndRowCount) {
    const auto b = simulate(constant_model(0.08, 0.2), TimeGrid(0, 1, 4), 2, 1);
    std::ostringstream out;
    write_paths_csv(out, b, nullptr, "abc");
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# config_digest=abc");
    std::getline(in, line);
    EXPECT_EQ(line, "path,t,W,W_perp,Y,S,logw_QMM,logw_Qtilde");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2u * 5u);
}

}  // namespace
}  // namespace cara
