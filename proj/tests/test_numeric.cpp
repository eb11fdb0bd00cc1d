#include "cara/expression.hpp"
#include "cara/io.hpp"
#include "cara/numeric.hpp"
#include "cara/parallel.hpp"
#include "cara/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace cara {
namespace {

TEST(MeanSe, ConstantSampleHasZeroError) {
    std::vector<double> v(10, 2.5);
    const auto s = numeric::mean_se(v);
    EXPECT_EQ(s.mean, 2.5);
    EXPECT_EQ(s.se, 0.0);
    EXPECT_EQ(s.z_against(2.5), 0.0);
    EXPECT_EQ(s.z_against(3.0), -INFINITY);
}

TEST(MeanSe, MatchesTextbookFormula) {
    std::vector<double> v{1, 2, 3, 4, 5};
    const auto s = numeric::mean_se(v);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    EXPECT_DOUBLE_EQ(s.sd, std::sqrt(2.5));
    EXPECT_DOUBLE_EQ(s.se, std::sqrt(2.5 / 5.0));
}

TEST(MeanSe, PairedDifferenceCancelsCommonNoise) {
    std::vector<double> a{1.0, 5.0, -3.0}, b{0.5, 4.5, -3.5};
    const auto d = numeric::paired_difference(a, b);
    EXPECT_DOUBLE_EQ(d.mean, 0.5);
    EXPECT_NEAR(d.se, 0.0, 1e-15);
}

TEST(Regression, LogLogSlopeOfPowerLaw) {
    std::vector<double> x{10, 100, 1000, 10000}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
    EXPECT_NEAR(numeric::log_log_slope(x, y), -0.5, 1e-12);
}

TEST(Tridiagonal, SolvesKnownSystem) {
    // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1]  ->  x = [1 1 1]
    const auto x = numeric::solve_tridiagonal({0, -1, -1}, {2, 2, 2}, {-1, -1, 0}, {1, 0, 1});
    for (double v : x) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(Quadrature, IntegratesExponential) {
    const double v = numeric::integrate([](double s) { return std::exp(s); }, 0.0, 1.0);
    EXPECT_NEAR(v, std::exp(1.0) - 1.0, 1e-13);
    EXPECT_EQ(numeric::integrate([](double) { return 1.0; }, 2.0, 2.0), 0.0);
}

TEST(Format, RoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
        EXPECT_EQ(std::stod(numeric::format_double(v)), v);
    }
    EXPECT_EQ(numeric::format_double(NAN), "nan");
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    auto a = rng::stream(42, 7), b = rng::stream(42, 7), c = rng::stream(42, 8);
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
}

TEST(Rng, NormalMomentsAreStandard) {
    auto g = rng::stream(1, 0);
    rng::StandardNormal n;
    std::vector<double> v(200000);
    for (auto& x : v) x = n(g);
    const auto s = numeric::mean_se(v);
    EXPECT_LT(std::abs(s.mean), 4 * s.se);
    EXPECT_NEAR(s.sd, 1.0, 0.01);
}

TEST(Expression, EvaluatesArithmetic) {
    const auto e = Expression::parse("2 + 0.1*S - S^2/4 + sqrt(t) * exp(0) + log(1) + pow(2, 3)", {"t", "S"});
    EXPECT_DOUBLE_EQ(e(4.0, 2.0), 2.0 + 0.2 - 1.0 + 2.0 + 8.0);
    EXPECT_DOUBLE_EQ(Expression::parse("-2^2", {})(std::span<const double>()), -4.0);
}

TEST(Expression, RejectsUnknownNames) {
    EXPECT_THROW(Expression::parse("z + 1", {"t", "y"}), ConfigError);
    EXPECT_THROW(Expression::parse("sin(t)", {"t"}), ConfigError);
    EXPECT_THROW(Expression::parse("(t", {"t"}), ConfigError);
}

TEST(Csv, WritesDigestHeaderAndRows) {
    std::ostringstream out;
    io::CsvWriter w(out, {"a", "b"}, "00ff");
    w.row({1.0, 0.5});
    EXPECT_EQ(out.str(), "# config_digest=00ff\na,b\n1,0.5\n");
    EXPECT_THROW(w.row({1.0}), ParamError);
}

TEST(Digest, IsStable) {
    EXPECT_EQ(io::hex_digest(""), "cbf29ce484222325");
    EXPECT_EQ(io::hex_digest("a"), "af63dc4c8601ec8c");
}

TEST(Parallel, ResultIsIndependentOfThreadCount) {
    std::vector<double> one(1000), four(1000);
    auto fill = [](std::vector<double>& v) {
        return [&v](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) v[i] = std::sin(static_cast<double>(i));
        };
    };
    parallel_for(one.size(), 1, fill(one));
    parallel_for(four.size(), 4, fill(four));
    EXPECT_EQ(one, four);
}

}  // namespace
}  // namespace cara
