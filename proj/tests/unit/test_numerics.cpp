#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "divbelief/errors.hpp"
#include "divbelief/numerics.hpp"
#include "divbelief/rng.hpp"

using namespace divbelief;

TEST(LogSumExp, HandlesHugeAndTinyArguments) {
    const std::vector<double> x{1000.0, 1000.0};
    EXPECT_DOUBLE_EQ(log_sum_exp(x), 1000.0 + std::log(2.0));
    const std::vector<double> y{-1000.0, -1001.0};
    EXPECT_NEAR(log_sum_exp(y), -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
    EXPECT_EQ(log_sum_exp(std::vector<double>{}), -std::numeric_limits<double>::infinity());
}

TEST(Softmax, SumsToOneAndMatchesDirectFormula) {
    const std::vector<double> x{0.1, -2.0, 3.5, 0.0};
    const auto w = softmax(x);
    double total = 0.0;
    double z = 0.0;
    for (double v : x) {
        z += std::exp(v);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        total += w[i];
        EXPECT_NEAR(w[i], std::exp(x[i]) / z, 1e-15);
    }
    EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(CheckedExp, ThrowsOutsideRange) {
    EXPECT_DOUBLE_EQ(checked_exp(0.0), 1.0);
    EXPECT_THROW(checked_exp(710.0), SaturationError);
    EXPECT_THROW(checked_exp(-746.0), SaturationError);
    EXPECT_THROW(checked_exp(std::numeric_limits<double>::quiet_NaN()), SaturationError);
}

TEST(RunningStats, AgreesWithTwoPassAndMergesExactly) {
    Rng r(9);
    std::vector<double> x(1001);
    for (double& v : x) {
        v = r.normal(5.0, 2.0);
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);

    RunningStats all;
    RunningStats a;
    RunningStats b;
    for (std::size_t i = 0; i < x.size(); ++i) {
        all.add(x[i]);
        (i < 400 ? a : b).add(x[i]);
    }
    a.merge(b);
    EXPECT_NEAR(all.mean(), mean, 1e-12);
    EXPECT_NEAR(all.variance(), ss / x.size(), 1e-10);
    EXPECT_NEAR(all.sample_variance(), ss / (x.size() - 1), 1e-10);
    EXPECT_NEAR(a.mean(), all.mean(), 1e-12);
    EXPECT_NEAR(a.variance(), all.variance(), 1e-10);
    EXPECT_EQ(a.count(), x.size());
}

TEST(RunningStats, EmptyIsNaN) {
    RunningStats s;
    EXPECT_TRUE(std::isnan(s.mean()));
    EXPECT_TRUE(std::isnan(s.variance()));
}

TEST(Bisect, FindsRootToFullPrecision) {
    const double root = bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0, 0.0);
    EXPECT_NEAR(root, std::sqrt(2.0), 4e-16);
}

TEST(Bisect, RejectsNonBracket) {
    EXPECT_THROW(bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12), BracketError);
}
