#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "divbelief/beliefs.hpp"
#include "divbelief/errors.hpp"
#include "divbelief/numerics.hpp"
#include "divbelief/rng.hpp"
#include "support.hpp"

using namespace divbelief;
using namespace divbelief::beliefs;
using divbelief::testing::rel_err;

namespace {

// Joint density of x_1..x_t when x_k | mu ~ N(mu, 1/tau) and
// mu ~ N(m0, 1/(K0 tau)), integrated over mu in one go.
double batch_log_density(const std::vector<double>& x, double m0, double K0, double tau) {
    const double t = static_cast<double>(x.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : x) {
        sum += v;
        sum_sq += v * v;
    }
    const double Kt = K0 + t;
    const double mt = (K0 * m0 + sum) / Kt;
    return 0.5 * t * std::log(tau / (2.0 * std::numbers::pi)) + 0.5 * std::log(K0 / Kt) -
           0.5 * tau * (sum_sq + K0 * m0 * m0 - Kt * mt * mt);
}

BeliefState feed(const DiscreteBelief& b, const std::vector<double>& x) {
    BeliefState s = BeliefState::initial(b);
    for (double v : x) {
        s = update_discrete(s, b, v);
    }
    return s;
}

} // namespace

TEST(ContinuousBelief, BayesianPosteriorMeanExamples) {
    const BayesianGaussian b{0.2, 1.0};
    EXPECT_DOUBLE_EQ(alpha_continuous(b, 0.0, 0.0), 0.2);
    // (x + beta eps) / (eps + t) with x = 0.22, t = 1 gives 0.21.
    EXPECT_NEAR(alpha_continuous(b, 1.0, 0.22), 0.21, 1e-15);
    EXPECT_NEAR(alpha_continuous(BayesianGaussian{0.0, 4.0}, 1.0, 0.7), 0.14, 1e-15);
    EXPECT_DOUBLE_EQ(alpha_continuous(ConstantDrift{0.3}, 5.0, -2.0), 0.3);
}

TEST(ContinuousBelief, ExactConstantDriftStep) {
    const double log_l = lambda_sde_step_log(0.0, 0.5, 0.2, 1.0);
    EXPECT_NEAR(std::exp(log_l), std::exp(-0.025), 1e-15);
    EXPECT_NEAR(log_lambda_closed_form(ConstantDrift{0.5}, 1.0, 0.2), -0.025, 1e-15);
    EXPECT_DOUBLE_EQ(lambda_sde_step(1.0, 0.0, 0.37, 0.01), 1.0);
}

TEST(ContinuousBelief, PositiveScaleStepSaturates) {
    EXPECT_THROW(lambda_sde_step(1e-300, 50.0, -20.0, 1.0), SaturationError);
}

TEST(ContinuousBelief, BayesianSdeConvergesToClosedForm) {
    const BayesianGaussian b{0.3, 2.0};
    const double T = 1.0;
    double worst_prev = 0.0;
    for (int n : {250, 1000, 4000}) {
        double worst = 0.0;
        for (int path = 0; path < 20; ++path) {
            Rng rng(1234, StreamDomain::Reference, static_cast<std::uint64_t>(path));
            const double dt = T / n;
            // Finest grid drives all coarser grids, so errors are comparable.
            std::vector<double> dx(4000);
            for (double& v : dx) v = rng.normal(0.0, std::sqrt(T / 4000.0));
            const int stride = 4000 / n;
            double x = 0.0;
            double t = 0.0;
            double log_l = 0.0;
            for (int k = 0; k < n; ++k) {
                double inc = 0.0;
                for (int m = 0; m < stride; ++m) inc += dx[k * stride + m];
                log_l = lambda_sde_step_log(log_l, alpha_continuous(b, t, x), inc, dt);
                x += inc;
                t += dt;
            }
            worst = std::max(worst, std::abs(log_l - log_lambda_closed_form(b, T, x)));
        }
        if (worst_prev > 0.0) {
            EXPECT_LT(worst, worst_prev);
        }
        worst_prev = worst;
    }
    EXPECT_LT(worst_prev, 0.01);
}

TEST(ContinuousBelief, ClosedFormAtTimeZeroIsOne) {
    EXPECT_DOUBLE_EQ(log_lambda_closed_form(BayesianGaussian{0.4, 3.0}, 0.0, 0.0), 0.0);
}

TEST(ContinuousBelief, BayesianLearnerConverges) {
    // Observe Y_t = X_t + b t on a coarse grid; the posterior mean error should
    // shrink between t = 1e2 and t = 1e4.
    const double b_true = 0.35;
    const BayesianGaussian prior{-0.2, 1.0};
    std::vector<double> err_early;
    std::vector<double> err_late;
    for (std::uint64_t path = 0; path < 101; ++path) {
        Rng rng(77, StreamDomain::Reference, path);
        double y = 0.0;
        for (int t = 1; t <= 10000; ++t) {
            y += b_true + rng.normal();
            if (t == 100) err_early.push_back(std::abs(alpha_continuous(prior, t, y) - b_true));
        }
        err_late.push_back(std::abs(alpha_continuous(prior, 10000.0, y) - b_true));
    }
    std::nth_element(err_early.begin(), err_early.begin() + 50, err_early.end());
    std::nth_element(err_late.begin(), err_late.begin() + 50, err_late.end());
    EXPECT_LT(err_late[50], err_early[50]);
}

TEST(ContinuousBelief, RejectsNonPositivePrecision) {
    EXPECT_THROW(validate(ContinuousBelief{BayesianGaussian{0.0, 0.0}}), ValidationError);
    EXPECT_THROW(validate(ContinuousBelief{BayesianGaussian{0.0, -1.0}}), ValidationError);
    EXPECT_NO_THROW(validate(ContinuousBelief{ConstantDrift{2.0}}));
}

TEST(DiscreteBelief, InitialRatioIsOne) {
    const DiscreteBelief b{0.1, 5.0, 2.0, false};
    const BeliefState s = BeliefState::initial(b);
    EXPECT_EQ(s.steps, 0);
    EXPECT_DOUBLE_EQ(s.sample_size, 5.0);
    EXPECT_DOUBLE_EQ(likelihood_ratio(s, b), 1.0);
}

TEST(DiscreteBelief, OneStepExample) {
    const double tau = 3.0;
    const double x = 0.8;
    const DiscreteBelief b{0.0, 1.0, tau, false};
    const BeliefState s = update_discrete(BeliefState::initial(b), b, x);
    EXPECT_DOUBLE_EQ(s.mean, x / 2.0);
    const double expected = std::exp(0.5 * tau * (x / 2.0) * (x / 2.0) * 2.0) * std::sqrt(0.5);
    EXPECT_LT(rel_err(likelihood_ratio(s, b), expected), 1e-14);
}

TEST(DiscreteBelief, IncrementalMatchesBatchDensity) {
    Rng rng(2024, StreamDomain::Reference, 0);
    for (int seq = 0; seq < 200; ++seq) {
        const DiscreteBelief b{rng.uniform(-1.0, 1.0), rng.uniform(0.5, 50.0),
                               rng.uniform(0.2, 20.0), false};
        std::vector<double> x(100);
        for (double& v : x) v = rng.normal(rng.uniform(-0.5, 0.5), 1.0);
        const BeliefState s = feed(b, x);
        const double batch = batch_log_density(x, b.prior_mean, b.prior_sample_size, b.precision);
        ASSERT_LT(rel_err(s.log_density, batch), 1e-10) << "sequence " << seq;
        ASSERT_EQ(s.steps, 100);
        ASSERT_EQ(s.sample_size, b.prior_sample_size + 100.0);

        // Ratio against the N(0, 1/tau) reference density with the same tau.
        double ref = 0.0;
        for (double v : x) {
            ref += 0.5 * std::log(b.precision / (2.0 * std::numbers::pi)) -
                   0.5 * b.precision * v * v;
        }
        ASSERT_NEAR(log_likelihood_ratio(s, b), batch - ref, 1e-9 * std::max(1.0, std::abs(batch)));
    }
}

TEST(DiscreteBelief, IncrementHelperAgreesWithUpdate) {
    const DiscreteBelief b{0.05, 3.0, 4.0, false};
    BeliefState s = BeliefState::initial(b);
    s = update_discrete(s, b, 0.3);
    const double inc = log_density_increment(s, b, -0.4);
    EXPECT_DOUBLE_EQ(update_discrete(s, b, -0.4).log_density, s.log_density + inc);
}

TEST(DiscreteBelief, OrderInvariance) {
    const DiscreteBelief b{0.2, 2.0, 1.5, false};
    std::vector<double> x{0.3, -1.2, 0.05, 2.0, -0.7, 0.9};
    const double forward = log_likelihood_ratio(feed(b, x), b);
    std::vector<double> y = x;
    std::reverse(y.begin(), y.end());
    std::rotate(y.begin(), y.begin() + 2, y.end());
    EXPECT_NEAR(log_likelihood_ratio(feed(b, y), b), forward, 1e-12);
}

TEST(DiscreteBelief, InfinitePriorSampleSizeFreezesMean) {
    const DiscreteBelief b{0.1, std::numeric_limits<double>::infinity(), 2.0, false};
    const BeliefState s = feed(b, {1.0, -3.0, 2.0});
    EXPECT_DOUBLE_EQ(s.mean, 0.1);
    EXPECT_TRUE(std::isfinite(s.log_density));
}

TEST(DiscreteBelief, MartingaleUnderReference) {
    const DiscreteBelief b{0.0, 20.0, 1.0, false};
    const int n = 100000;
    RunningStats stats;
    for (int path = 0; path < n; ++path) {
        Rng rng(5, StreamDomain::Reference, static_cast<std::uint64_t>(path));
        BeliefState s = BeliefState::initial(b);
        for (int k = 0; k < 10; ++k) s = update_discrete(s, b, rng.normal());
        stats.add(likelihood_ratio(s, b));
    }
    const double se = std::sqrt(stats.sample_variance() / n);
    EXPECT_LT(std::abs(stats.mean() - 1.0), 3.0 * se);
}

TEST(DiscreteBelief, LargeRatioSaturatesInsteadOfOverflowing) {
    const DiscreteBelief b{0.0, 1.0, 1.0, false};
    BeliefState s = BeliefState::initial(b);
    for (int k = 0; k < 100; ++k) s = update_discrete(s, b, 50.0);
    EXPECT_TRUE(std::isfinite(log_likelihood_ratio(s, b)));
    EXPECT_THROW(likelihood_ratio(s, b), SaturationError);
}

TEST(DiscreteBelief, Validation) {
    EXPECT_THROW(validate(DiscreteBelief{0.0, 0.0, 1.0, false}), ValidationError);
    EXPECT_THROW(validate(DiscreteBelief{0.0, 1.0, -1.0, false}), ValidationError);
    EXPECT_THROW(validate(DiscreteBelief{std::nan(""), 1.0, 1.0, false}), ValidationError);
}
