#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "divbelief/beauty.hpp"
#include "divbelief/errors.hpp"
#include "divbelief/rng.hpp"

using namespace divbelief;
using namespace divbelief::beauty;

namespace {

ContestSpec two_agents() { return ContestSpec{{{1.0, 0.0, 1.0}, {1.0, 1.0, 1.0}}}; }

ContestSpec random_spec(std::uint64_t index) {
    Rng r(1, StreamDomain::Contest, index);
    ContestSpec s;
    const int n = 2 + static_cast<int>(r.uniform() * 5);
    for (int j = 0; j < n; ++j) {
        s.agents.push_back({r.uniform(0.2, 5.0), r.normal(0.0, 1.0), r.uniform(0.1, 3.0)});
    }
    return s;
}

// Exponent of agent j's expected CARA utility when professing x while the
// others profess `others`: utility = -exp(-e) / gamma, so maximize e.
long double utility_exponent(const ContestSpec& s, std::size_t j, const std::vector<double>& others,
                             long double x) {
    long double wsum = 0.0L;
    std::vector<long double> p(s.agents.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = 1.0L / (static_cast<long double>(s.agents[i].gamma) * s.agents[i].v);
        wsum += p[i];
    }
    long double price = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        price += p[i] / wsum * (i == j ? x : static_cast<long double>(others[i]));
    }
    const auto& a = s.agents[j];
    const long double theta = (x - price) / (static_cast<long double>(a.gamma) * a.v);
    return a.gamma * theta * (a.alpha - price) - 0.5L * a.gamma * a.gamma * theta * theta * a.v;
}

double golden_section_argmax(const ContestSpec& s, std::size_t j, const std::vector<double>& others) {
    const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double lo = s.agents[j].alpha - 20.0L;
    long double hi = s.agents[j].alpha + 20.0L;
    long double c = hi - phi * (hi - lo);
    long double d = lo + phi * (hi - lo);
    long double fc = utility_exponent(s, j, others, c);
    long double fd = utility_exponent(s, j, others, d);
    for (int it = 0; it < 200; ++it) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = utility_exponent(s, j, others, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = utility_exponent(s, j, others, d);
        }
    }
    return static_cast<double>(0.5L * (lo + hi));
}

} // namespace

TEST(Truthful, IdenticalAgentsDoNotTrade) {
    const ContestSpec s{{{2.0, 0.3, 0.5}, {2.0, 0.3, 0.5}, {2.0, 0.3, 0.5}}};
    const auto eq = truthful_equilibrium(s);
    EXPECT_DOUBLE_EQ(eq.S0, 0.3);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(eq.theta[j], 0.0);
        EXPECT_DOUBLE_EQ(eq.objective[j], -0.5);
    }
    const auto w = welfare_comparison(s);
    EXPECT_FALSE(w.all_improve);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_FALSE(w.improves[j]);
        EXPECT_DOUBLE_EQ(w.faked.alpha_tilde[j], 0.3);
    }
}

TEST(Truthful, TwoAgentHandValues) {
    const auto eq = truthful_equilibrium(two_agents());
    EXPECT_DOUBLE_EQ(eq.p[0], 0.5);
    EXPECT_DOUBLE_EQ(eq.S0, 0.5);
    EXPECT_DOUBLE_EQ(eq.theta[0], -0.5);
    EXPECT_DOUBLE_EQ(eq.theta[1], 0.5);
}

TEST(Truthful, VarianceScalingLeavesPriceUnchanged) {
    ContestSpec s = random_spec(3);
    const auto base = truthful_equilibrium(s);
    for (auto& a : s.agents) a.v *= 3.7;
    const auto scaled = truthful_equilibrium(s);
    EXPECT_NEAR(scaled.S0, base.S0, 1e-14);
    for (std::size_t j = 0; j < s.agents.size(); ++j) {
        EXPECT_NEAR(scaled.p[j], base.p[j], 1e-15);
    }
}

TEST(Faked, TwoAgentHandValues) {
    const auto eq = pareto_faked_equilibrium(two_agents());
    EXPECT_DOUBLE_EQ(eq.q[0], 0.5);
    EXPECT_DOUBLE_EQ(eq.S0, 0.5);
    EXPECT_DOUBLE_EQ(eq.alpha_tilde[0], 0.25);
    EXPECT_DOUBLE_EQ(eq.alpha_tilde[1], 0.75);
    EXPECT_DOUBLE_EQ(eq.theta[0] + eq.theta[1], 0.0);
}

TEST(Faked, SingleAgentRejected) {
    EXPECT_THROW(pareto_faked_equilibrium(ContestSpec{{{1.0, 0.0, 1.0}}}), ValidationError);
}

TEST(Faked, ObjectiveMatchesDirectUtility) {
    const ContestAgent a{1.7, 0.4, 0.8};
    for (double x : {-1.0, 0.1, 0.4, 2.0}) {
        const double price = 0.25;
        const double theta = (x - price) / (a.gamma * a.v);
        const double direct = -std::exp(-a.gamma * theta * (a.alpha - price) +
                                        0.5 * a.gamma * a.gamma * theta * theta * a.v) /
                              a.gamma;
        EXPECT_NEAR(faked_objective(a, x, price), direct, 1e-14);
    }
}

TEST(Faked, BestResponsesMatchNumericMaximizer) {
    for (std::uint64_t i = 0; i < 200; ++i) {
        const ContestSpec s = random_spec(i);
        const auto eq = pareto_faked_equilibrium(s);
        for (std::size_t j = 0; j < s.agents.size(); ++j) {
            const double analytic = best_response(s, j, eq.alpha_tilde);
            ASSERT_NEAR(analytic, eq.alpha_tilde[j], 1e-12);
            ASSERT_NEAR(analytic, golden_section_argmax(s, j, eq.alpha_tilde), 1e-8);
        }
        // Off-equilibrium profiles too.
        Rng r(2, StreamDomain::Contest, i);
        std::vector<double> others(s.agents.size());
        for (double& o : others) o = r.normal(0.0, 2.0);
        ASSERT_NEAR(best_response(s, 0, others), golden_section_argmax(s, 0, others), 1e-8);
    }
}

TEST(Welfare, IdentityAndFixedPointOnRandomSpecs) {
    for (std::uint64_t i = 0; i < 2000; ++i) {
        const auto w = welfare_comparison(random_spec(i));
        ASSERT_NEAR(w.identity_lhs, w.identity_rhs, 1e-12);
        ASSERT_LT(w.max_fixed_point_residual, 1e-12);
        double sp = 0.0;
        double sq = 0.0;
        double st = 0.0;
        double sft = 0.0;
        for (std::size_t j = 0; j < w.truthful.p.size(); ++j) {
            sp += w.truthful.p[j];
            sq += w.faked.q[j];
            st += w.truthful.theta[j];
            sft += w.faked.theta[j];
        }
        ASSERT_NEAR(sp, 1.0, 1e-14);
        ASSERT_NEAR(sq, 1.0, 1e-14);
        ASSERT_NEAR(st, 0.0, 1e-12);
        ASSERT_NEAR(sft, 0.0, 1e-12);
    }
}

TEST(Welfare, NeverAllImprove) {
    int all_improve = 0;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        all_improve += welfare_comparison(random_spec(i)).all_improve ? 1 : 0;
    }
    EXPECT_EQ(all_improve, 0);
}

TEST(Welfare, ImprovementFlagsAgreeWithObjectives) {
    for (std::uint64_t i = 0; i < 500; ++i) {
        const auto w = welfare_comparison(random_spec(i));
        for (std::size_t j = 0; j < w.improves.size(); ++j) {
            const double gap = w.faked.objective[j] - w.truthful.objective[j];
            if (std::abs(gap) > 1e-12) {
                ASSERT_EQ(w.improves[j], gap > 0.0);
                ASSERT_EQ(w.worse[j], gap < 0.0);
            }
        }
    }
}

TEST(Welfare, FrozenEveryoneWorseFixtures) {
    const auto w2 = welfare_comparison(two_agents());
    EXPECT_TRUE(w2.all_worse);
    EXPECT_NEAR(w2.faked.objective[0], -std::exp(-3.0 / 32.0), 1e-15);
    EXPECT_NEAR(w2.truthful.objective[0], -std::exp(-1.0 / 8.0), 1e-15);

    const ContestSpec three{{{1.858, -0.172, 0.901}, {4.658, 0.316, 0.226}, {3.841, 1.489, 0.241}}};
    const auto w3 = welfare_comparison(three);
    EXPECT_TRUE(w3.all_worse);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_LT(w3.faked.objective[j], w3.truthful.objective[j]);
    }
}

TEST(Welfare, TranslationEquivariance) {
    const ContestSpec s = random_spec(17);
    ContestSpec shifted = s;
    for (auto& a : shifted.agents) a.alpha += 2.5;
    const auto a = welfare_comparison(s);
    const auto b = welfare_comparison(shifted);
    EXPECT_NEAR(b.truthful.S0, a.truthful.S0 + 2.5, 1e-13);
    EXPECT_NEAR(b.faked.S0, a.faked.S0 + 2.5, 1e-13);
    for (std::size_t j = 0; j < s.agents.size(); ++j) {
        EXPECT_NEAR(b.faked.alpha_tilde[j], a.faked.alpha_tilde[j] + 2.5, 1e-13);
        EXPECT_NEAR(b.truthful.theta[j], a.truthful.theta[j], 1e-12);
        EXPECT_NEAR(b.faked.theta[j], a.faked.theta[j], 1e-12);
        EXPECT_NEAR(b.truthful.objective[j], a.truthful.objective[j], 1e-12);
        EXPECT_NEAR(b.faked.objective[j], a.faked.objective[j], 1e-12);
    }
}

TEST(PartialFaking, TruthfulAgentsAlwaysGainByDeviating) {
    for (std::uint64_t i = 0; i < 500; ++i) {
        const ContestSpec s = random_spec(i);
        std::vector<bool> faking(s.agents.size());
        Rng r(3, StreamDomain::Contest, i);
        for (std::size_t j = 0; j < faking.size(); ++j) faking[j] = r.uniform() < 0.5;
        const auto pf = partial_faking(s, faking);
        for (std::size_t j = 0; j < faking.size(); ++j) {
            if (faking[j]) {
                ASSERT_EQ(pf.deviation_gain[j], 0.0);
            } else {
                ASSERT_GE(pf.deviation_gain[j], 0.0);
                if (std::abs(s.agents[j].alpha - pf.S0) > 1e-6) {
                    ASSERT_GT(pf.deviation_gain[j], 0.0);
                }
            }
        }
    }
}

TEST(ContestValidation, FieldPaths) {
    ContestSpec s = two_agents();
    s.agents[1].v = 0.0;
    try {
        validate(s);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "agents[1].v");
    }
    s = two_agents();
    s.agents[0].gamma = -1.0;
    EXPECT_THROW(truthful_equilibrium(s), ValidationError);
}
