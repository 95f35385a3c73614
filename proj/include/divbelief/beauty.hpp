#pragma once

#include <cstddef>
#include <vector>

// One-period market for a claim to X in zero net supply, traded by CARA agents
// who believe X ~ N(alpha_j, v_j). Agents may instead profess a faked mean and
// submit demands as if it were true.
namespace divbelief::beauty {

struct ContestAgent {
    double gamma = 1.0;  // risk aversion, > 0
    double alpha = 0.0;  // true mean belief
    double v = 1.0;      // believed variance, > 0
};

struct ContestSpec {
    std::vector<ContestAgent> agents;
};

/// Field paths look like "agents[1].v".
void validate(const ContestSpec& spec);

/// p_j proportional to 1 / (gamma_j v_j), summing to one.
std::vector<double> price_weights(const ContestSpec& spec);

struct TruthfulEquilibrium {
    std::vector<double> p;
    double S0 = 0.0;
    std::vector<double> theta;
    std::vector<double> objective;  // -exp(-(alpha - S0)^2 / (2 v)) / gamma
};

TruthfulEquilibrium truthful_equilibrium(const ContestSpec& spec);

struct FakedEquilibrium {
    std::vector<double> p;
    std::vector<double> q;            // proportional to p (1 - p), summing to one
    double S0 = 0.0;                  // price under the professed beliefs
    std::vector<double> alpha_tilde;  // professed means
    std::vector<double> theta;
    std::vector<double> objective;    // expected utility under the TRUE belief
};

/// The profile where every agent's professed mean is a best response to the
/// others'. Needs at least two agents (ValidationError otherwise).
FakedEquilibrium pareto_faked_equilibrium(const ContestSpec& spec);

/// Expected utility, under N(alpha, v), of holding the demand implied by the
/// professed mean `alpha_tilde` at price `price`.
double faked_objective(const ContestAgent& agent, double alpha_tilde, double price);

/// Agent j's best professed mean when every other agent i professes
/// others[i] (others[j] is ignored).
double best_response(const ContestSpec& spec, std::size_t j, const std::vector<double>& others);

struct WelfareComparison {
    TruthfulEquilibrium truthful;
    FakedEquilibrium faked;
    std::vector<bool> improves;  // strictly better off when everyone fakes
    std::vector<bool> worse;     // strictly worse off
    bool all_improve = false;
    bool all_worse = false;
    // sum q (alpha - S0)^2 and sum q (alpha - S0~)^2 + (S0 - S0~)^2
    double identity_lhs = 0.0;
    double identity_rhs = 0.0;
    double max_fixed_point_residual = 0.0;
    std::vector<bool> tilde_between;  // alpha_tilde_j lies between alpha_j and S0
};

WelfareComparison welfare_comparison(const ContestSpec& spec);

/// Agents in `faking` play best responses among themselves while the rest
/// report truthfully. For every truthful agent we report its best unilateral
/// deviation and what it gains: the objective is -exp(-g / v) / gamma, and the
/// gain is the increase of g / v. Entries for faking agents are zero.
struct PartialFaking {
    double S0 = 0.0;
    std::vector<double> alpha_tilde;
    std::vector<double> deviation;
    std::vector<double> deviation_gain;  // >= 0, zero only when alpha_j equals S0
};

PartialFaking partial_faking(const ContestSpec& spec, const std::vector<bool>& faking);

} // namespace divbelief::beauty
