#pragma once

#include <cstdint>
#include <span>
#include <variant>

namespace divbelief::beliefs {

// ---------------------------------------------------------------------------
// Continuous time. An agent's belief is a likelihood-ratio martingale
// dL = L * alpha_t * dX with respect to the reference measure, under which the
// driver X is a standard Brownian motion.
// ---------------------------------------------------------------------------

/// Fixed drift adjustment alpha (per sqrt(time unit)).
struct ConstantDrift {
    double alpha = 0.0;
};

/// Gaussian prior N(beta, 1/epsilon) on an unknown drift, updated from X.
struct BayesianGaussian {
    double beta = 0.0;
    double epsilon = 1.0;  // prior precision, in time units; > 0
};

using ContinuousBelief = std::variant<ConstantDrift, BayesianGaussian>;

/// Throws ValidationError (field "belief.epsilon") if epsilon <= 0.
void validate(const ContinuousBelief& belief);

/// Current drift alpha_t. Constant drift ignores (t, x); the gaussian learner
/// returns its posterior mean (x + beta*epsilon) / (epsilon + t).
double alpha_continuous(const ContinuousBelief& belief, double t, double x);

/// One log-form Euler step of dL = L alpha dX:
///   log L' = log L + alpha dX - alpha^2 dt / 2.
/// Exact for constant alpha.
double lambda_sde_step_log(double log_lambda, double alpha, double dx, double dt) noexcept;

/// Same step on the positive scale; the result is always > 0 unless it
/// underflows, in which case SaturationError is thrown.
double lambda_sde_step(double lambda, double alpha, double dx, double dt);

/// Closed forms of log L_t given X_t. For the gaussian learner this is the
/// prior mixture of exponential martingales:
///   sqrt(eps/(eps+t)) * exp{(x^2 + 2 beta eps x - eps beta^2 t) / (2 (eps + t))}.
double log_lambda_closed_form(const ContinuousBelief& belief, double t, double x);

// ---------------------------------------------------------------------------
// Discrete time. Per-step observations are taken to be i.i.d. N(mu, 1/tau)
// with tau known; mu has a N(mu_hat_0, 1/(K_0 tau)) prior.
// ---------------------------------------------------------------------------

struct DiscreteBelief {
    double prior_mean = 0.0;         // mu_hat_0, per step
    double prior_sample_size = 1.0;  // K_0 > 0; +inf freezes the belief
    double precision = 1.0;          // tau > 0, per step
    bool diligent = false;           // learns from dividend rather than price increments
};

void validate(const DiscreteBelief& belief);

/// Posterior after `steps` observations. `log_density` is log of the agent's
/// joint density of everything seen so far.
struct BeliefState {
    double log_density = 0.0;
    double mean = 0.0;          // mu_hat_t
    double sample_size = 1.0;   // K_t = K_0 + t
    std::int64_t steps = 0;

    static BeliefState initial(const DiscreteBelief& belief) noexcept;
};

/// Observe one increment. With e = x - mu_hat_t:
///   mu_hat_{t+1} = mu_hat_t + e / K_{t+1}
///   2 dlog = -tau e^2 K_t/K_{t+1} + log(K_t/K_{t+1}) + log(tau / 2 pi).
BeliefState update_discrete(const BeliefState& state, const DiscreteBelief& belief,
                            double increment) noexcept;

/// Change in log density that update_discrete would apply for `increment`.
double log_density_increment(const BeliefState& state, const DiscreteBelief& belief,
                             double increment) noexcept;

/// log of the likelihood ratio against the i.i.d. N(0, 1/tau) reference:
///   (tau/2)(K_t mu_t^2 - K_0 mu_0^2) + log(K_0/K_t) / 2.
/// Requires finite K_0.
double log_likelihood_ratio(const BeliefState& state, const DiscreteBelief& belief);

/// exp of the above; throws SaturationError instead of returning inf or 0.
double likelihood_ratio(const BeliefState& state, const DiscreteBelief& belief);

} // namespace divbelief::beliefs
