#include "divbelief/beliefs.hpp"

#include <cmath>
#include <numbers>

#include "divbelief/errors.hpp"
#include "divbelief/numerics.hpp"

namespace divbelief::beliefs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

void validate(const ContinuousBelief& belief) {
    if (const auto* b = std::get_if<BayesianGaussian>(&belief)) {
        if (!(b->epsilon > 0.0) || !std::isfinite(b->epsilon)) {
            throw ValidationError("belief.epsilon", "prior precision must be finite and > 0");
        }
        if (!std::isfinite(b->beta)) {
            throw ValidationError("belief.beta", "must be finite");
        }
    } else if (!std::isfinite(std::get<ConstantDrift>(belief).alpha)) {
        throw ValidationError("belief.alpha", "must be finite");
    }
}

double alpha_continuous(const ContinuousBelief& belief, double t, double x) {
    return std::visit(overloaded{
                          [](const ConstantDrift& c) { return c.alpha; },
                          [&](const BayesianGaussian& b) {
                              return (x + b.beta * b.epsilon) / (b.epsilon + t);
                          },
                      },
                      belief);
}

double lambda_sde_step_log(double log_lambda, double alpha, double dx, double dt) noexcept {
    return log_lambda + alpha * dx - 0.5 * alpha * alpha * dt;
}

double lambda_sde_step(double lambda, double alpha, double dx, double dt) {
    return checked_exp(lambda_sde_step_log(std::log(lambda), alpha, dx, dt));
}

double log_lambda_closed_form(const ContinuousBelief& belief, double t, double x) {
    return std::visit(overloaded{
                          [&](const ConstantDrift& c) { return c.alpha * x - 0.5 * c.alpha * c.alpha * t; },
                          [&](const BayesianGaussian& b) {
                              const double e = b.epsilon;
                              return 0.5 * std::log(e / (e + t)) +
                                     (x * x + 2.0 * b.beta * e * x - e * b.beta * b.beta * t) /
                                         (2.0 * (e + t));
                          },
                      },
                      belief);
}

void validate(const DiscreteBelief& belief) {
    if (!(belief.prior_sample_size > 0.0)) {
        throw ValidationError("prior_sample_size", "K_0 must be > 0");
    }
    if (!(belief.precision > 0.0) || !std::isfinite(belief.precision)) {
        throw ValidationError("precision", "tau must be finite and > 0");
    }
    if (!std::isfinite(belief.prior_mean)) {
        throw ValidationError("prior_mean", "must be finite");
    }
}

BeliefState BeliefState::initial(const DiscreteBelief& belief) noexcept {
    return BeliefState{0.0, belief.prior_mean, belief.prior_sample_size, 0};
}

double log_density_increment(const BeliefState& state, const DiscreteBelief& belief,
                             double increment) noexcept {
    const double tau = belief.precision;
    const double e = increment - state.mean;
    const double log_norm = std::log(tau / (2.0 * std::numbers::pi));
    if (std::isinf(state.sample_size)) {
        // Frozen belief: K_t/K_{t+1} = 1.
        return 0.5 * (-tau * e * e + log_norm);
    }
    const double k = state.sample_size;
    const double k_next = k + 1.0;
    return 0.5 * (-tau * e * e * (k / k_next) + std::log(k / k_next) + log_norm);
}

BeliefState update_discrete(const BeliefState& state, const DiscreteBelief& belief,
                            double increment) noexcept {
    BeliefState next;
    next.steps = state.steps + 1;
    // K_t is recomputed from the ledger, never accumulated.
    next.sample_size = belief.prior_sample_size + static_cast<double>(next.steps);
    next.log_density = state.log_density + log_density_increment(state, belief, increment);
    const double e = increment - state.mean;
    next.mean = std::isinf(next.sample_size) ? state.mean : state.mean + e / next.sample_size;
    return next;
}

double log_likelihood_ratio(const BeliefState& state, const DiscreteBelief& belief) {
    const double k0 = belief.prior_sample_size;
    const double kt = state.sample_size;
    if (std::isinf(k0)) {
        // (mu_hat, K) no longer carries sum(X) once the prior is a point mass.
        throw ValidationError("prior_sample_size",
                              "likelihood ratio needs a finite K_0");
    }
    const double tau = belief.precision;
    const double mu0 = belief.prior_mean;
    const double mut = state.mean;
    return 0.5 * tau * (kt * mut * mut - k0 * mu0 * mu0) + 0.5 * std::log(k0 / kt);
}

double likelihood_ratio(const BeliefState& state, const DiscreteBelief& belief) {
    return checked_exp(log_likelihood_ratio(state, belief));
}

} // namespace divbelief::beliefs
