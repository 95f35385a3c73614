#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "divbelief/beliefs.hpp"

// Discrete-time market of log agents who (mis)read the stock price as a fixed
// multiple of the dividend. Non-diligent agents update their gaussian
// posteriors from log price increments; diligent agents use the true log
// dividend increments. Each step the new price solves a scalar fixed point,
// because the belief update feeds back into the price.
namespace divbelief::feedback {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Annualized inputs; per-step values are derived with dt (rates) and
/// sqrt(dt) (volatilities).
struct FeedbackConfig {
    int agents = 30;
    int diligent = 0;              // agents [0, diligent) are diligent
    double sigma = 0.25;           // true dividend volatility
    double growth = 0.015;         // true mean log growth of the dividend
    double steps_per_year = 252.0;
    double years = 25.0;
    std::uint64_t seed = 1;
    Range rho_range{0.04, 0.33};
    Range tau_factor_range{0.4, 1.05};     // agent tau as a multiple of the true tau
    Range prior_mean_range{-0.05, 0.15};   // annualized prior mean growth
    double nu = 1.0;
    double prior_sample_years = 1.0;       // K_0 = prior_sample_years * steps_per_year
    double delta0 = 1.0;
    int scan_points = 200;
    double crash_threshold_sd = 5.0;

    double dt() const noexcept { return 1.0 / steps_per_year; }
    std::int64_t steps() const noexcept;
    /// Precision of the true per-step log growth, 1 / (sigma^2 dt).
    double true_precision() const noexcept;
};

void validate(const FeedbackConfig& config);

struct FeedbackAgent {
    double rho_annual = 0.0;
    double tau_factor = 0.0;
    double prior_mean_annual = 0.0;
    double rho = 0.0;        // per step
    double nu = 1.0;
    double nu_tilde = 0.0;   // nu (e^rho - 1)
    beliefs::DiscreteBelief belief;
};

/// Agent j's characteristics come from its own substream, so running with more
/// agents under the same seed reproduces the first ones exactly.
std::vector<FeedbackAgent> draw_agents(const FeedbackConfig& config);

struct DiscretePrice {
    double log_numerator = 0.0;    // log sum_j exp(-rho_j t) lambda_j / nu_tilde_j
    double log_denominator = 0.0;  // log sum_j exp(-rho_j t) lambda_j / nu_j
    double log_pd = 0.0;
    double pd = 0.0;
};

/// Ex-dividend price/dividend ratio at step t from the agents' log densities.
DiscretePrice discrete_price(std::span<const FeedbackAgent> agents,
                             std::span<const double> log_density, std::int64_t t);

struct FeedbackState {
    std::int64_t t = 0;
    double log_delta = 0.0;
    double log_S = 0.0;
    double log_S_star = 0.0;
    double last_xi = 0.0;
    std::vector<beliefs::BeliefState> observed;  // beliefs behind S
    std::vector<beliefs::BeliefState> shadow;    // all-diligent copy behind S*

    static FeedbackState initial(std::span<const FeedbackAgent> agents,
                                 const FeedbackConfig& config);
};

struct StepOutcome {
    double xi = 0.0;         // log(S_{t+1} / S_t)
    double residual = 0.0;   // |S_t e^xi / delta_{t+1} - PD_{t+1}| / PD_{t+1}
    int roots = 1;           // sign changes found by the scan
    bool warning = false;    // several roots; the one nearest last_xi was taken
    FeedbackState state;
};

/// Advance one step given the true log dividend increment. Throws
/// FixedPointError (with a state dump) if no root is bracketed. The search
/// widens around the dividend increment up to the larger of 1 and a bound that
/// provably contains every root.
StepOutcome step_fixed_point(const FeedbackState& state, std::span<const FeedbackAgent> agents,
                             const FeedbackConfig& config, double true_increment);

struct FeedbackRecord {
    double t = 0.0;  // years
    double delta = 0.0;
    double S_star = 0.0;
    double S = 0.0;
    double log_pd_star = 0.0;  // log(S* / delta)
    double log_ratio = 0.0;    // log(S / S*)
    double xi = 0.0;
    int warnings = 0;
};

struct FeedbackMetrics {
    double max_log_ratio = 0.0;
    double min_log_ratio = 0.0;
    double range_log_ratio = 0.0;
    std::int64_t crash_count = 0;     // |xi - dlog delta| > threshold daily SDs
    std::int64_t warning_steps = 0;
    double max_residual = 0.0;
    std::int64_t steps = 0;
};

struct FeedbackRun {
    std::vector<FeedbackAgent> agents;
    std::vector<FeedbackRecord> records;  // t = 0..steps
    FeedbackMetrics metrics;
};

/// Full trajectory. Deterministic given the config (including seed).
FeedbackRun run_feedback(const FeedbackConfig& config);

} // namespace divbelief::feedback
