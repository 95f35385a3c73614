#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "divbelief/beliefs.hpp"

// Continuous-time equilibrium with log agents, U_j(t, c) = exp(-rho_j t) log c.
//
// Every cross-sectional quantity is a function of the per-agent log weights
//     l_j = -rho_j t + log Lambda_j - log nu_j,
// whose softmax is q_j. In particular the PD ratio is sum_j q_j / rho_j, wealth
// is w_j = delta q_j / rho_j and consumption c_j = delta q_j. Working with the
// log weights keeps long horizons and impatient agents free of under/overflow.
namespace divbelief::ct {

struct AgentSpec {
    double rho = 0.05;                      // impatience, 1/time, > 0
    std::optional<double> nu;               // equilibrium weight, > 0
    std::optional<double> initial_wealth;   // alternative to nu, > 0
    beliefs::ContinuousBelief belief = beliefs::ConstantDrift{};

    /// nu, or 1 / (rho w_0) when the initial wealth is given (Lambda_0 = 1,
    /// zeta_0 = 1 convention).
    double weight() const;
};

struct MarketSpec {
    double sigma = 0.2;        // dividend volatility per sqrt(time), > 0
    double alpha_star = 0.0;   // true drift adjustment of the dividend
    double delta0 = 1.0;       // initial dividend, > 0
    std::vector<AgentSpec> agents;
};

/// Throws ValidationError with a field path such as "agents[2].rho".
void validate(const MarketSpec& spec);

struct SimulationOptions {
    double horizon = 128.0;     // years
    double dt = 1.0 / 252.0;    // years per step
};

/// Driver path on the grid t_k = k dt, k = 0..n.
struct DriverPath {
    double dt = 0.0;
    std::vector<double> t;
    std::vector<double> x;          // cumulative Brownian driver, x[0] = 0
    std::vector<double> log_delta;  // log dividend
};

/// X has i.i.d. N(0, dt) increments under the reference measure and
///   d log delta = sigma dX + (sigma alpha* - sigma^2 / 2) dt.
/// `seed` is the full 64-bit stream seed; see path_seed().
DriverPath simulate_driver(const MarketSpec& spec, double horizon, double dt, std::uint64_t seed);

/// Stream seed of Monte Carlo path `path` under master seed `master`.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t path);

// --- cross-sectional formulas ----------------------------------------------

std::vector<double> log_weights(std::span<const AgentSpec> agents,
                                std::span<const double> log_lambda, double t);

struct StatePriceDensity {
    double log_L = 0.0;  // log(zeta_t delta_t) = log sum_j exp(-rho_j t) Lambda_j / nu_j
    double L = 0.0;
    double zeta = 0.0;
};

StatePriceDensity state_price_density(std::span<const AgentSpec> agents,
                                      std::span<const double> log_lambda, double t,
                                      double delta);

struct StockPrice {
    double S = 0.0;
    double pd = 0.0;  // S / delta; independent of delta
};

/// Throws IntegrabilityError when the PD ratio exceeds kMaxPriceDividend.
StockPrice stock_price(std::span<const AgentSpec> agents, std::span<const double> log_lambda,
                       double delta, double t);

inline constexpr double kMaxPriceDividend = 1e6;

struct RateAndKappa {
    double r = 0.0;
    double kappa = 0.0;
    double alpha_bar = 0.0;
    double rho_bar = 0.0;
    std::vector<double> q;
};

/// r = rho_bar + sigma (alpha* + alpha_bar) - sigma^2, kappa = sigma - alpha_bar.
RateAndKappa rate_and_kappa(std::span<const AgentSpec> agents,
                            std::span<const double> log_lambda,
                            std::span<const double> alphas, double sigma, double alpha_star,
                            double t);

struct StockVolatility {
    double sigma_S = 0.0;
    double a = 0.0;  // alpha average with weights proportional to q_j / rho_j
};

StockVolatility stock_volatility(std::span<const AgentSpec> agents,
                                 std::span<const double> log_lambda,
                                 std::span<const double> alphas, double kappa, double t);

struct Holdings {
    std::vector<double> w;   // wealth
    std::vector<double> c;   // consumption rate, rho_j w_j
    std::vector<double> pi;  // units of stock held
};

/// Throws SingularMarketError when a + kappa vanishes.
Holdings wealth_and_portfolios(std::span<const AgentSpec> agents,
                               std::span<const double> log_lambda,
                               std::span<const double> alphas, double zeta, double S,
                               double kappa, double a, double t);

struct TradeVolume {
    std::vector<double> theta;
    double total = 0.0;  // Euclidean norm of theta
};

/// Diffusion coefficient of each agent's holdings. Only defined when all rho_j
/// are equal (and sigma, alpha_j constant); throws ValidationError otherwise.
TradeVolume trade_volume(std::span<const AgentSpec> agents, std::span<const double> q,
                         std::span<const double> alphas, double alpha_bar, double sigma);

/// Inverse marginal utility I_j(t, y).
using InverseMarginal = std::function<double(double t, double y)>;

/// Solves sum_j I_j(t, zeta nu_j / Lambda_j) = delta for zeta > 0 by bracketed
/// bisection in log zeta, to relative tolerance 1e-14. Each I_j(t, .) must be
/// continuous, strictly decreasing and span (0, inf); throws BracketError if no
/// bracket is found.
double solve_market_clearing_general(std::span<const InverseMarginal> inverse_marginals,
                                     std::span<const double> lambda,
                                     std::span<const double> nu, double delta, double t);

// --- paths -------------------------------------------------------------------

struct EquilibriumPoint {
    double t = 0.0;
    double x = 0.0;
    double delta = 0.0;
    double zeta = 0.0;
    double log_zeta = 0.0;
    double S = 0.0;
    double pd = 0.0;
    double r = 0.0;
    double kappa = 0.0;
    double sigma_S = 0.0;
    double a = 0.0;
    double alpha_bar = 0.0;
    double rho_bar = 0.0;
    std::vector<double> log_lambda;
    std::vector<double> alpha;
    std::vector<double> q;
    std::vector<double> w;
    std::vector<double> c;
    std::vector<double> pi;
    std::vector<double> theta;  // NaN unless trade_volume's hypotheses hold
};

struct EquilibriumPath {
    double dt = 0.0;
    std::vector<EquilibriumPoint> points;
};

/// Full cross-section at one grid point.
EquilibriumPoint evaluate_point(const MarketSpec& spec, double t, double x, double log_delta,
                                std::span<const double> log_lambda);

/// Runs the belief processes along `driver` (log-form Euler, alpha evaluated
/// at the start of each step) and calls `visit` at every grid point, in order.
void evaluate_path(const MarketSpec& spec, const DriverPath& driver,
                   const std::function<void(const EquilibriumPoint&)>& visit);

EquilibriumPath evaluate_path(const MarketSpec& spec, const DriverPath& driver);

/// simulate_driver + evaluate_path.
EquilibriumPath simulate_path(const MarketSpec& spec, const SimulationOptions& options,
                              std::uint64_t seed);

/// True when all rho_j are equal and every belief is a constant drift.
bool trade_volume_applicable(const MarketSpec& spec);

} // namespace divbelief::ct
