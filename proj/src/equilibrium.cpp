#include "divbelief/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "divbelief/errors.hpp"
#include "divbelief/numerics.hpp"
#include "divbelief/rng.hpp"

namespace divbelief::ct {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string agent_field(std::size_t j, const char* name) {
    return "agents[" + std::to_string(j) + "]." + name;
}

void check_sizes(std::span<const AgentSpec> agents, std::span<const double> v, const char* what) {
    if (v.size() != agents.size()) {
        throw ValidationError(what, "expected one value per agent");
    }
}

// Weighted sums that every formula below is built from.
struct CrossSection {
    double log_L = 0.0;
    std::vector<double> log_w;
    std::vector<double> q;
    double pd = 0.0;  // sum q_j / rho_j
};

void fill_cross_section(CrossSection& cs, std::span<const AgentSpec> agents,
                        std::span<const double> log_lambda, double t) {
    const std::size_t n = agents.size();
    cs.log_w.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        cs.log_w[j] = -agents[j].rho * t + log_lambda[j] - std::log(agents[j].weight());
    }
    cs.log_L = log_sum_exp(cs.log_w);
    cs.q.resize(n);
    cs.pd = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cs.q[j] = std::exp(cs.log_w[j] - cs.log_L);
        cs.pd += cs.q[j] / agents[j].rho;
    }
}

void check_pd(double pd) {
    if (!(pd <= kMaxPriceDividend)) {
        throw IntegrabilityError("price/dividend ratio " + std::to_string(pd) +
                                 " exceeds 1e6; integrability condition probably fails");
    }
}

double average_a(std::span<const AgentSpec> agents, std::span<const double> q,
                 std::span<const double> alphas, double pd) {
    double num = 0.0;
    for (std::size_t j = 0; j < agents.size(); ++j) {
        num += q[j] * alphas[j] / agents[j].rho;
    }
    return num / pd;
}

bool rhos_equal(std::span<const AgentSpec> agents) {
    for (const auto& a : agents) {
        if (std::abs(a.rho - agents.front().rho) > 1e-12 * std::abs(agents.front().rho)) {
            return false;
        }
    }
    return true;
}

void fill_trade_volume(std::span<const double> q, std::span<const double> alphas,
                       double alpha_bar, double sigma, std::vector<double>& theta, double& total) {
    double v = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double d = alphas[j] - alpha_bar;
        v += q[j] * d * d;
    }
    theta.resize(q.size());
    double sq = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double d = alphas[j] - alpha_bar;
        theta[j] = q[j] * (d * d / sigma - v / sigma + d);
        sq += theta[j] * theta[j];
    }
    total = std::sqrt(sq);
}

// Reusable scratch so that path evaluation does not allocate per grid point.
void evaluate_into(EquilibriumPoint& p, CrossSection& cs, const MarketSpec& spec, bool with_theta,
                   double t, double x, double log_delta, std::span<const double> log_lambda) {
    const auto& agents = spec.agents;
    const std::size_t n = agents.size();
    fill_cross_section(cs, agents, log_lambda, t);
    check_pd(cs.pd);

    p.t = t;
    p.x = x;
    p.delta = std::exp(log_delta);
    p.log_zeta = cs.log_L - log_delta;
    p.zeta = std::exp(p.log_zeta);
    p.pd = cs.pd;
    p.S = p.delta * cs.pd;

    p.log_lambda.assign(log_lambda.begin(), log_lambda.end());
    p.alpha.resize(n);
    p.alpha_bar = 0.0;
    p.rho_bar = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        p.alpha[j] = beliefs::alpha_continuous(agents[j].belief, t, x);
        p.alpha_bar += cs.q[j] * p.alpha[j];
        p.rho_bar += cs.q[j] * agents[j].rho;
    }
    p.q = cs.q;
    p.kappa = spec.sigma - p.alpha_bar;
    p.r = p.rho_bar + spec.sigma * (spec.alpha_star + p.alpha_bar) - spec.sigma * spec.sigma;
    p.a = average_a(agents, cs.q, p.alpha, cs.pd);
    p.sigma_S = p.kappa + p.a;

    const double vol = p.a + p.kappa;
    if (vol == 0.0 || std::abs(vol) <= 1e-12 * (std::abs(p.a) + std::abs(p.kappa))) {
        throw SingularMarketError("stock volatility a + kappa vanished at t = " + std::to_string(t));
    }
    p.w.resize(n);
    p.c.resize(n);
    p.pi.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        p.w[j] = std::exp(cs.log_w[j] - p.log_zeta) / agents[j].rho;
        p.c[j] = agents[j].rho * p.w[j];
        p.pi[j] = p.w[j] * (p.alpha[j] + p.kappa) / (p.S * vol);
    }
    if (with_theta) {
        double total = 0.0;
        fill_trade_volume(cs.q, p.alpha, p.alpha_bar, spec.sigma, p.theta, total);
    } else {
        p.theta.assign(n, kNaN);
    }
}

} // namespace

double AgentSpec::weight() const {
    if (nu) {
        return *nu;
    }
    return 1.0 / (rho * initial_wealth.value());
}

void validate(const MarketSpec& spec) {
    if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
        throw ValidationError("sigma", "dividend volatility must be finite and > 0");
    }
    if (!std::isfinite(spec.alpha_star)) {
        throw ValidationError("alpha_star", "must be finite");
    }
    if (!(spec.delta0 > 0.0) || !std::isfinite(spec.delta0)) {
        throw ValidationError("delta0", "initial dividend must be finite and > 0");
    }
    if (spec.agents.empty()) {
        throw ValidationError("agents", "at least one agent is required");
    }
    for (std::size_t j = 0; j < spec.agents.size(); ++j) {
        const auto& a = spec.agents[j];
        if (!(a.rho > 0.0) || !std::isfinite(a.rho)) {
            throw ValidationError(agent_field(j, "rho"), "must be finite and > 0");
        }
        if (a.nu.has_value() == a.initial_wealth.has_value()) {
            throw ValidationError(agent_field(j, "nu"), "give exactly one of nu, initial_wealth");
        }
        if (a.nu && (!(*a.nu > 0.0) || !std::isfinite(*a.nu))) {
            throw ValidationError(agent_field(j, "nu"), "must be finite and > 0");
        }
        if (a.initial_wealth && (!(*a.initial_wealth > 0.0) || !std::isfinite(*a.initial_wealth))) {
            throw ValidationError(agent_field(j, "initial_wealth"), "must be finite and > 0");
        }
        try {
            beliefs::validate(a.belief);
        } catch (const ValidationError& e) {
            throw ValidationError("agents[" + std::to_string(j) + "]." + e.field(),
                                  "invalid belief");
        }
    }
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t path) {
    return stream_seed(master, StreamDomain::Driver, path);
}

DriverPath simulate_driver(const MarketSpec& spec, double horizon, double dt, std::uint64_t seed) {
    validate(spec);
    if (!(horizon > 0.0) || !(dt > 0.0) || dt > horizon) {
        throw ValidationError("simulation", "need horizon > 0 and 0 < dt <= horizon");
    }
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    DriverPath path;
    path.dt = dt;
    path.t.resize(n + 1);
    path.x.resize(n + 1);
    path.log_delta.resize(n + 1);
    path.log_delta[0] = std::log(spec.delta0);

    Rng rng(seed);
    const double sqrt_dt = std::sqrt(dt);
    const double drift = (spec.sigma * spec.alpha_star - 0.5 * spec.sigma * spec.sigma) * dt;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = sqrt_dt * rng.normal();
        path.t[k + 1] = static_cast<double>(k + 1) * dt;
        path.x[k + 1] = path.x[k] + dx;
        path.log_delta[k + 1] = path.log_delta[k] + spec.sigma * dx + drift;
    }
    return path;
}

std::vector<double> log_weights(std::span<const AgentSpec> agents,
                                std::span<const double> log_lambda, double t) {
    check_sizes(agents, log_lambda, "log_lambda");
    CrossSection cs;
    fill_cross_section(cs, agents, log_lambda, t);
    return cs.log_w;
}

StatePriceDensity state_price_density(std::span<const AgentSpec> agents,
                                      std::span<const double> log_lambda, double t,
                                      double delta) {
    check_sizes(agents, log_lambda, "log_lambda");
    CrossSection cs;
    fill_cross_section(cs, agents, log_lambda, t);
    StatePriceDensity out;
    out.log_L = cs.log_L;
    out.L = std::exp(cs.log_L);
    out.zeta = std::exp(cs.log_L - std::log(delta));
    return out;
}

StockPrice stock_price(std::span<const AgentSpec> agents, std::span<const double> log_lambda,
                       double delta, double t) {
    check_sizes(agents, log_lambda, "log_lambda");
    CrossSection cs;
    fill_cross_section(cs, agents, log_lambda, t);
    check_pd(cs.pd);
    return StockPrice{delta * cs.pd, cs.pd};
}

RateAndKappa rate_and_kappa(std::span<const AgentSpec> agents,
                            std::span<const double> log_lambda,
                            std::span<const double> alphas, double sigma, double alpha_star,
                            double t) {
    check_sizes(agents, log_lambda, "log_lambda");
    check_sizes(agents, alphas, "alphas");
    CrossSection cs;
    fill_cross_section(cs, agents, log_lambda, t);
    RateAndKappa out;
    for (std::size_t j = 0; j < agents.size(); ++j) {
        out.alpha_bar += cs.q[j] * alphas[j];
        out.rho_bar += cs.q[j] * agents[j].rho;
    }
    out.kappa = sigma - out.alpha_bar;
    out.r = out.rho_bar + sigma * (alpha_star + out.alpha_bar) - sigma * sigma;
    out.q = std::move(cs.q);
    return out;
}

StockVolatility stock_volatility(std::span<const AgentSpec> agents,
                                 std::span<const double> log_lambda,
                                 std::span<const double> alphas, double kappa, double t) {
    check_sizes(agents, log_lambda, "log_lambda");
    check_sizes(agents, alphas, "alphas");
    CrossSection cs;
    fill_cross_section(cs, agents, log_lambda, t);
    const double a = average_a(agents, cs.q, alphas, cs.pd);
    return StockVolatility{kappa + a, a};
}

Holdings wealth_and_portfolios(std::span<const AgentSpec> agents,
                               std::span<const double> log_lambda,
                               std::span<const double> alphas, double zeta, double S,
                               double kappa, double a, double t) {
    check_sizes(agents, log_lambda, "log_lambda");
    check_sizes(agents, alphas, "alphas");
    const double vol = a + kappa;
    if (S * vol == 0.0 || std::abs(vol) <= 1e-12 * (std::abs(a) + std::abs(kappa))) {
        throw SingularMarketError("stock volatility a + kappa vanished");
    }
    const auto log_w = log_weights(agents, log_lambda, t);
    const double log_zeta = std::log(zeta);
    Holdings h;
    h.w.resize(agents.size());
    h.c.resize(agents.size());
    h.pi.resize(agents.size());
    for (std::size_t j = 0; j < agents.size(); ++j) {
        h.w[j] = std::exp(log_w[j] - log_zeta) / agents[j].rho;
        h.c[j] = agents[j].rho * h.w[j];
        h.pi[j] = h.w[j] * (alphas[j] + kappa) / (S * vol);
    }
    return h;
}

TradeVolume trade_volume(std::span<const AgentSpec> agents, std::span<const double> q,
                         std::span<const double> alphas, double alpha_bar, double sigma) {
    check_sizes(agents, q, "q");
    check_sizes(agents, alphas, "alphas");
    if (!rhos_equal(agents)) {
        throw ValidationError("agents", "trade volume formula needs all rho_j equal");
    }
    TradeVolume out;
    fill_trade_volume(q, alphas, alpha_bar, sigma, out.theta, out.total);
    return out;
}

double solve_market_clearing_general(std::span<const InverseMarginal> inverse_marginals,
                                     std::span<const double> lambda,
                                     std::span<const double> nu, double delta, double t) {
    const std::size_t n = inverse_marginals.size();
    if (lambda.size() != n || nu.size() != n || n == 0) {
        throw ValidationError("inverse_marginals", "need one I_j, Lambda_j and nu_j per agent");
    }
    if (!(delta > 0.0)) {
        throw ValidationError("delta", "must be > 0");
    }
    // Excess demand in log zeta; strictly decreasing under the Inada conditions.
    auto excess = [&](double log_zeta) {
        const double zeta = std::exp(log_zeta);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            total += inverse_marginals[j](t, zeta * nu[j] / lambda[j]);
        }
        return total - delta;
    };

    constexpr double kLogLimit = 700.0;
    double lo = 0.0;
    double hi = 0.0;
    const double f0 = excess(0.0);
    if (std::isnan(f0)) {
        throw BracketError("market clearing: excess demand is NaN at zeta = 1");
    }
    if (f0 == 0.0) {
        return 1.0;
    }
    double step = 1.0;
    if (f0 > 0.0) {
        hi = step;
        while (excess(hi) > 0.0) {
            lo = hi;
            step *= 2.0;
            hi += step;
            if (hi > kLogLimit) {
                throw BracketError("market clearing: no upper bracket for zeta");
            }
        }
    } else {
        lo = -step;
        while (excess(lo) < 0.0) {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if (lo < -kLogLimit) {
                throw BracketError("market clearing: no lower bracket for zeta");
            }
        }
    }
    const double root = bisect(excess, lo, hi, 1e-15);
    return std::exp(root);
}

bool trade_volume_applicable(const MarketSpec& spec) {
    if (!rhos_equal(spec.agents)) {
        return false;
    }
    for (const auto& a : spec.agents) {
        if (!std::holds_alternative<beliefs::ConstantDrift>(a.belief)) {
            return false;
        }
    }
    return true;
}

EquilibriumPoint evaluate_point(const MarketSpec& spec, double t, double x, double log_delta,
                                std::span<const double> log_lambda) {
    check_sizes(spec.agents, log_lambda, "log_lambda");
    EquilibriumPoint p;
    CrossSection cs;
    evaluate_into(p, cs, spec, trade_volume_applicable(spec), t, x, log_delta, log_lambda);
    return p;
}

void evaluate_path(const MarketSpec& spec, const DriverPath& driver,
                   const std::function<void(const EquilibriumPoint&)>& visit) {
    validate(spec);
    const std::size_t n_agents = spec.agents.size();
    const bool with_theta = trade_volume_applicable(spec);
    std::vector<double> log_lambda(n_agents, 0.0);  // Lambda_0 = 1
    EquilibriumPoint p;
    CrossSection cs;
    for (std::size_t k = 0; k < driver.t.size(); ++k) {
        if (k > 0) {
            const double dx = driver.x[k] - driver.x[k - 1];
            const double dt = driver.t[k] - driver.t[k - 1];
            for (std::size_t j = 0; j < n_agents; ++j) {
                const double alpha = beliefs::alpha_continuous(spec.agents[j].belief,
                                                               driver.t[k - 1], driver.x[k - 1]);
                log_lambda[j] = beliefs::lambda_sde_step_log(log_lambda[j], alpha, dx, dt);
            }
        }
        evaluate_into(p, cs, spec, with_theta, driver.t[k], driver.x[k], driver.log_delta[k],
                      log_lambda);
        visit(p);
    }
}

EquilibriumPath evaluate_path(const MarketSpec& spec, const DriverPath& driver) {
    EquilibriumPath path;
    path.dt = driver.dt;
    path.points.reserve(driver.t.size());
    evaluate_path(spec, driver, [&](const EquilibriumPoint& p) { path.points.push_back(p); });
    return path;
}

EquilibriumPath simulate_path(const MarketSpec& spec, const SimulationOptions& options,
                              std::uint64_t seed) {
    return evaluate_path(spec, simulate_driver(spec, options.horizon, options.dt, seed));
}

} // namespace divbelief::ct
