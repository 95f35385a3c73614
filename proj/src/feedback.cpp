#include "divbelief/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "divbelief/errors.hpp"
#include "divbelief/numerics.hpp"
#include "divbelief/rng.hpp"

namespace divbelief::feedback {

namespace {

void check_range(const Range& r, const char* field) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
        throw ValidationError(field, "need finite lo <= hi");
    }
}

// Log PD at step t from per-agent log(exp(-rho t) lambda / nu).
double log_pd_from_terms(std::span<const FeedbackAgent> agents, std::span<const double> a) {
    const double m = *std::max_element(a.begin(), a.end());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < agents.size(); ++j) {
        const double e = std::exp(a[j] - m);
        num += e * (agents[j].nu / agents[j].nu_tilde);
        den += e;
    }
    return std::log(num / den);
}

// Residual of the price equation in log form,
//   f(xi) = log S_t + xi - log delta_{t+1} - log PD_{t+1}(xi),
// with everything that does not depend on xi precomputed once per step.
class PriceEquation {
public:
    PriceEquation(const FeedbackState& state, std::span<const FeedbackAgent> agents,
                  double true_increment)
        : agents_(agents),
          constant_(state.log_S - (state.log_delta + true_increment)),
          base_(agents.size()),
          mean_(agents.size()),
          curvature_(agents.size()),
          feedback_(agents.size()),
          terms_(agents.size()) {
        const double t_next = static_cast<double>(state.t + 1);
        for (std::size_t j = 0; j < agents.size(); ++j) {
            const auto& b = state.observed[j];
            const auto& belief = agents[j].belief;
            base_[j] = -agents[j].rho * t_next + b.log_density - std::log(agents[j].nu);
            if (belief.diligent) {
                base_[j] += beliefs::log_density_increment(b, belief, true_increment);
                continue;
            }
            feedback_[j] = true;
            any_feedback_ = true;
            const double ratio =
                std::isinf(b.sample_size) ? 1.0 : b.sample_size / (b.sample_size + 1.0);
            base_[j] += 0.5 * (std::log(ratio) + std::log(belief.precision / (2.0 * std::numbers::pi)));
            mean_[j] = b.mean;
            curvature_[j] = 0.5 * belief.precision * ratio;
        }
    }

    bool depends_on_xi() const noexcept { return any_feedback_; }

    /// log PD is a weighted average bounded by the agents' extreme
    /// log(nu / nu_tilde), so every root lies in [lo - C, hi - C].
    std::pair<double, double> root_bounds() const {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& a : agents_) {
            const double p = std::log(a.nu / a.nu_tilde);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        return {lo - constant_, hi - constant_};
    }

    double operator()(double xi) {
        for (std::size_t j = 0; j < agents_.size(); ++j) {
            terms_[j] = base_[j];
            if (feedback_[j]) {
                const double e = xi - mean_[j];
                terms_[j] -= curvature_[j] * e * e;
            }
        }
        return constant_ + xi - log_pd_from_terms(agents_, terms_);
    }

private:
    std::span<const FeedbackAgent> agents_;
    double constant_;
    std::vector<double> base_;
    std::vector<double> mean_;
    std::vector<double> curvature_;
    std::vector<bool> feedback_;
    std::vector<double> terms_;
    bool any_feedback_ = false;
};

std::string dump_state(const FeedbackState& s, double dlog_delta, double lo, double flo, double hi,
                       double fhi) {
    std::ostringstream os;
    os.precision(17);
    os << "no root bracketed; log_S=" << s.log_S << " log_delta=" << s.log_delta
       << " dlog_delta=" << dlog_delta << " last_xi=" << s.last_xi << " f(" << lo << ")=" << flo
       << " f(" << hi << ")=" << fhi;
    for (std::size_t j = 0; j < s.observed.size(); ++j) {
        os << " | agent " << j << ": log_density=" << s.observed[j].log_density
           << " mean=" << s.observed[j].mean;
    }
    return os.str();
}

double current_log_pd(std::span<const FeedbackAgent> agents,
                      std::span<const beliefs::BeliefState> beliefs, std::int64_t t) {
    std::vector<double> log_density(beliefs.size());
    for (std::size_t j = 0; j < beliefs.size(); ++j) {
        log_density[j] = beliefs[j].log_density;
    }
    return discrete_price(agents, log_density, t).log_pd;
}

} // namespace

std::int64_t FeedbackConfig::steps() const noexcept {
    return static_cast<std::int64_t>(std::llround(years * steps_per_year));
}

double FeedbackConfig::true_precision() const noexcept {
    return 1.0 / (sigma * sigma * dt());
}

void validate(const FeedbackConfig& c) {
    if (c.agents < 1) {
        throw ValidationError("feedback.agents", "need at least one agent");
    }
    if (c.diligent < 0 || c.diligent > c.agents) {
        throw ValidationError("feedback.diligent", "need 0 <= diligent <= agents");
    }
    if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) {
        throw ValidationError("feedback.sigma", "must be finite and > 0");
    }
    if (!std::isfinite(c.growth)) {
        throw ValidationError("feedback.growth", "must be finite");
    }
    if (!(c.steps_per_year > 0.0) || !std::isfinite(c.steps_per_year)) {
        throw ValidationError("feedback.steps_per_year", "must be finite and > 0");
    }
    if (!(c.years > 0.0) || c.steps() < 1) {
        throw ValidationError("feedback.years", "need at least one step");
    }
    check_range(c.rho_range, "feedback.rho_range");
    check_range(c.tau_factor_range, "feedback.tau_factor_range");
    check_range(c.prior_mean_range, "feedback.prior_mean_range");
    if (!(c.rho_range.lo > 0.0)) {
        throw ValidationError("feedback.rho_range", "rho must be > 0");
    }
    if (!(c.tau_factor_range.lo > 0.0)) {
        throw ValidationError("feedback.tau_factor_range", "tau factors must be > 0");
    }
    if (!(c.nu > 0.0) || !std::isfinite(c.nu)) {
        throw ValidationError("feedback.nu", "must be finite and > 0");
    }
    if (!(c.prior_sample_years > 0.0)) {
        throw ValidationError("feedback.prior_sample_years", "must be > 0");
    }
    if (!(c.delta0 > 0.0) || !std::isfinite(c.delta0)) {
        throw ValidationError("feedback.delta0", "must be finite and > 0");
    }
    if (c.scan_points < 2) {
        throw ValidationError("feedback.scan_points", "need at least 2 points");
    }
    if (!(c.crash_threshold_sd > 0.0)) {
        throw ValidationError("feedback.crash_threshold_sd", "must be > 0");
    }
}

std::vector<FeedbackAgent> draw_agents(const FeedbackConfig& config) {
    validate(config);
    const double dt = config.dt();
    const double tau_star = config.true_precision();
    std::vector<FeedbackAgent> agents(static_cast<std::size_t>(config.agents));
    for (std::size_t j = 0; j < agents.size(); ++j) {
        Rng rng(config.seed, StreamDomain::Agent, j);
        auto& a = agents[j];
        a.rho_annual = rng.uniform(config.rho_range.lo, config.rho_range.hi);
        a.tau_factor = rng.uniform(config.tau_factor_range.lo, config.tau_factor_range.hi);
        a.prior_mean_annual = rng.uniform(config.prior_mean_range.lo, config.prior_mean_range.hi);
        a.rho = a.rho_annual * dt;
        a.nu = config.nu;
        a.nu_tilde = config.nu * std::expm1(a.rho);
        a.belief.prior_mean = a.prior_mean_annual * dt;
        a.belief.precision = a.tau_factor * tau_star;
        a.belief.prior_sample_size = config.prior_sample_years * config.steps_per_year;
        a.belief.diligent = static_cast<int>(j) < config.diligent;
    }
    return agents;
}

DiscretePrice discrete_price(std::span<const FeedbackAgent> agents,
                             std::span<const double> log_density, std::int64_t t) {
    if (agents.empty() || log_density.size() != agents.size()) {
        throw ValidationError("log_density", "expected one value per agent");
    }
    std::vector<double> num(agents.size());
    std::vector<double> den(agents.size());
    for (std::size_t j = 0; j < agents.size(); ++j) {
        const double base = -agents[j].rho * static_cast<double>(t) + log_density[j];
        num[j] = base - std::log(agents[j].nu_tilde);
        den[j] = base - std::log(agents[j].nu);
    }
    DiscretePrice out;
    out.log_numerator = log_sum_exp(num);
    out.log_denominator = log_sum_exp(den);
    // Same arithmetic as the step solver so that S and S* agree bit for bit
    // when every agent is diligent.
    out.log_pd = log_pd_from_terms(agents, den);
    out.pd = std::exp(out.log_pd);
    return out;
}

FeedbackState FeedbackState::initial(std::span<const FeedbackAgent> agents,
                                     const FeedbackConfig& config) {
    FeedbackState s;
    s.observed.reserve(agents.size());
    for (const auto& a : agents) {
        s.observed.push_back(beliefs::BeliefState::initial(a.belief));
    }
    s.shadow = s.observed;
    s.log_delta = std::log(config.delta0);
    s.log_S = s.log_delta + current_log_pd(agents, s.observed, 0);
    s.log_S_star = s.log_S;
    s.last_xi = config.growth * config.dt();
    return s;
}

StepOutcome step_fixed_point(const FeedbackState& state, std::span<const FeedbackAgent> agents,
                             const FeedbackConfig& config, double true_increment) {
    PriceEquation f(state, agents, true_increment);

    // Bracket around the dividend increment, doubling out to +/-1, or further
    // when the provable root bounds demand it (a crash bigger than e^-1). Without
    // feedback f is increasing with unit slope, so the endpoint signs decide.
    // With feedback f can dip below zero inside a bracket whose endpoints are
    // both positive, so every bracket is scanned for sign changes.
    const double center = true_increment;
    double half = 10.0 * config.sigma * std::sqrt(config.dt());
    const auto [root_lo, root_hi] = f.root_bounds();
    const double max_half =
        std::max(1.0, std::max(center - root_lo, root_hi - center) * (1.0 + 1e-12));
    auto solve = [&](double a, double b) { return bisect(std::ref(f), a, b, 0.0); };
    const int n = config.scan_points;
    StepOutcome out;
    std::vector<double> roots;
    double lo = 0.0, hi = 0.0, flo = 0.0, fhi = 0.0;
    while (true) {
        lo = center - half;
        hi = center + half;
        flo = f(lo);
        fhi = f(hi);
        if (!f.depends_on_xi()) {
            if (flo < 0.0 && fhi > 0.0) {
                roots.push_back(solve(lo, hi));
            }
        } else {
            double x_prev = lo;
            double f_prev = flo;
            for (int i = 1; i < n; ++i) {
                const double x = (i == n - 1) ? hi : lo + (hi - lo) * i / (n - 1);
                const double fx = (i == n - 1) ? fhi : f(x);
                if ((f_prev < 0.0) != (fx < 0.0)) {
                    roots.push_back(solve(x_prev, x));
                }
                x_prev = x;
                f_prev = fx;
            }
        }
        if (!roots.empty()) {
            break;
        }
        if (!(half < max_half)) {
            throw FixedPointError(state.t, dump_state(state, true_increment, lo, flo, hi, fhi));
        }
        half = std::min(2.0 * half, max_half);
    }
    out.roots = static_cast<int>(roots.size());
    out.warning = roots.size() > 1;
    out.xi = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
        return std::abs(a - state.last_xi) < std::abs(b - state.last_xi);
    });

    FeedbackState next;
    next.t = state.t + 1;
    next.log_delta = state.log_delta + true_increment;
    next.log_S = state.log_S + out.xi;
    next.last_xi = out.xi;
    next.observed.reserve(agents.size());
    next.shadow.reserve(agents.size());
    for (std::size_t j = 0; j < agents.size(); ++j) {
        const auto& belief = agents[j].belief;
        const double seen = belief.diligent ? true_increment : out.xi;
        next.observed.push_back(beliefs::update_discrete(state.observed[j], belief, seen));
        next.shadow.push_back(beliefs::update_discrete(state.shadow[j], belief, true_increment));
    }
    const double log_pd = current_log_pd(agents, next.observed, next.t);
    next.log_S_star = next.log_delta + current_log_pd(agents, next.shadow, next.t);

    out.residual = std::abs(std::expm1(next.log_S - next.log_delta - log_pd));
    if (!(out.residual < 1e-10)) {
        throw FixedPointError(state.t, "fixed-point residual " + std::to_string(out.residual) +
                                           " above 1e-10");
    }
    out.state = std::move(next);
    return out;
}

FeedbackRun run_feedback(const FeedbackConfig& config) {
    FeedbackRun run;
    run.agents = draw_agents(config);
    const double dt = config.dt();
    const double step_sd = config.sigma * std::sqrt(dt);
    Rng dividend_rng(config.seed, StreamDomain::Driver, 0);

    FeedbackState state = FeedbackState::initial(run.agents, config);
    const auto n = config.steps();
    run.records.reserve(static_cast<std::size_t>(n + 1));

    auto record = [&](const FeedbackState& s, double xi, int warnings) {
        FeedbackRecord r;
        r.t = static_cast<double>(s.t) * dt;
        r.delta = std::exp(s.log_delta);
        r.S = std::exp(s.log_S);
        r.S_star = std::exp(s.log_S_star);
        r.log_pd_star = s.log_S_star - s.log_delta;
        r.log_ratio = s.log_S - s.log_S_star;
        r.xi = xi;
        r.warnings = warnings;
        run.records.push_back(r);
    };
    record(state, 0.0, 0);

    auto& m = run.metrics;
    m.max_log_ratio = m.min_log_ratio = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        const double dlog_delta = dividend_rng.normal(config.growth * dt, step_sd);
        auto outcome = step_fixed_point(state, run.agents, config, dlog_delta);
        state = std::move(outcome.state);
        record(state, outcome.xi, outcome.warning ? 1 : 0);

        const double lr = run.records.back().log_ratio;
        m.max_log_ratio = std::max(m.max_log_ratio, lr);
        m.min_log_ratio = std::min(m.min_log_ratio, lr);
        if (std::abs(outcome.xi - dlog_delta) > config.crash_threshold_sd * step_sd) {
            ++m.crash_count;
        }
        if (outcome.warning) {
            ++m.warning_steps;
        }
        m.max_residual = std::max(m.max_residual, outcome.residual);
    }
    m.range_log_ratio = m.max_log_ratio - m.min_log_ratio;
    m.steps = n;
    return run;
}

} // namespace divbelief::feedback
