#include "divbelief/beauty.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "divbelief/errors.hpp"

namespace divbelief::beauty {

namespace {

std::string field(std::size_t j, const char* name) {
    return "agents[" + std::to_string(j) + "]." + name;
}

double sum(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) {
        s += v;
    }
    return s;
}

// Demand implied by a professed mean at a given price.
double demand(const ContestAgent& a, double professed, double price) {
    return (professed - price) / (a.gamma * a.v);
}

} // namespace

void validate(const ContestSpec& spec) {
    if (spec.agents.empty()) {
        throw ValidationError("agents", "need at least one agent");
    }
    for (std::size_t j = 0; j < spec.agents.size(); ++j) {
        const auto& a = spec.agents[j];
        if (!(a.gamma > 0.0) || !std::isfinite(a.gamma)) {
            throw ValidationError(field(j, "gamma"), "must be finite and > 0");
        }
        if (!(a.v > 0.0) || !std::isfinite(a.v)) {
            throw ValidationError(field(j, "v"), "must be finite and > 0");
        }
        if (!std::isfinite(a.alpha)) {
            throw ValidationError(field(j, "alpha"), "must be finite");
        }
    }
}

std::vector<double> price_weights(const ContestSpec& spec) {
    validate(spec);
    std::vector<double> p;
    p.reserve(spec.agents.size());
    for (const auto& a : spec.agents) {
        p.push_back(1.0 / (a.gamma * a.v));
    }
    const double total = sum(p);
    for (double& x : p) {
        x /= total;
    }
    return p;
}

TruthfulEquilibrium truthful_equilibrium(const ContestSpec& spec) {
    TruthfulEquilibrium eq;
    eq.p = price_weights(spec);
    for (std::size_t j = 0; j < spec.agents.size(); ++j) {
        eq.S0 += eq.p[j] * spec.agents[j].alpha;
    }
    for (const auto& a : spec.agents) {
        const double d = a.alpha - eq.S0;
        eq.theta.push_back(demand(a, a.alpha, eq.S0));
        eq.objective.push_back(-std::exp(-d * d / (2.0 * a.v)) / a.gamma);
    }
    return eq;
}

double faked_objective(const ContestAgent& a, double alpha_tilde, double price) {
    const double u = alpha_tilde - price;
    const double g = u * (a.alpha - alpha_tilde) + 0.5 * u * u;
    return -std::exp(-g / a.v) / a.gamma;
}

FakedEquilibrium pareto_faked_equilibrium(const ContestSpec& spec) {
    FakedEquilibrium eq;
    eq.p = price_weights(spec);
    if (spec.agents.size() < 2) {
        throw ValidationError("agents", "faking needs at least two agents");
    }
    eq.q.resize(eq.p.size());
    for (std::size_t j = 0; j < eq.p.size(); ++j) {
        eq.q[j] = eq.p[j] * (1.0 - eq.p[j]);
    }
    const double total = sum(eq.q);
    for (std::size_t j = 0; j < eq.q.size(); ++j) {
        eq.q[j] /= total;
        eq.S0 += eq.q[j] * spec.agents[j].alpha;
    }
    for (std::size_t j = 0; j < spec.agents.size(); ++j) {
        const auto& a = spec.agents[j];
        const double at = (1.0 - eq.p[j]) * a.alpha + eq.p[j] * eq.S0;
        eq.alpha_tilde.push_back(at);
        eq.theta.push_back(demand(a, at, eq.S0));
        eq.objective.push_back(faked_objective(a, at, eq.S0));
    }
    return eq;
}

double best_response(const ContestSpec& spec, std::size_t j, const std::vector<double>& others) {
    const auto p = price_weights(spec);
    if (j >= p.size() || others.size() != p.size()) {
        throw ValidationError("others", "expected one professed mean per agent");
    }
    // Price as a function of the own report a is p_j a + rest.
    double rest = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i != j) {
            rest += p[i] * others[i];
        }
    }
    const double pj = p[j];
    return ((1.0 - pj) * spec.agents[j].alpha + pj * rest) / (1.0 - pj * pj);
}

WelfareComparison welfare_comparison(const ContestSpec& spec) {
    WelfareComparison w;
    w.truthful = truthful_equilibrium(spec);
    w.faked = pareto_faked_equilibrium(spec);
    const auto& t = w.truthful;
    const auto& f = w.faked;
    const std::size_t n = spec.agents.size();
    w.improves.resize(n);
    w.worse.resize(n);
    w.tilde_between.resize(n);
    w.all_improve = true;
    w.all_worse = true;
    for (std::size_t j = 0; j < n; ++j) {
        const double alpha = spec.agents[j].alpha;
        const double at = f.alpha_tilde[j];
        const double d0 = alpha - t.S0;
        const double u = at - f.S0;
        const double lhs = d0 * d0;
        const double rhs = u * u + 2.0 * u * (alpha - at);
        w.improves[j] = lhs < rhs;
        w.worse[j] = lhs > rhs;
        w.all_improve = w.all_improve && w.improves[j];
        w.all_worse = w.all_worse && w.worse[j];

        const double residual = std::abs(at - (1.0 - f.p[j]) * alpha - f.p[j] * f.S0);
        w.max_fixed_point_residual = std::max(w.max_fixed_point_residual, residual);
        w.tilde_between[j] = std::min(alpha, t.S0) <= at && at <= std::max(alpha, t.S0);

        const double e = alpha - f.S0;
        w.identity_lhs += f.q[j] * d0 * d0;
        w.identity_rhs += f.q[j] * e * e;
    }
    const double shift = t.S0 - f.S0;
    w.identity_rhs += shift * shift;
    return w;
}

PartialFaking partial_faking(const ContestSpec& spec, const std::vector<bool>& faking) {
    const auto p = price_weights(spec);
    const std::size_t n = p.size();
    if (faking.size() != n) {
        throw ValidationError("faking", "expected one flag per agent");
    }
    // Fakers report (1 - p) alpha + p S; truthful agents report alpha. Solving
    // S = sum p_j report_j for S gives a weighted average of the alphas.
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double weight = faking[j] ? p[j] * (1.0 - p[j]) : p[j];
        num += weight * spec.agents[j].alpha;
        den += weight;
    }
    if (!(den > 0.0)) {
        throw ValidationError("faking", "a single agent cannot fake against nobody");
    }
    PartialFaking out;
    out.S0 = num / den;
    out.alpha_tilde.resize(n);
    out.deviation.assign(n, 0.0);
    out.deviation_gain.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double alpha = spec.agents[j].alpha;
        out.alpha_tilde[j] = faking[j] ? (1.0 - p[j]) * alpha + p[j] * out.S0 : alpha;
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (faking[j]) {
            continue;
        }
        const auto& a = spec.agents[j];
        const double dev = best_response(spec, j, out.alpha_tilde);
        const double rest = out.S0 - p[j] * a.alpha;
        const double price = p[j] * dev + rest;
        const double u = dev - price;
        const double g_dev = u * (a.alpha - dev) + 0.5 * u * u;
        const double d = a.alpha - out.S0;
        const double g_truth = 0.5 * d * d;
        out.deviation[j] = dev;
        out.deviation_gain[j] = (g_dev - g_truth) / a.v;
    }
    return out;
}

} // namespace divbelief::beauty
