#include "divbelief/csv.hpp"

#include <fmt/format.h>

namespace divbelief::csv {

std::string format_number(double x) {
    return fmt::format("{}", x);
}

EquilibriumWriter::EquilibriumWriter(std::ostream& out, std::size_t agents)
    : out_(out), agents_(agents) {
    out_ << "t,X,delta,zeta,S,PD,r,kappa,sigmaS";
    for (std::size_t j = 1; j <= agents_; ++j) {
        out_ << fmt::format(",q_{0},w_{0},c_{0},pi_{0},theta_{0}", j);
    }
    out_ << '\n';
}

void EquilibriumWriter::row(const ct::EquilibriumPoint& p) {
    std::string line = fmt::format("{},{},{},{},{},{},{},{},{}", p.t, p.x, p.delta, p.zeta, p.S,
                                   p.pd, p.r, p.kappa, p.sigma_S);
    for (std::size_t j = 0; j < agents_; ++j) {
        line += fmt::format(",{},{},{},{},{}", p.q[j], p.w[j], p.c[j], p.pi[j], p.theta[j]);
    }
    line += '\n';
    out_ << line;
}

void write_equilibrium(std::ostream& out, const ct::EquilibriumPath& path) {
    const std::size_t agents = path.points.empty() ? 0 : path.points.front().q.size();
    EquilibriumWriter w(out, agents);
    for (const auto& p : path.points) {
        w.row(p);
    }
}

void write_feedback(std::ostream& out, std::span<const feedback::FeedbackRecord> records) {
    out << "t,delta,S_star,S,log_PD_star,log_ratio,xi,solver_warnings\n";
    for (const auto& r : records) {
        out << fmt::format("{},{},{},{},{},{},{},{}\n", r.t, r.delta, r.S_star, r.S,
                           r.log_pd_star, r.log_ratio, r.xi, r.warnings);
    }
}

} // namespace divbelief::csv
