#pragma once

#include <ostream>
#include <span>
#include <string>

#include "divbelief/equilibrium.hpp"
#include "divbelief/feedback.hpp"

// CSV writers. Comma separated, one header row, '.' decimal point, numbers in
// shortest round-trip form (so files are byte-identical across reruns).
namespace divbelief::csv {

std::string format_number(double x);

/// Columns: t,X,delta,zeta,S,PD,r,kappa,sigmaS, then for each agent j (from 1)
/// the group q_j,w_j,c_j,pi_j,theta_j.
void write_equilibrium(std::ostream& out, const ct::EquilibriumPath& path);

/// Streaming variant: call header() once, then row() per grid point.
class EquilibriumWriter {
public:
    EquilibriumWriter(std::ostream& out, std::size_t agents);
    void row(const ct::EquilibriumPoint& p);

private:
    std::ostream& out_;
    std::size_t agents_;
};

/// Columns: t,delta,S_star,S,log_PD_star,log_ratio,xi,solver_warnings.
void write_feedback(std::ostream& out, std::span<const feedback::FeedbackRecord> records);

} // namespace divbelief::csv
