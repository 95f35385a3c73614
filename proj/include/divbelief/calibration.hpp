#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divbelief/equilibrium.hpp"
#include "divbelief/numerics.hpp"

// Model-implied and historical moments, and a moment-matching search.
//
// Estimators, shared by simulated and historical data:
//   * PD moments pool every grid point of every path (population std).
//   * The per-step total return is (S_{k+1} + delta_k dt - S_k) / S_k; its
//     pooled mean is annualized by 1/dt and its std by 1/sqrt(dt).
//   * The riskless rate is the instantaneous r_t pooled over time and paths.
//   * premium = mean return - mean rate, Sharpe = premium / std return.
namespace divbelief::calibration {

inline constexpr std::size_t kMomentCount = 8;

struct MomentReport {
    double pd_mean = 0.0;
    double pd_std = 0.0;
    double return_mean = 0.0;
    double return_std = 0.0;
    double rate_mean = 0.0;
    double rate_std = 0.0;
    double premium = 0.0;
    double sharpe = 0.0;
    double pd_mean_stderr = 0.0;  // std of per-path mean PD / sqrt(paths); 0 for one path
    std::size_t paths = 0;
    std::size_t observations = 0;  // pooled PD observations

    /// The eight moments in the order listed above (pd_mean .. sharpe).
    std::array<double, kMomentCount> values() const noexcept;
    /// Fills premium and Sharpe from the other moments.
    void finish() noexcept;
};

/// Printable names for values(), in order.
const std::array<std::string_view, kMomentCount>& moment_names();

/// Per-path accumulator; merge() folds paths in a fixed order.
class MomentAccumulator {
public:
    explicit MomentAccumulator(double dt) : dt_(dt) {}

    void begin_path();
    void add(double S, double delta, double pd, double r);
    void end_path();
    void merge(const MomentAccumulator& other);

    MomentReport report() const;

private:
    double dt_;
    RunningStats pd_;
    RunningStats ret_;
    RunningStats rate_;
    RunningStats path_pd_means_;
    RunningStats current_pd_;
    double prev_S_ = 0.0;
    double prev_delta_ = 0.0;
    bool has_prev_ = false;
};

/// Throws ValidationError on an empty set or on paths with different grids.
MomentReport compute_moments(std::span<const ct::EquilibriumPath> paths);

struct MonteCarloOptions {
    ct::SimulationOptions simulation{50.0, 1.0 / 252.0};
    std::size_t paths = 200;
    std::uint64_t seed = 1;
    unsigned threads = 1;  // results do not depend on this
};

/// Streams `paths` independent paths (path i uses ct::path_seed(seed, i))
/// without storing them.
MomentReport simulate_moments(const ct::MarketSpec& spec, const MonteCarloOptions& options);

struct EmpiricalTargets {
    MomentReport moments;
    std::string provenance;
    std::size_t rows = 0;
    std::string first_date;
    std::string last_date;
};

/// Built-in historical moments used as the default fitting targets.
EmpiricalTargets default_targets();

/// Moments reported for the reference three-agent parameter set.
MomentReport reference_fitted_moments();

/// The reference three-agent parameter set those moments belong to.
ct::MarketSpec reference_market();

struct IngestOptions {
    double min_years = 10.0;
    /// Used when the file has no rate column.
    double fallback_rate_mean = 0.018;
    double fallback_rate_std = 0.057;
    /// Multiplier applied to the rate column (0.01 for percent).
    double rate_scale = 1.0;
};

/// Reads monthly rows with a header naming date, price and dividend columns
/// (aliases: date/Date; price/P/real_price/Real Price; dividend/D/
/// real_dividend/Real Dividend; optional rate/riskless/GS10/Rate GS10).
/// Dividends are annualized rates, so a month pays D/12; the PD ratio uses the
/// trailing twelve months of payments and the monthly return is
/// (P_t + D_t/12) / P_{t-1} - 1, annualized by 12 (mean) and sqrt(12) (std).
/// Dates may be YYYY.MM, YYYY-MM or YYYY-MM-DD.
EmpiricalTargets ingest_price_dividend_csv(const std::filesystem::path& file,
                                           const IngestOptions& options = {});

/// Same, from in-memory text; `source` names it in error messages.
EmpiricalTargets ingest_price_dividend_text(std::string_view text, std::string_view source,
                                            const IngestOptions& options = {});

// --- fitting -----------------------------------------------------------------

/// A free parameter: "sigma", "alpha_star", or "agents[j].alpha|rho|nu".
struct FreeParameter {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

double get_parameter(const ct::MarketSpec& spec, const std::string& name);
void set_parameter(ct::MarketSpec& spec, const std::string& name, double value);

struct CalibrationProblem {
    ct::MarketSpec start;
    std::vector<FreeParameter> parameters;
    MonteCarloOptions monte_carlo;
    std::array<double, kMomentCount> weights{1, 1, 1, 1, 1, 1, 1, 1};
    std::size_t max_evaluations = 200;
    double tolerance = 1e-6;  // stop when the simplex loss spread falls below this
};

void validate(const CalibrationProblem& problem);

/// sum_k w_k ((m_k - t_k) / t_k)^2; +inf if any moment is not finite.
double moment_loss(const MomentReport& model, const MomentReport& target,
                   const std::array<double, kMomentCount>& weights);

/// Loss of one parameter point with the problem's fixed seed (common random
/// numbers). Points whose PD ratio explodes or whose moments are not finite
/// score +inf.
double evaluate_loss(const CalibrationProblem& problem, const ct::MarketSpec& spec,
                     const MomentReport& target, MomentReport* report = nullptr);

struct FitResult {
    ct::MarketSpec spec;
    MomentReport report;
    double loss = 0.0;
    double start_loss = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead on the logit-transformed box. Deterministic given the problem.
FitResult fit_parameters(const CalibrationProblem& problem, const EmpiricalTargets& targets);

} // namespace divbelief::calibration
