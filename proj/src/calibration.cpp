#include "divbelief/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <variant>

#include "divbelief/errors.hpp"

namespace divbelief::calibration {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

std::array<double, kMomentCount> MomentReport::values() const noexcept {
    return {pd_mean, pd_std, return_mean, return_std, rate_mean, rate_std, premium, sharpe};
}

void MomentReport::finish() noexcept {
    premium = return_mean - rate_mean;
    sharpe = premium / return_std;
}

const std::array<std::string_view, kMomentCount>& moment_names() {
    static const std::array<std::string_view, kMomentCount> names{
        "Mean price/dividend ratio",
        "Std of price/dividend ratio",
        "Mean return on equity",
        "Std of return on equity",
        "Mean riskless rate",
        "Std of riskless rate",
        "Equity premium",
        "Sharpe ratio",
    };
    return names;
}

// --- moments -----------------------------------------------------------------

void MomentAccumulator::begin_path() {
    current_pd_ = RunningStats{};
    has_prev_ = false;
}

void MomentAccumulator::add(double S, double delta, double pd, double r) {
    pd_.add(pd);
    current_pd_.add(pd);
    rate_.add(r);
    if (has_prev_) {
        ret_.add((S + prev_delta_ * dt_ - prev_S_) / prev_S_);
    }
    prev_S_ = S;
    prev_delta_ = delta;
    has_prev_ = true;
}

void MomentAccumulator::end_path() {
    path_pd_means_.add(current_pd_.mean());
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
    pd_.merge(other.pd_);
    ret_.merge(other.ret_);
    rate_.merge(other.rate_);
    path_pd_means_.merge(other.path_pd_means_);
}

MomentReport MomentAccumulator::report() const {
    MomentReport m;
    m.pd_mean = pd_.mean();
    m.pd_std = pd_.stddev();
    m.return_mean = ret_.mean() / dt_;
    m.return_std = ret_.stddev() / std::sqrt(dt_);
    m.rate_mean = rate_.mean();
    m.rate_std = rate_.stddev();
    m.finish();
    m.paths = path_pd_means_.count();
    m.observations = pd_.count();
    m.pd_mean_stderr =
        m.paths > 1 ? std::sqrt(path_pd_means_.sample_variance() / static_cast<double>(m.paths))
                    : 0.0;
    return m;
}

MomentReport compute_moments(std::span<const ct::EquilibriumPath> paths) {
    if (paths.empty()) {
        throw ValidationError("paths", "need at least one path");
    }
    const auto& first = paths.front();
    if (first.points.size() < 2) {
        throw ValidationError("paths", "need at least two grid points per path");
    }
    MomentAccumulator total(first.dt);
    for (const auto& path : paths) {
        if (path.dt != first.dt || path.points.size() != first.points.size()) {
            throw ValidationError("paths", "paths must share one grid");
        }
        MomentAccumulator acc(path.dt);
        acc.begin_path();
        for (const auto& p : path.points) {
            acc.add(p.S, p.delta, p.pd, p.r);
        }
        acc.end_path();
        total.merge(acc);
    }
    return total.report();
}

MomentReport simulate_moments(const ct::MarketSpec& spec, const MonteCarloOptions& options) {
    ct::validate(spec);
    if (options.paths == 0) {
        throw ValidationError("simulation.paths", "need at least one path");
    }
    const double dt = options.simulation.dt;
    std::vector<MomentAccumulator> per_path(options.paths, MomentAccumulator(dt));
    std::vector<std::exception_ptr> errors(options.paths);

    auto run_path = [&](std::size_t i) {
        try {
            const auto driver = ct::simulate_driver(spec, options.simulation.horizon, dt,
                                                    ct::path_seed(options.seed, i));
            auto& acc = per_path[i];
            acc.begin_path();
            ct::evaluate_path(spec, driver, [&](const ct::EquilibriumPoint& p) {
                acc.add(p.S, p.delta, p.pd, p.r);
            });
            acc.end_path();
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const unsigned threads =
        static_cast<unsigned>(std::min<std::size_t>(std::max(1u, options.threads), options.paths));
    if (threads == 1) {
        for (std::size_t i = 0; i < options.paths; ++i) {
            run_path(i);
            if (errors[i]) {
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < options.paths; i = next++) {
                    run_path(i);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    MomentAccumulator total(dt);
    for (const auto& acc : per_path) {
        total.merge(acc);
    }
    return total.report();
}

EmpiricalTargets default_targets() {
    EmpiricalTargets t;
    auto& m = t.moments;
    m.pd_mean = 25.0;
    m.pd_std = 7.1;
    m.return_mean = 0.07;
    m.return_std = 0.18;
    m.rate_mean = 0.018;
    m.rate_std = 0.057;
    m.premium = 0.06;
    m.sharpe = 0.33;
    t.provenance = "built-in";
    return t;
}

MomentReport reference_fitted_moments() {
    MomentReport m;
    m.pd_mean = 26.06;
    m.pd_std = 3.84;
    m.return_mean = 0.077;
    m.return_std = 0.134;
    m.rate_mean = 0.018;
    m.rate_std = 0.061;
    m.premium = 0.059;
    m.sharpe = 0.326;
    return m;
}

ct::MarketSpec reference_market() {
    ct::MarketSpec spec;
    spec.sigma = 0.517;
    spec.alpha_star = -0.01;
    spec.delta0 = 1.0;
    const double alpha[] = {0.210, 0.727, -0.05};
    const double rho[] = {0.131, 0.01, 0.443};
    const double nu[] = {14.47, 1.00, 0.174};
    for (int j = 0; j < 3; ++j) {
        ct::AgentSpec a;
        a.rho = rho[j];
        a.nu = nu[j];
        a.belief = beliefs::ConstantDrift{alpha[j]};
        spec.agents.push_back(a);
    }
    return spec;
}

// --- ingestion ---------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\"";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<std::size_t> find_column(const std::vector<std::string_view>& header,
                                       std::initializer_list<std::string_view> aliases) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = lower(header[i]);
        for (auto alias : aliases) {
            if (name == alias) {
                return i;
            }
        }
    }
    return std::nullopt;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) {
        return false;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) {
        return false;
    }
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

// Months since year 0. "1871.1" is October, as in decimal year.month files.
std::optional<int> parse_month(std::string_view s) {
    int year = 0;
    int month = 0;
    const auto dot = s.find('.');
    const auto dash = s.find('-');
    if (dot != std::string_view::npos) {
        auto frac = s.substr(dot + 1);
        if (!parse_int(s.substr(0, dot), year) || frac.empty() || frac.size() > 2 ||
            !parse_int(frac, month)) {
            return std::nullopt;
        }
        if (frac.size() == 1) {
            month *= 10;
        }
    } else if (dash != std::string_view::npos) {
        auto rest = s.substr(dash + 1);
        const auto dash2 = rest.find('-');
        if (dash2 != std::string_view::npos) {
            int day = 0;
            if (!parse_int(rest.substr(dash2 + 1), day) || day < 1 || day > 31) {
                return std::nullopt;
            }
            rest = rest.substr(0, dash2);
        }
        if (!parse_int(s.substr(0, dash), year) || !parse_int(rest, month)) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (month < 1 || month > 12) {
        return std::nullopt;
    }
    return year * 12 + (month - 1);
}

} // namespace

EmpiricalTargets ingest_price_dividend_text(std::string_view text, std::string_view source,
                                            const IngestOptions& options) {
    const std::string src(source);
    auto fail = [&](std::size_t line, const std::string& msg) -> ValidationError {
        return ValidationError(src + ":" + std::to_string(line), msg);
    };

    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start <= text.size();) {
        const auto nl = text.find('\n', start);
        lines.push_back(text.substr(start, nl == std::string_view::npos ? nl : nl - start));
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    std::size_t header_line = 0;
    while (header_line < lines.size() && trim(lines[header_line]).empty()) {
        ++header_line;
    }
    if (header_line == lines.size()) {
        throw ValidationError(src, "empty file");
    }
    const auto header = split(lines[header_line]);
    const auto date_col = find_column(header, {"date"});
    const auto price_col = find_column(header, {"price", "p", "real_price", "real price"});
    const auto div_col =
        find_column(header, {"dividend", "d", "real_dividend", "real dividend"});
    const auto rate_col = find_column(header, {"rate", "riskless", "gs10", "rate gs10"});
    std::string missing;
    if (!date_col) missing += " date";
    if (!price_col) missing += " price";
    if (!div_col) missing += " dividend";
    if (!missing.empty()) {
        throw fail(header_line + 1, "missing column(s):" + missing);
    }

    struct Row {
        int month;
        double price;
        double dividend;
        double rate;
        std::string date;
    };
    std::vector<Row> rows;
    for (std::size_t i = header_line + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) {
            continue;
        }
        const auto cells = split(lines[i]);
        const std::size_t line_no = i + 1;
        auto cell = [&](std::size_t col, const char* what) {
            if (col >= cells.size()) {
                throw fail(line_no, std::string("missing ") + what + " value");
            }
            return cells[col];
        };
        Row r{};
        const auto date = cell(*date_col, "date");
        const auto month = parse_month(date);
        if (!month) {
            throw fail(line_no, "cannot parse date '" + std::string(date) + "'");
        }
        r.month = *month;
        r.date = std::string(date);
        if (!parse_double(cell(*price_col, "price"), r.price) || !(r.price > 0.0)) {
            throw fail(line_no, "price must be a positive number");
        }
        if (!parse_double(cell(*div_col, "dividend"), r.dividend) || !(r.dividend > 0.0)) {
            throw fail(line_no, "dividend must be a positive number");
        }
        if (rate_col) {
            if (!parse_double(cell(*rate_col, "rate"), r.rate)) {
                throw fail(line_no, "rate must be a number");
            }
            r.rate *= options.rate_scale;
        }
        if (!rows.empty() && r.month <= rows.back().month) {
            throw fail(line_no, "dates must be strictly increasing");
        }
        rows.push_back(std::move(r));
    }
    if (rows.size() < 13) {
        throw ValidationError(src, "need at least 13 monthly rows");
    }
    const double years = (rows.back().month - rows.front().month) / 12.0;
    if (years < options.min_years) {
        throw ValidationError(src, "data span of " + std::to_string(years) +
                                       " years is shorter than the required " +
                                       std::to_string(options.min_years));
    }

    RunningStats pd;
    RunningStats ret;
    RunningStats rate;
    double trailing = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        trailing += rows[i].dividend / 12.0;
        if (i >= 12) {
            trailing -= rows[i - 12].dividend / 12.0;
        }
        if (i >= 11) {
            pd.add(rows[i].price / trailing);
        }
        if (i >= 1) {
            ret.add((rows[i].price + rows[i].dividend / 12.0) / rows[i - 1].price - 1.0);
        }
        if (rate_col) {
            rate.add(rows[i].rate);
        }
    }

    EmpiricalTargets t;
    auto& m = t.moments;
    m.pd_mean = pd.mean();
    m.pd_std = pd.stddev();
    m.return_mean = 12.0 * ret.mean();
    m.return_std = std::sqrt(12.0) * ret.stddev();
    m.rate_mean = rate_col ? rate.mean() : options.fallback_rate_mean;
    m.rate_std = rate_col ? rate.stddev() : options.fallback_rate_std;
    m.finish();
    m.paths = 1;
    m.observations = pd.count();
    t.provenance = "csv:" + src + (rate_col ? "" : " (built-in riskless rate moments)");
    t.rows = rows.size();
    t.first_date = rows.front().date;
    t.last_date = rows.back().date;
    return t;
}

EmpiricalTargets ingest_price_dividend_csv(const std::filesystem::path& file,
                                           const IngestOptions& options) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ValidationError(file.string(), "cannot open file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_price_dividend_text(buf.str(), file.string(), options);
}

// --- fitting -----------------------------------------------------------------

namespace {

struct ParameterRef {
    enum Kind { Sigma, AlphaStar, Alpha, Rho, Nu } kind;
    std::size_t agent = 0;
};

ParameterRef parse_parameter(const ct::MarketSpec& spec, const std::string& name) {
    if (name == "sigma") {
        return {ParameterRef::Sigma};
    }
    if (name == "alpha_star") {
        return {ParameterRef::AlphaStar};
    }
    const auto open = name.find('[');
    const auto close = name.find("].");
    int j = -1;
    if (name.rfind("agents[", 0) == 0 && close != std::string::npos &&
        parse_int(std::string_view(name).substr(open + 1, close - open - 1), j) && j >= 0 &&
        static_cast<std::size_t>(j) < spec.agents.size()) {
        const auto field = name.substr(close + 2);
        const auto idx = static_cast<std::size_t>(j);
        if (field == "alpha") {
            if (!std::holds_alternative<beliefs::ConstantDrift>(spec.agents[idx].belief)) {
                throw ValidationError(name, "only constant-drift beliefs can be fitted");
            }
            return {ParameterRef::Alpha, idx};
        }
        if (field == "rho") return {ParameterRef::Rho, idx};
        if (field == "nu") return {ParameterRef::Nu, idx};
    }
    throw ValidationError(name, "unknown parameter");
}

double logistic(double z) {
    return 1.0 / (1.0 + std::exp(-z));
}

} // namespace

double get_parameter(const ct::MarketSpec& spec, const std::string& name) {
    const auto ref = parse_parameter(spec, name);
    switch (ref.kind) {
    case ParameterRef::Sigma: return spec.sigma;
    case ParameterRef::AlphaStar: return spec.alpha_star;
    case ParameterRef::Alpha:
        return std::get<beliefs::ConstantDrift>(spec.agents[ref.agent].belief).alpha;
    case ParameterRef::Rho: return spec.agents[ref.agent].rho;
    case ParameterRef::Nu: return spec.agents[ref.agent].weight();
    }
    return 0.0;
}

void set_parameter(ct::MarketSpec& spec, const std::string& name, double value) {
    const auto ref = parse_parameter(spec, name);
    switch (ref.kind) {
    case ParameterRef::Sigma: spec.sigma = value; break;
    case ParameterRef::AlphaStar: spec.alpha_star = value; break;
    case ParameterRef::Alpha:
        std::get<beliefs::ConstantDrift>(spec.agents[ref.agent].belief).alpha = value;
        break;
    case ParameterRef::Rho: spec.agents[ref.agent].rho = value; break;
    case ParameterRef::Nu:
        spec.agents[ref.agent].nu = value;
        spec.agents[ref.agent].initial_wealth.reset();
        break;
    }
}

void validate(const CalibrationProblem& problem) {
    ct::validate(problem.start);
    if (problem.parameters.empty()) {
        throw ValidationError("calibration.parameters", "need at least one free parameter");
    }
    for (std::size_t i = 0; i < problem.parameters.size(); ++i) {
        const auto& p = problem.parameters[i];
        const std::string field = "calibration.parameters[" + std::to_string(i) + "]";
        parse_parameter(problem.start, p.name);
        if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo < p.hi)) {
            throw ValidationError(field, "need finite lo < hi");
        }
        const bool positive = p.name == "sigma" || p.name.ends_with(".rho") ||
                              p.name.ends_with(".nu");
        if (positive && !(p.lo > 0.0)) {
            throw ValidationError(field, p.name + " must stay > 0, so lo must be > 0");
        }
        const double x = get_parameter(problem.start, p.name);
        if (!(x > p.lo && x < p.hi)) {
            throw ValidationError(field, "start value must lie strictly inside the bounds");
        }
        for (std::size_t k = 0; k < i; ++k) {
            if (problem.parameters[k].name == p.name) {
                throw ValidationError(field, "duplicate parameter " + p.name);
            }
        }
    }
    if (problem.monte_carlo.paths == 0) {
        throw ValidationError("calibration.paths", "need at least one path");
    }
    for (double w : problem.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ValidationError("calibration.weights", "weights must be finite and >= 0");
        }
    }
}

double moment_loss(const MomentReport& model, const MomentReport& target,
                   const std::array<double, kMomentCount>& weights) {
    const auto m = model.values();
    const auto t = target.values();
    double loss = 0.0;
    for (std::size_t k = 0; k < kMomentCount; ++k) {
        if (!std::isfinite(m[k])) {
            return kInf;
        }
        if (weights[k] == 0.0) {
            continue;
        }
        const double rel = (m[k] - t[k]) / t[k];
        loss += weights[k] * rel * rel;
    }
    return std::isfinite(loss) ? loss : kInf;
}

double evaluate_loss(const CalibrationProblem& problem, const ct::MarketSpec& spec,
                     const MomentReport& target, MomentReport* report) {
    try {
        const auto m = simulate_moments(spec, problem.monte_carlo);
        if (report) {
            *report = m;
        }
        return moment_loss(m, target, problem.weights);
    } catch (const NumericError&) {
        return kInf;
    }
}

FitResult fit_parameters(const CalibrationProblem& problem, const EmpiricalTargets& targets) {
    validate(problem);
    const auto& params = problem.parameters;
    const std::size_t n = params.size();

    auto to_spec = [&](const std::vector<double>& z) {
        ct::MarketSpec spec = problem.start;
        for (std::size_t i = 0; i < n; ++i) {
            set_parameter(spec, params[i].name,
                          params[i].lo + (params[i].hi - params[i].lo) * logistic(z[i]));
        }
        return spec;
    };

    FitResult result;
    auto evaluate = [&](const std::vector<double>& z) {
        MomentReport report;
        const auto spec = to_spec(z);
        const double loss = evaluate_loss(problem, spec, targets.moments, &report);
        ++result.evaluations;
        if (result.evaluations == 1 || loss < result.loss) {
            result.loss = loss;
            result.spec = spec;
            result.report = report;
        }
        return loss;
    };

    std::vector<double> z0(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (get_parameter(problem.start, params[i].name) - params[i].lo) /
                         (params[i].hi - params[i].lo);
        z0[i] = std::log(u / (1.0 - u));
    }

    // Simplex in logit coordinates; vertex 0 is the start point.
    std::vector<std::vector<double>> simplex(n + 1, z0);
    std::vector<double> f(n + 1);
    f[0] = evaluate(z0);
    result.start_loss = f[0];
    for (std::size_t i = 0; i < n; ++i) {
        simplex[i + 1][i] += 0.5;
        f[i + 1] = evaluate(simplex[i + 1]);
    }

    std::vector<std::size_t> order(n + 1);
    auto affine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = a[i] + t * (b[i] - a[i]);
        }
        return out;
    };

    while (result.evaluations < problem.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];
        if (std::isfinite(f[worst]) && f[worst] - f[best] <= problem.tolerance) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                centroid[i] += simplex[order[k]][i] / static_cast<double>(n);
            }
        }

        const auto reflected = affine(centroid, simplex[worst], -1.0);
        const double fr = evaluate(reflected);
        if (fr < f[best]) {
            const auto expanded = affine(centroid, simplex[worst], -2.0);
            const double fe = evaluate(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                f[worst] = fe;
            } else {
                simplex[worst] = reflected;
                f[worst] = fr;
            }
            continue;
        }
        if (fr < f[second]) {
            simplex[worst] = reflected;
            f[worst] = fr;
            continue;
        }
        const bool outside = fr < f[worst];
        const auto contracted =
            outside ? affine(centroid, reflected, 0.5) : affine(centroid, simplex[worst], 0.5);
        const double fc = evaluate(contracted);
        if (outside ? fc <= fr : fc < f[worst]) {
            simplex[worst] = contracted;
            f[worst] = fc;
            continue;
        }
        for (std::size_t k = 1; k <= n; ++k) {
            const std::size_t v = order[k];
            simplex[v] = affine(simplex[best], simplex[v], 0.5);
            f[v] = evaluate(simplex[v]);
        }
    }
    return result;
}

} // namespace divbelief::calibration
