#include "divbelief/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "divbelief/beauty.hpp"
#include "divbelief/calibration.hpp"
#include "divbelief/config.hpp"
#include "divbelief/csv.hpp"
#include "divbelief/errors.hpp"
#include "divbelief/feedback.hpp"
#include "divbelief/numerics.hpp"
#include "divbelief/rng.hpp"

namespace divbelief::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<unsigned> parallel;
    std::string out = "out";
    std::string ingest_file;
};

// All output files go through here so nothing lands outside --out.
class OutputDir {
public:
    explicit OutputDir(const fs::path& root) : root_(root) { fs::create_directories(root_); }

    void write(const fs::path& relative, const std::string& content) const {
        const fs::path target = root_ / relative;
        fs::create_directories(target.parent_path());
        std::ofstream f(target, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw std::runtime_error("cannot write " + target.string());
        }
        f << content;
        if (!f) {
            throw std::runtime_error("write failed for " + target.string());
        }
    }

    std::ofstream open(const fs::path& relative) const {
        const fs::path target = root_ / relative;
        fs::create_directories(target.parent_path());
        std::ofstream f(target, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw std::runtime_error("cannot write " + target.string());
        }
        return f;
    }

private:
    fs::path root_;
};

config::RunConfig resolve(const Options& opt) {
    config::RunConfig c = opt.config.empty() ? config::parse(json::object())
                                             : config::load(opt.config);
    if (opt.seed) {
        c.seed = *opt.seed;
        if (c.feedback) {
            c.feedback->model.seed = c.seed;
        }
    }
    if (opt.paths) {
        if (*opt.paths == 0) {
            throw ValidationError("--paths", "need at least one path");
        }
        c.simulation.paths = *opt.paths;
        c.simulation.write_paths = std::min(c.simulation.write_paths, *opt.paths);
        if (c.calibration) {
            c.calibration->paths = *opt.paths;
        }
    }
    if (opt.parallel) {
        if (*opt.parallel == 0) {
            throw ValidationError("--parallel", "must be >= 1");
        }
        c.parallel = *opt.parallel;
    }
    return c;
}

void write_manifest(const OutputDir& dir, const std::string& command,
                    const config::RunConfig& c) {
    const json manifest{{"command", command}, {"config", config::to_json(c)}};
    dir.write("manifest.json", manifest.dump(2) + "\n");
}

std::string moment_table(const calibration::MomentReport& model, const std::string& model_name,
                         const calibration::MomentReport* target, const std::string& target_name) {
    std::string s = fmt::format("{:<30} {:>12}", "", model_name);
    if (target) {
        s += fmt::format(" {:>12}", target_name);
    }
    s += '\n';
    const auto m = model.values();
    const auto names = calibration::moment_names();
    for (std::size_t k = 0; k < calibration::kMomentCount; ++k) {
        s += fmt::format("{:<30} {:>12.4f}", names[k], m[k]);
        if (target) {
            s += fmt::format(" {:>12.4f}", target->values()[k]);
        }
        s += '\n';
    }
    return s;
}

json moments_json(const calibration::MomentReport& m) {
    return {{"pd_mean", m.pd_mean},         {"pd_std", m.pd_std},
            {"return_mean", m.return_mean}, {"return_std", m.return_std},
            {"rate_mean", m.rate_mean},     {"rate_std", m.rate_std},
            {"premium", m.premium},         {"sharpe", m.sharpe},
            {"pd_mean_stderr", m.pd_mean_stderr}, {"paths", m.paths},
            {"observations", m.observations}};
}

// --- simulate-log --------------------------------------------------------------

int cmd_simulate_log(const config::RunConfig& c, const OutputDir& dir, std::ostream& out) {
    if (!c.market) {
        throw ValidationError("market", "simulate-log needs a market section");
    }
    const auto& sim = c.simulation;
    const ct::SimulationOptions options{sim.horizon, sim.dt()};
    for (std::size_t i = 0; i < sim.write_paths; ++i) {
        auto file = dir.open(fmt::format("paths/path_{:04}.csv", i));
        const auto driver = ct::simulate_driver(*c.market, options.horizon, options.dt,
                                                ct::path_seed(c.seed, i));
        csv::EquilibriumWriter writer(file, c.market->agents.size());
        ct::evaluate_path(*c.market, driver, [&](const ct::EquilibriumPoint& p) { writer.row(p); });
    }

    calibration::MonteCarloOptions mc;
    mc.simulation = options;
    mc.paths = sim.paths;
    mc.seed = c.seed;
    mc.threads = c.parallel;
    const auto report = calibration::simulate_moments(*c.market, mc);

    const auto table = moment_table(report, "Model", nullptr, "");
    const std::string summary =
        fmt::format("paths {}  horizon {} years  dt {}\n", sim.paths, sim.horizon, sim.dt()) +
        table + fmt::format("{:<30} {:>12.4f}\n", "Std error of mean PD", report.pd_mean_stderr);
    dir.write("summary.txt", summary);
    dir.write("summary.json", moments_json(report).dump(2) + "\n");
    out << summary;
    return kExitOk;
}

// --- feedback ----------------------------------------------------------------

json metrics_json(const feedback::FeedbackMetrics& m) {
    return {{"max_log_ratio", m.max_log_ratio},   {"min_log_ratio", m.min_log_ratio},
            {"range_log_ratio", m.range_log_ratio}, {"crash_count", m.crash_count},
            {"warning_steps", m.warning_steps},   {"max_residual", m.max_residual},
            {"steps", m.steps}};
}

int cmd_feedback(const config::RunConfig& c, const OutputDir& dir, std::ostream& out) {
    if (!c.feedback) {
        throw ValidationError("feedback", "feedback needs a feedback section");
    }
    const auto& model = c.feedback->model;
    const auto run = feedback::run_feedback(model);
    {
        auto file = dir.open("feedback.csv");
        csv::write_feedback(file, run.records);
    }
    json metrics = metrics_json(run.metrics);
    metrics["seed"] = model.seed;
    dir.write("metrics.json", metrics.dump(2) + "\n");
    out << fmt::format("agents {}  diligent {}  years {}  seed {}\n", model.agents, model.diligent,
                       model.years, model.seed);
    out << fmt::format("log(S/S*): min {:.4f}  max {:.4f}  range {:.4f}\n",
                       run.metrics.min_log_ratio, run.metrics.max_log_ratio,
                       run.metrics.range_log_ratio);
    out << fmt::format("large moves {}  multi-root steps {}  max residual {:.3g}\n",
                       run.metrics.crash_count, run.metrics.warning_steps,
                       run.metrics.max_residual);

    const std::size_t n = c.feedback->sweep_seeds;
    if (n == 0) {
        return kExitOk;
    }
    // Seed sweep: sweep seed i is stream_seed(seed, Sweep, i); ordered fold.
    std::vector<feedback::FeedbackMetrics> results(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t i) {
        try {
            auto cfg = model;
            cfg.seed = stream_seed(c.seed, StreamDomain::Sweep, i);
            results[i] = feedback::run_feedback(cfg).metrics;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(c.parallel, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            work(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    work(i);
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

    std::string table = "index,seed,min_log_ratio,max_log_ratio,range_log_ratio,crash_count,"
                        "warning_steps\n";
    RunningStats range;
    RunningStats crashes;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& m = results[i];
        table += fmt::format("{},{},{},{},{},{},{}\n", i, stream_seed(c.seed, StreamDomain::Sweep, i),
                             m.min_log_ratio, m.max_log_ratio, m.range_log_ratio, m.crash_count,
                             m.warning_steps);
        range.add(m.range_log_ratio);
        crashes.add(static_cast<double>(m.crash_count));
    }
    dir.write("sweep.csv", table);
    const json summary{{"seeds", n},
                       {"mean_range_log_ratio", range.mean()},
                       {"std_range_log_ratio", range.stddev()},
                       {"mean_crash_count", crashes.mean()}};
    dir.write("sweep_summary.json", summary.dump(2) + "\n");
    out << fmt::format("sweep over {} seeds: mean range {:.4f} (sd {:.4f}), mean large moves {:.2f}\n",
                       n, range.mean(), range.stddev(), crashes.mean());
    return kExitOk;
}

// --- beauty --------------------------------------------------------------------

int cmd_beauty(const config::RunConfig& c, const OutputDir& dir, std::ostream& out) {
    if (!c.contest) {
        throw ValidationError("contest", "beauty needs a contest section");
    }
    const auto w = beauty::welfare_comparison(*c.contest);
    const auto& t = w.truthful;
    const auto& f = w.faked;

    std::string text;
    text += fmt::format("Truthful price S0 = {:.6f}    Faked price S0~ = {:.6f}\n\n", t.S0, f.S0);
    text += fmt::format("{:>5} {:>8} {:>10} {:>8} {:>8} {:>10} {:>12} {:>10} {:>10} {:>12} {:>9}\n",
                        "agent", "gamma", "alpha", "v", "p", "theta", "objective", "alpha~",
                        "theta~", "objective~", "improves");
    std::string table =
        "agent,gamma,alpha,v,p,q,theta,objective,alpha_tilde,theta_tilde,objective_tilde,improves\n";
    for (std::size_t j = 0; j < c.contest->agents.size(); ++j) {
        const auto& a = c.contest->agents[j];
        text += fmt::format(
            "{:>5} {:>8.4f} {:>10.4f} {:>8.4f} {:>8.4f} {:>10.4f} {:>12.6f} {:>10.4f} {:>10.4f} "
            "{:>12.6f} {:>9}\n",
            j + 1, a.gamma, a.alpha, a.v, t.p[j], t.theta[j], t.objective[j], f.alpha_tilde[j],
            f.theta[j], f.objective[j], w.improves[j] ? "yes" : "no");
        table += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", j + 1, a.gamma, a.alpha, a.v,
                             t.p[j], f.q[j], t.theta[j], t.objective[j], f.alpha_tilde[j],
                             f.theta[j], f.objective[j], w.improves[j] ? 1 : 0);
    }
    text += fmt::format("\nall agents improve: {}    all agents worse off: {}\n",
                        w.all_improve ? "yes" : "no", w.all_worse ? "yes" : "no");
    text += fmt::format("q-weighted dispersion: {:.12g} = {:.12g}\n", w.identity_lhs,
                        w.identity_rhs);
    text += fmt::format("max fixed-point residual: {:.3g}\n", w.max_fixed_point_residual);

    dir.write("contest.txt", text);
    dir.write("contest.csv", table);
    out << text;
    return kExitOk;
}

// --- fit -----------------------------------------------------------------------

int cmd_fit(const config::RunConfig& c, const OutputDir& dir, std::ostream& out) {
    if (!c.calibration || !c.market) {
        throw ValidationError("calibration", "fit needs market and calibration sections");
    }
    const auto& s = *c.calibration;
    const auto targets = s.targets_csv
                             ? calibration::ingest_price_dividend_csv(
                                   *s.targets_csv, c.ingest ? c.ingest->options
                                                            : calibration::IngestOptions{})
                             : calibration::default_targets();
    calibration::CalibrationProblem problem;
    problem.start = *c.market;
    problem.parameters = s.parameters;
    problem.monte_carlo.simulation = {s.horizon, 1.0 / s.steps_per_year};
    problem.monte_carlo.paths = s.paths;
    problem.monte_carlo.seed = c.seed;
    problem.monte_carlo.threads = c.parallel;
    problem.weights = s.weights;
    problem.max_evaluations = s.max_evaluations;
    problem.tolerance = s.tolerance;
    const auto result = calibration::fit_parameters(problem, targets);

    std::string text = fmt::format("targets: {}\n", targets.provenance);
    text += fmt::format("evaluations {}  converged {}  start loss {:.6g}  final loss {:.6g}\n\n",
                        result.evaluations, result.converged ? "yes" : "no", result.start_loss,
                        result.loss);
    text += moment_table(result.report, "Fitted", &targets.moments, "Empirical");
    text += "\nparameters:\n";
    for (const auto& p : s.parameters) {
        text += fmt::format("  {:<20} {:>12.6f}  (start {:.6f})\n", p.name,
                            calibration::get_parameter(result.spec, p.name),
                            calibration::get_parameter(c.market.value(), p.name));
    }
    dir.write("fit.txt", text);
    const json fragment{{"market", config::to_json(result.spec)}};
    dir.write("fitted_market.json", fragment.dump(2) + "\n");
    json report = moments_json(result.report);
    report["loss"] = result.loss;
    report["start_loss"] = result.start_loss;
    report["evaluations"] = result.evaluations;
    dir.write("fit_report.json", report.dump(2) + "\n");
    out << text;
    return kExitOk;
}

// --- ingest --------------------------------------------------------------------

int cmd_ingest(const config::RunConfig& c, const OutputDir& dir, std::ostream& out) {
    if (!c.ingest) {
        throw ValidationError("ingest", "ingest needs an ingest section or a FILE argument");
    }
    const auto t = calibration::ingest_price_dividend_csv(c.ingest->file, c.ingest->options);
    std::string text = fmt::format("{} rows, {} to {}\n", t.rows, t.first_date, t.last_date);
    text += fmt::format("provenance: {}\n\n", t.provenance);
    text += moment_table(t.moments, "Empirical", nullptr, "");
    json j = moments_json(t.moments);
    j["rows"] = t.rows;
    j["first_date"] = t.first_date;
    j["last_date"] = t.last_date;
    j["provenance"] = t.provenance;
    dir.write("targets.json", j.dump(2) + "\n");
    dir.write("targets.txt", text);
    out << text;
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Equilibrium asset prices under diverse beliefs"};
    app.name("divbelief");
    app.require_subcommand(1);
    app.fallthrough();

    Options opt;
    app.add_option("--config", opt.config, "JSON config or run manifest");
    app.add_option("--seed", opt.seed, "Master seed (overrides the config)");
    app.add_option("--out", opt.out, "Output directory")->capture_default_str();
    app.add_option("--paths", opt.paths, "Monte Carlo paths (overrides the config)");
    app.add_option("--parallel", opt.parallel, "Worker threads (results do not depend on it)");

    auto* simulate = app.add_subcommand("simulate-log", "Simulate log-agent equilibrium paths");
    auto* fb = app.add_subcommand("feedback", "Discrete-time price feedback simulation");
    auto* contest = app.add_subcommand("beauty", "One-period beauty contest with faked beliefs");
    auto* fit = app.add_subcommand("fit", "Fit model parameters to moments");
    auto* ingest = app.add_subcommand("ingest", "Moments from a monthly price/dividend CSV");
    ingest->add_option("file", opt.ingest_file, "CSV file (overrides ingest.file)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        auto c = resolve(opt);
        if (ingest->parsed() && !opt.ingest_file.empty()) {
            config::IngestSection s;
            s.file = fs::absolute(opt.ingest_file).lexically_normal().string();
            if (c.ingest) {
                s.options = c.ingest->options;
            }
            c.ingest = s;
        }
        OutputDir dir(opt.out);
        std::string command;
        int code = kExitOk;
        if (simulate->parsed()) {
            command = "simulate-log";
            code = cmd_simulate_log(c, dir, out);
        } else if (fb->parsed()) {
            command = "feedback";
            code = cmd_feedback(c, dir, out);
        } else if (contest->parsed()) {
            command = "beauty";
            code = cmd_beauty(c, dir, out);
        } else if (fit->parsed()) {
            command = "fit";
            code = cmd_fit(c, dir, out);
        } else {
            command = "ingest";
            code = cmd_ingest(c, dir, out);
        }
        write_manifest(dir, command, c);
        return code;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FixedPointError& e) {
        err << "numeric failure at " << e.what() << '\n';
        return kExitNumeric;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace divbelief::cli
