#include "divbelief/config.hpp"

#include <fstream>
#include <set>
#include <string_view>

#include "divbelief/errors.hpp"

namespace divbelief::config {

using nlohmann::json;

namespace {

// Re-raise a module ValidationError under a config path prefix.
[[noreturn]] void rethrow_prefixed(const ValidationError& e, const std::string& prefix) {
    std::string message = e.what();
    const std::string head = e.field() + ": ";
    if (message.rfind(head, 0) == 0) {
        message.erase(0, head.size());
    }
    throw ValidationError(prefix + e.field(), message);
}

template <class F>
void with_prefix(const std::string& prefix, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        rethrow_prefixed(e, prefix);
    }
}

// Strict view of a JSON object: typed getters plus a check that every key was
// consumed.
class Object {
public:
    Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) {
            throw ValidationError(path_, "expected an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) {
            throw ValidationError(field(key), "required");
        }
        return j_.at(key);
    }

    double number(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) {
            throw ValidationError(field(key), "expected a number");
        }
        return v.get<double>();
    }

    double number(const std::string& key, double fallback) {
        return has(key) ? number(key) : fallback;
    }

    std::uint64_t unsigned_integer(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ValidationError(field(key), "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        return has(key) ? unsigned_integer(key) : fallback;
    }

    std::string string(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) {
            throw ValidationError(field(key), "expected a string");
        }
        return v.get<std::string>();
    }

    const json& array(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) {
            throw ValidationError(field(key), "expected an array");
        }
        return v;
    }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) {
                throw ValidationError(field(item.key()), "unknown key");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

feedback::Range parse_range(Object& o, const std::string& key, feedback::Range fallback) {
    if (!o.has(key)) {
        return fallback;
    }
    const auto& a = o.array(key);
    if (a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
        throw ValidationError(o.field(key), "expected [lo, hi]");
    }
    return {a[0].get<double>(), a[1].get<double>()};
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) {
        path = base_dir / path;
    }
    return path.lexically_normal().string();
}

beliefs::ContinuousBelief parse_belief(const json& j, const std::string& path) {
    Object o(j, path);
    const auto type = o.string("type");
    beliefs::ContinuousBelief belief;
    if (type == "constant") {
        belief = beliefs::ConstantDrift{o.number("alpha")};
    } else if (type == "bayesian") {
        belief = beliefs::BayesianGaussian{o.number("beta"), o.number("epsilon")};
    } else {
        throw ValidationError(o.field("type"), "expected \"constant\" or \"bayesian\"");
    }
    o.finish();
    return belief;
}

ct::MarketSpec parse_market(const json& j) {
    Object o(j, "market");
    ct::MarketSpec m;
    m.sigma = o.number("sigma");
    m.alpha_star = o.number("alpha_star", 0.0);
    m.delta0 = o.number("delta0", 1.0);
    const auto& agents = o.array("agents");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto path = index_path("market.agents", i);
        Object a(agents[i], path);
        ct::AgentSpec spec;
        spec.rho = a.number("rho");
        if (a.has("nu")) {
            spec.nu = a.number("nu");
        }
        if (a.has("initial_wealth")) {
            spec.initial_wealth = a.number("initial_wealth");
        }
        spec.belief = a.has("belief") ? parse_belief(a.raw("belief"), path + ".belief")
                                      : beliefs::ConstantDrift{};
        a.finish();
        m.agents.push_back(std::move(spec));
    }
    o.finish();
    with_prefix("market.", [&] { ct::validate(m); });
    return m;
}

SimulationSection parse_simulation(const json& j) {
    Object o(j, "simulation");
    SimulationSection s;
    s.horizon = o.number("horizon", s.horizon);
    s.steps_per_year = o.number("steps_per_year", s.steps_per_year);
    s.paths = o.unsigned_integer("paths", s.paths);
    s.write_paths = o.unsigned_integer("write_paths", s.write_paths);
    o.finish();
    if (!(s.horizon > 0.0) || !std::isfinite(s.horizon)) {
        throw ValidationError("simulation.horizon", "must be finite and > 0");
    }
    if (!(s.steps_per_year > 0.0) || !std::isfinite(s.steps_per_year) ||
        s.horizon * s.steps_per_year < 1.0) {
        throw ValidationError("simulation.steps_per_year", "need at least one step");
    }
    if (s.paths == 0) {
        throw ValidationError("simulation.paths", "need at least one path");
    }
    if (s.write_paths > s.paths) {
        throw ValidationError("simulation.write_paths", "cannot exceed simulation.paths");
    }
    return s;
}

FeedbackSection parse_feedback(const json& j) {
    Object o(j, "feedback");
    FeedbackSection s;
    auto& c = s.model;
    c.agents = static_cast<int>(o.unsigned_integer("agents", c.agents));
    c.diligent = static_cast<int>(o.unsigned_integer("diligent", c.diligent));
    c.sigma = o.number("sigma", c.sigma);
    c.growth = o.number("growth", c.growth);
    c.steps_per_year = o.number("steps_per_year", c.steps_per_year);
    c.years = o.number("years", c.years);
    c.rho_range = parse_range(o, "rho_range", c.rho_range);
    c.tau_factor_range = parse_range(o, "tau_factor_range", c.tau_factor_range);
    c.prior_mean_range = parse_range(o, "prior_mean_range", c.prior_mean_range);
    c.nu = o.number("nu", c.nu);
    c.prior_sample_years = o.number("prior_sample_years", c.prior_sample_years);
    c.delta0 = o.number("delta0", c.delta0);
    c.scan_points = static_cast<int>(o.unsigned_integer("scan_points", c.scan_points));
    c.crash_threshold_sd = o.number("crash_threshold_sd", c.crash_threshold_sd);
    s.sweep_seeds = o.unsigned_integer("sweep_seeds", 0);
    o.finish();
    feedback::validate(c);
    return s;
}

beauty::ContestSpec parse_contest(const json& j) {
    Object o(j, "contest");
    beauty::ContestSpec spec;
    const auto& agents = o.array("agents");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        Object a(agents[i], index_path("contest.agents", i));
        spec.agents.push_back({a.number("gamma"), a.number("alpha"), a.number("v")});
        a.finish();
    }
    o.finish();
    with_prefix("contest.", [&] { beauty::validate(spec); });
    return spec;
}

calibration::IngestOptions parse_ingest_options(Object& o) {
    calibration::IngestOptions opt;
    opt.min_years = o.number("min_years", opt.min_years);
    opt.fallback_rate_mean = o.number("fallback_rate_mean", opt.fallback_rate_mean);
    opt.fallback_rate_std = o.number("fallback_rate_std", opt.fallback_rate_std);
    opt.rate_scale = o.number("rate_scale", opt.rate_scale);
    if (!(opt.min_years >= 0.0)) {
        throw ValidationError("ingest.min_years", "must be >= 0");
    }
    return opt;
}

CalibrationSection parse_calibration(const json& j, const std::filesystem::path& base_dir) {
    Object o(j, "calibration");
    CalibrationSection s;
    const auto& params = o.array("parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Object p(params[i], index_path("calibration.parameters", i));
        s.parameters.push_back({p.string("name"), p.number("lo"), p.number("hi")});
        p.finish();
    }
    s.horizon = o.number("horizon", s.horizon);
    s.steps_per_year = o.number("steps_per_year", s.steps_per_year);
    s.paths = o.unsigned_integer("paths", s.paths);
    if (o.has("weights")) {
        const auto& w = o.array("weights");
        if (w.size() != calibration::kMomentCount) {
            throw ValidationError("calibration.weights", "expected 8 weights");
        }
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (!w[k].is_number()) {
                throw ValidationError(index_path("calibration.weights", k), "expected a number");
            }
            s.weights[k] = w[k].get<double>();
        }
    }
    s.max_evaluations = o.unsigned_integer("max_evaluations", s.max_evaluations);
    s.tolerance = o.number("tolerance", s.tolerance);
    if (o.has("targets_csv")) {
        s.targets_csv = resolve_path(o.string("targets_csv"), base_dir);
    }
    o.finish();
    if (!(s.horizon > 0.0) || !(s.steps_per_year > 0.0) || s.horizon * s.steps_per_year < 1.0) {
        throw ValidationError("calibration.horizon", "need at least one step");
    }
    return s;
}

IngestSection parse_ingest(const json& j, const std::filesystem::path& base_dir) {
    Object o(j, "ingest");
    IngestSection s;
    s.file = resolve_path(o.string("file"), base_dir);
    s.options = parse_ingest_options(o);
    o.finish();
    return s;
}

json range_json(const feedback::Range& r) {
    return json::array({r.lo, r.hi});
}

} // namespace

RunConfig parse(const json& input, const std::filesystem::path& base_dir) {
    const json* j = &input;
    if (input.is_object() && input.contains("command") && input.contains("config")) {
        j = &input.at("config");
    }
    Object o(*j, "");
    RunConfig c;
    c.seed = o.unsigned_integer("seed", c.seed);
    c.parallel = static_cast<unsigned>(o.unsigned_integer("parallel", c.parallel));
    if (c.parallel == 0) {
        throw ValidationError("parallel", "must be >= 1");
    }
    if (o.has("market")) {
        c.market = parse_market(o.raw("market"));
    }
    if (o.has("simulation")) {
        c.simulation = parse_simulation(o.raw("simulation"));
    }
    if (o.has("feedback")) {
        c.feedback = parse_feedback(o.raw("feedback"));
        c.feedback->model.seed = c.seed;
    }
    if (o.has("contest")) {
        c.contest = parse_contest(o.raw("contest"));
    }
    if (o.has("calibration")) {
        c.calibration = parse_calibration(o.raw("calibration"), base_dir);
        if (!c.market) {
            throw ValidationError("market", "calibration needs a starting market");
        }
        calibration::CalibrationProblem problem;
        problem.start = *c.market;
        problem.parameters = c.calibration->parameters;
        problem.monte_carlo.paths = c.calibration->paths;
        problem.weights = c.calibration->weights;
        with_prefix("", [&] { calibration::validate(problem); });
    }
    if (o.has("ingest")) {
        c.ingest = parse_ingest(o.raw("ingest"), base_dir);
    }
    o.finish();
    return c;
}

RunConfig load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ValidationError(file.string(), "cannot open config file");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(file.string(), e.what());
    }
    return parse(j, std::filesystem::absolute(file).parent_path());
}

json to_json(const ct::MarketSpec& m) {
    json agents = json::array();
    for (const auto& a : m.agents) {
        json agent{{"rho", a.rho}};
        if (a.nu) {
            agent["nu"] = *a.nu;
        }
        if (a.initial_wealth) {
            agent["initial_wealth"] = *a.initial_wealth;
        }
        if (const auto* c = std::get_if<beliefs::ConstantDrift>(&a.belief)) {
            agent["belief"] = {{"type", "constant"}, {"alpha", c->alpha}};
        } else {
            const auto& b = std::get<beliefs::BayesianGaussian>(a.belief);
            agent["belief"] = {{"type", "bayesian"}, {"beta", b.beta}, {"epsilon", b.epsilon}};
        }
        agents.push_back(std::move(agent));
    }
    return {{"sigma", m.sigma},
            {"alpha_star", m.alpha_star},
            {"delta0", m.delta0},
            {"agents", std::move(agents)}};
}

json to_json(const RunConfig& c) {
    json j{{"seed", c.seed}, {"parallel", c.parallel}};
    if (c.market) {
        j["market"] = to_json(*c.market);
    }
    j["simulation"] = {{"horizon", c.simulation.horizon},
                       {"steps_per_year", c.simulation.steps_per_year},
                       {"paths", c.simulation.paths},
                       {"write_paths", c.simulation.write_paths}};
    if (c.feedback) {
        const auto& f = c.feedback->model;
        j["feedback"] = {{"agents", f.agents},
                         {"diligent", f.diligent},
                         {"sigma", f.sigma},
                         {"growth", f.growth},
                         {"steps_per_year", f.steps_per_year},
                         {"years", f.years},
                         {"rho_range", range_json(f.rho_range)},
                         {"tau_factor_range", range_json(f.tau_factor_range)},
                         {"prior_mean_range", range_json(f.prior_mean_range)},
                         {"nu", f.nu},
                         {"prior_sample_years", f.prior_sample_years},
                         {"delta0", f.delta0},
                         {"scan_points", f.scan_points},
                         {"crash_threshold_sd", f.crash_threshold_sd},
                         {"sweep_seeds", c.feedback->sweep_seeds}};
    }
    if (c.contest) {
        json agents = json::array();
        for (const auto& a : c.contest->agents) {
            agents.push_back({{"gamma", a.gamma}, {"alpha", a.alpha}, {"v", a.v}});
        }
        j["contest"] = {{"agents", std::move(agents)}};
    }
    if (c.calibration) {
        const auto& s = *c.calibration;
        json params = json::array();
        for (const auto& p : s.parameters) {
            params.push_back({{"name", p.name}, {"lo", p.lo}, {"hi", p.hi}});
        }
        j["calibration"] = {{"parameters", std::move(params)},
                            {"horizon", s.horizon},
                            {"steps_per_year", s.steps_per_year},
                            {"paths", s.paths},
                            {"weights", s.weights},
                            {"max_evaluations", s.max_evaluations},
                            {"tolerance", s.tolerance}};
        if (s.targets_csv) {
            j["calibration"]["targets_csv"] = *s.targets_csv;
        }
    }
    if (c.ingest) {
        const auto& o = c.ingest->options;
        j["ingest"] = {{"file", c.ingest->file},
                       {"min_years", o.min_years},
                       {"fallback_rate_mean", o.fallback_rate_mean},
                       {"fallback_rate_std", o.fallback_rate_std},
                       {"rate_scale", o.rate_scale}};
    }
    return j;
}

} // namespace divbelief::config
