#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "divbelief/beauty.hpp"
#include "divbelief/calibration.hpp"
#include "divbelief/equilibrium.hpp"
#include "divbelief/feedback.hpp"

// Run configuration. A config is one JSON object; every section is optional
// and only the sections a subcommand needs must be present. Unknown keys are
// rejected. The schema is documented in README.md.
namespace divbelief::config {

struct SimulationSection {
    double horizon = 128.0;
    double steps_per_year = 252.0;
    std::size_t paths = 1;
    std::size_t write_paths = 1;  // per-path CSV files to emit

    double dt() const noexcept { return 1.0 / steps_per_year; }
};

struct FeedbackSection {
    feedback::FeedbackConfig model;  // model.seed is taken from RunConfig::seed
    std::size_t sweep_seeds = 0;     // > 0: also run that many derived seeds
};

struct CalibrationSection {
    std::vector<calibration::FreeParameter> parameters;
    double horizon = 50.0;
    double steps_per_year = 252.0;
    std::size_t paths = 200;
    std::array<double, calibration::kMomentCount> weights{1, 1, 1, 1, 1, 1, 1, 1};
    std::size_t max_evaluations = 200;
    double tolerance = 1e-6;
    std::optional<std::string> targets_csv;  // default: built-in targets
};

struct IngestSection {
    std::string file;
    calibration::IngestOptions options;
};

struct RunConfig {
    std::uint64_t seed = 1;
    unsigned parallel = 1;
    std::optional<ct::MarketSpec> market;
    SimulationSection simulation;
    std::optional<FeedbackSection> feedback;
    std::optional<beauty::ContestSpec> contest;
    std::optional<CalibrationSection> calibration;
    std::optional<IngestSection> ingest;
};

/// Parses and validates. Accepts either a config object or a run manifest
/// ({"command": ..., "config": {...}}). Relative file paths inside the config
/// are resolved against `base_dir`.
RunConfig parse(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Reads a file; JSON syntax errors become ValidationError.
RunConfig load(const std::filesystem::path& file);

/// Fully resolved config; parse(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

nlohmann::json to_json(const ct::MarketSpec& market);

} // namespace divbelief::config
