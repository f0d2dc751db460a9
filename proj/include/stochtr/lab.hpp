#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace stochtr::lab {

struct ExperimentInfo {
    std::string id;
    std::string description;
    std::string anchor;
};

/// Static registry, in a fixed order.
const std::vector<ExperimentInfo>& list_experiments();

/// One violated constraint: the offending field, the constraint it breaks, and the numbers.
struct Diagnostic {
    std::string field;
    std::string constraint;
    std::string detail;
    bool resource = false;  // memory budget rather than a malformed value

    std::string str() const;
};

/// Every violated constraint of a JSON experiment config. Empty means run() will
/// reach computation. Missing optional fields take the experiment defaults.
std::vector<Diagnostic> validate(const nlohmann::json& config);

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    std::uint64_t seed = 0;
    nlohmann::json config;  // echo with defaults filled in
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<Check> checks;
    std::vector<std::string> files;  // CSVs written, relative to the output directory
    std::string version;
    double wall_time_s = 0.0;

    bool passed() const;
    const Check* find_check(const std::string& name) const;
    double metric(const std::string& name) const;
    nlohmann::json to_json() const;
};

struct ValidationFailed : std::runtime_error {
    explicit ValidationFailed(std::vector<Diagnostic> d);
    std::vector<Diagnostic> diagnostics;
    bool resource_only() const;
};

/// Validates, runs the experiment and writes its CSVs plus report.json into
/// `out_dir` (created if needed). Throws ValidationFailed before any computation.
ExperimentReport run(const nlohmann::json& config, const std::filesystem::path& out_dir);

/// Config with every field at its default, for `experiment`.
nlohmann::json default_config(const std::string& experiment, std::uint64_t seed);

/// 17 significant digits.
std::string fmt(double v);

std::string version();

}  // namespace stochtr::lab
