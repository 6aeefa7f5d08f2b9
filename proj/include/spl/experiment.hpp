#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spl/resolvents.hpp"
#include "spl/spectra.hpp"

namespace spl {

using json = nlohmann::json;

constexpr int config_schema_version = 1;
constexpr const char* tool_version = "0.3.0";
constexpr const char* output_root_env = "SPL_OUTPUT_ROOT";

enum ExitCode { exit_ok = 0, exit_failure = 1, exit_validation = 2, exit_positivity = 3, exit_numerical = 4 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaskSpec {
    std::string kind;  // resolvent_diff | two_weight_diff | power_diff | krein_feller | robin_diff | weyl_check
    int m = 2;
    bool sign_separation = false;  // resolvent_diff: also fit with V_+ alone
};

struct AnalysisSpec {
    double floor_rel = 1e-11;
    int lo = 0;
    int hi = 0;
    bool period_average = false;
    bool resolution_cap = true;
    int samples = 200;
    double margin = default_margin;
    double l = 0.5;
};

struct ExperimentConfig {
    json raw;  // validated, with defaults filled in
    std::uint64_t seed = 0;
    Grid grid;
    Mat coefficient;  // constant N x N
    double t = 1.0;
    int max_t_raises = 3;
    std::vector<TaskSpec> tasks;
    AnalysisSpec analysis;

    std::string hash() const;
    std::string canonical() const { return raw.dump(2); }
};

// throws ConfigError on any schema violation, including unknown keys
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// the measure and the two weights of a config; random weights draw from the config seed
struct Realization {
    std::shared_ptr<const DiscreteMeasure> measure;
    Perturbation V1;
    Perturbation V2;
};
Realization realize(const ExperimentConfig& cfg);

// number of grid cells holding an atom with nonzero weight; half of it bounds the resolvable spectrum
int touched_cells(const Grid& grid, const DiscreteMeasure& m, const Vec& values);

FitOptions fit_options(const AnalysisSpec& a, int resolution_cap);

struct RunResult {
    json manifest;
    std::filesystem::path dir;
    int exit_code = exit_ok;
    bool reused = false;
};

std::filesystem::path output_root();
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& root);

// axis is a dotted path to a scalar config field, e.g. operator.t or domain.n
std::vector<RunResult> sweep_experiment(const ExperimentConfig& base, const std::string& axis,
                                        const std::vector<double>& values, const std::filesystem::path& root,
                                        int workers, std::filesystem::path* table = nullptr);

// re-emits the fits referenced by a manifest as one CSV table or one JSON document
std::string export_manifest(const std::filesystem::path& manifest, const std::string& format);

}  // namespace spl
