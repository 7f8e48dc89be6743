#pragma once

// End-to-end studies built from the library pieces: radius sweeps, average rho
// over random initial conditions, surrogate training/evaluation protocols for
// the Burgers and tsunami testbeds, plus the on-disk cache and run manifests
// used by the command-line tool.

#include "limda/datagen.hpp"
#include "limda/effective_region.hpp"
#include "limda/mlp.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace limda {

// ---------------------------------------------------------------------------
// Cache

/// $LIMDA_CACHE_DIR, or ./limda-cache when unset.
std::filesystem::path default_cache_dir();

struct Cache {
    std::filesystem::path root = default_cache_dir();
    bool force = false;  ///< regenerate instead of reusing
    std::ostream* log = nullptr;

    void note(const std::string& stage, const std::string& message) const;
};

/// Content-addressed by the pool configuration; an interrupted generation resumes.
BurgersPool cached_burgers_pool(const BurgersPoolConfig& cfg, const Cache& cache);
TsunamiPool cached_tsunami_pool(const TsunamiPoolConfig& cfg, const Cache& cache);
/// Loads <root>/datasets/<hash of key> or builds and stores it.
Dataset cached_dataset(const nlohmann::json& key, const Cache& cache, const std::function<Dataset()>& build);

struct TrainedModel {
    MlpModel model;
    TrainLog log;
    std::filesystem::path path;
    std::string hash;
};

/// Loads <root>/models/<hash>.mlp or trains and stores it. The key must
/// identify the training data and the training configuration.
TrainedModel cached_training(const nlohmann::json& key, const Cache& cache, const std::function<TrainResult()>& train);

std::string config_hash(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Burgers studies

/// Sensor count and window length of one surrogate configuration.
struct SurrogateCase {
    int sensors = 4;
    int K = 12;

    std::string label() const;
    SensorLayout layout() const;
    friend bool operator==(const SurrogateCase&, const SurrogateCase&) = default;
};

/// (8, 12), (4, 12), (4, 5), (4, 2)
std::vector<SurrogateCase> table_cases();

struct BurgersStudyConfig {
    BurgersPoolConfig base;  ///< grid, physics, steps, IC spread; domain/probes/count/seed are set per use
    GridPoint center{25, 25};
    int radius = 7;
    int pool_count = 10000;
    Index train_points = 30000;
    Index validation_points = 30000;
    double noise_std = 0.065;
    std::uint64_t seed = 1;  ///< data seed; pools and datasets derive their own streams from it
    std::vector<std::uint64_t> training_seeds{0, 1, 2, 3, 4};
    TrainConfig train;
    double epsilon = 0.065;
    double delta = 0.5;
    int rho_draws = 250;
    int sweep_max_radius = 12;
    double sweep_threshold = 1e-4;
    int plateau_from_step = 75;  ///< windows ending at or after this step form the late-time plateau
    double desk_scale = 1.0;     ///< multiplies pool_count, train_points and validation_points

    int scaled_pool_count() const;
    Index scaled_train_points() const;
    Index scaled_validation_points() const;
    ObservabilityConfig observability(int K) const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; wrong types throw InvalidInput.
    static BurgersStudyConfig from_json(const nlohmann::json& j);
};

/// rho(R) for the nominal initial condition, zero boundary, four sensors, K = 12.
RadiusSweep run_burgers_sweep(const BurgersStudyConfig& cfg);

struct AverageRho {
    std::vector<SurrogateCase> cases;
    std::vector<double> mean;  ///< per case
    Eigen::MatrixXd samples;   ///< draws x cases
};

/// Mean rho over `rho_draws` random initial conditions for each case, with the
/// index set of the radius-`radius` square. One set of perturbation runs per
/// draw serves every case (sensor subsets and shorter windows are slices).
AverageRho average_rho(const BurgersStudyConfig& cfg, const std::vector<SurrogateCase>& cases);

/// Where the training trajectories come from.
enum class TrainingDomain {
    FullDomain,         ///< 50x50 grid, zero boundary
    EffectiveRegion,    ///< radius-`radius` square, fabricated boundary
};

struct SurrogateRun {
    std::uint64_t training_seed = 0;
    RmseReport validation;
    TrainedModel trained;
};

struct SurrogateSummary {
    SurrogateCase config;
    std::vector<SurrogateRun> runs;
    std::size_t median_index = 0;  ///< run whose aggregate validation RMSE is the median

    double median_rmse() const { return runs.at(median_index).validation.aggregate; }
    const SurrogateRun& median_run() const { return runs.at(median_index); }
};

struct SurrogateStudy {
    TrainingDomain domain = TrainingDomain::EffectiveRegion;
    int radius = 7;
    std::vector<SurrogateSummary> cases;

    const SurrogateSummary& find(const SurrogateCase& c) const;
};

/// Trains every case with every training seed on the chosen domain and
/// validates on an independent full-domain zero-boundary pool.
SurrogateStudy run_surrogate_study(const BurgersStudyConfig& cfg, TrainingDomain domain,
                                   const std::vector<SurrogateCase>& cases, const Cache& cache);

/// One full-domain trajectory from the nominal initial condition.
BurgersPool nominal_trajectory(const BurgersStudyConfig& cfg, const BoundarySpec& bc, GridPoint center,
                               const SensorLayout& sensors, const Cache& cache);

/// Model estimate of u(center) along one trajectory (windows k0 = 0..N_t-K).
struct TrajectoryEstimate {
    std::vector<int> steps;  ///< k0 + K of each window
    Eigen::VectorXd truth;
    Eigen::VectorXd estimate;
    double rmse = 0.0;
    double max_abs_error = 0.0;
    double mean_error = 0.0;  ///< signed, estimate - truth

    /// Mean signed error over the windows whose step is >= first_step.
    double mean_error_from(int first_step) const;
};

TrajectoryEstimate estimate_trajectory(const MlpModel& model, const BurgersPool& trajectory, const SensorLayout& sensors,
                                       GridPoint center, int K, double noise_std, std::uint64_t seed);

void write_estimate_csv(const std::filesystem::path& path, const TrajectoryEstimate& e);

// ---------------------------------------------------------------------------
// Tsunami study

struct TsunamiStudyConfig {
    TsunamiPoolConfig pool;
    int amplitude_count = 91;
    double amplitude_min = 0.2;
    double amplitude_max = 3.2;
    Index points = 9100;
    double lead_seconds = 9000.0;
    double noise_std = 0.15;
    double validation_fraction = 0.1;  ///< share of trajectories held out
    double nominal_Mh = 3.0;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> training_seeds{0, 1, 2, 3, 4};
    TrainConfig train;
    double desk_scale = 1.0;  ///< multiplies amplitude_count and points

    int scaled_amplitude_count() const;
    Index scaled_points() const;
    nlohmann::json to_json() const;
    static TsunamiStudyConfig from_json(const nlohmann::json& j);
};

struct TsunamiRun {
    std::uint64_t training_seed = 0;
    RmseReport validation;     ///< held-out trajectories, noisy inputs
    RmseReport nominal_clean;  ///< nominal trajectory, noise-free inputs
    RmseReport nominal_noisy;  ///< nominal trajectory, noisy inputs
    TrainedModel trained;
};

struct TsunamiStudy {
    std::vector<TsunamiRun> runs;
    std::size_t median_index = 0;  ///< by nominal_clean RMSE
    Dataset nominal_windows;        ///< noise-free windows of the nominal trajectory

    const TsunamiRun& median_run() const { return runs.at(median_index); }
};

TsunamiStudy run_tsunami_study(const TsunamiStudyConfig& cfg, const Cache& cache);

/// Index of the median value (lower median for even counts).
std::size_t median_index(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Run manifests

struct ManifestCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string comparison;  ///< "<=", ">=", "<", ">", "=="
    std::optional<double> reference;  ///< published value, when there is one
    bool passed = false;
};

ManifestCheck make_check(std::string name, double value, std::string comparison, double threshold,
                         std::optional<double> reference = std::nullopt);

struct Manifest {
    std::string experiment;
    nlohmann::json config;
    std::string config_hash;
    std::string created;
    std::vector<std::pair<std::string, std::filesystem::path>> artifacts;  ///< (name, path relative to the manifest)
    std::vector<ManifestCheck> checks;

    void add_artifact(const std::string& name, const std::filesystem::path& relative_path);
    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
    void write(const std::filesystem::path& path) const;
    static Manifest read(const std::filesystem::path& path);
};

/// Prints the check table and missing artifacts; returns the process exit code
/// (0 when every check passed and every artifact exists). Throws InvalidInput
/// on a manifest with neither artifacts nor checks.
int report_manifest(const std::filesystem::path& manifest_path, std::ostream& out);

// ---------------------------------------------------------------------------
// Experiment runner

struct RunOptions {
    std::string experiment;  ///< burgers-sweep | burgers-table2 | burgers-table3 | burgers-table3b |
                             ///< burgers-nonzero-bc | burgers-shifted | tsunami
    nlohmann::json config = nlohmann::json::object();
    std::filesystem::path output_dir;
    Cache cache;
};

const std::vector<std::string>& experiment_ids();

/// Runs one experiment, writes CSV tables and a manifest.json into
/// output_dir, and returns the manifest.
Manifest run_experiment(const RunOptions& options);

/// Applies "key=value" overrides to a JSON object. Keys may be dotted paths;
/// values are parsed as JSON when possible and kept as strings otherwise.
void apply_overrides(nlohmann::json& config, const std::vector<std::string>& assignments);

}  // namespace limda
