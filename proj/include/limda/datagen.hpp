#pragma once

// Training data for the surrogate estimators.
//
// Trajectory pools hold probe time series of many simulations; datasets are
// (X, Y) pairs cut from random windows of those series with sensor noise added
// to X only. Every random draw comes from a stream derived from (seed, item
// index), so output does not depend on evaluation order.

#include "limda/burgers.hpp"
#include "limda/effective_region.hpp"
#include "limda/shallow_water.hpp"
#include "limda/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace limda {

// ---------------------------------------------------------------------------
// Burgers trajectory pools

enum class PoolDomain {
    Full,    ///< whole grid, boundary from `boundary`
    Region,  ///< radius-R square around `center` with the fabricated boundary
};

struct BurgersPoolConfig {
    PoolDomain domain = PoolDomain::Full;
    Grid2D grid = Grid2D::square();
    BurgersOptions physics;
    BoundaryKind boundary = BoundaryKind::Zero;  ///< Full domain only
    double boundary_amplitude = 1.0;             ///< Sinusoidal / ConstantTanh amplitude
    GridPoint center{25, 25};
    int radius = 7;
    int steps = 100;
    std::vector<GridPoint> probes;  ///< full-grid coordinates
    int count = 1;
    std::uint64_t seed = 0;
    double coefficient_std = 0.1;  ///< 0 reproduces the nominal initial condition
    int modes = 3;

    nlohmann::json to_json() const;
    static BurgersPoolConfig from_json(const nlohmann::json& j);
    /// Content hash of the configuration (cache key).
    std::string hash() const;
};

/// frames x 2|probes| series; columns (u, v) per probe in probe order.
struct BurgersTrajectory {
    std::uint64_t id = 0;
    Eigen::MatrixXd series;
};

struct BurgersPool {
    BurgersPoolConfig config;
    std::vector<BurgersTrajectory> trajectories;

    int frames() const { return config.steps + 1; }
    /// Column of `variable` (0 = u, 1 = v) at probe `p`; throws if p is not a probe.
    Index column(GridPoint p, int variable) const;
};

/// All points of the (2R+1)^2 square around `center`.
std::vector<GridPoint> region_points(GridPoint center, int radius);
/// 3x3 block around `center`, i-major: (c.i-1, c.j-1), (c.i-1, c.j), ...
std::vector<GridPoint> target_block(GridPoint center);
/// Sorted union of point lists without duplicates.
std::vector<GridPoint> merge_points(std::vector<std::vector<GridPoint>> lists);

/// Simulates `count` random-initial-condition trajectories. With `store`, each
/// trajectory is written as it completes and valid files from an earlier
/// (interrupted) run are reused.
BurgersPool sample_burgers_pool(const BurgersPoolConfig& cfg, const std::optional<std::filesystem::path>& store = {});
BurgersPool load_burgers_pool(const std::filesystem::path& store);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetMeta {
    std::string experiment;  ///< "burgers" or "tsunami"
    nlohmann::json sensors;
    int window = 0;          ///< K (Burgers)
    double noise_std = 0.0;
    std::string boundary;
    GridPoint region_center{0, 0};
    int region_radius = -1;  ///< -1: full domain
    std::uint64_t seed = 0;
    Index count = 0;
    Index input_dim = 0;
    Index output_dim = 0;
    std::string created;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static DatasetMeta from_json(const nlohmann::json& j);
};

struct PointTag {
    std::uint64_t k0 = 0;  ///< start frame of the window
    std::uint64_t trajectory_id = 0;
};

struct Dataset {
    RowMatrixXd X;  ///< one sample per row
    RowMatrixXd Y;
    std::vector<PointTag> tags;
    DatasetMeta meta;

    Index size() const { return X.rows(); }
};

/// Position of one entry of a Burgers input vector.
struct BurgersXIndex {
    int sensor = 0;
    int variable = 0;  ///< 0 = u, 1 = v
    int offset = 0;    ///< k - k0, 0..K
    friend bool operator==(const BurgersXIndex&, const BurgersXIndex&) = default;
};

/// X layout: sensor-major, then time ascending, u before v at each time:
/// index = sensor * 2(K+1) + 2 offset + variable.
Index burgers_x_index(const BurgersXIndex& entry, int K);
BurgersXIndex burgers_x_decode(Index index, int n_sensors, int K);

struct BurgersDatasetConfig {
    SensorLayout sensors;
    std::vector<GridPoint> targets;  ///< Y = u at these points at k0 + K
    int K = 12;
    Index n_points = 1000;
    double noise_std = 0.065;
    std::uint64_t seed = 0;
};

Dataset build_burgers_dataset(const BurgersPool& pool, const BurgersDatasetConfig& cfg);

/// Every window k0 = 0..N_t-K of one trajectory, in time order.
Dataset burgers_trajectory_windows(const BurgersPool& pool, std::size_t trajectory, const SensorLayout& sensors,
                                   const std::vector<GridPoint>& targets, int K, double noise_std,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tsunami pools

struct TsunamiPoolConfig {
    TsunamiParams params;
    std::vector<double> amplitudes;  ///< M_h per trajectory
    int sensor_count = 81;
    double sensor_spacing = 16200.0;
    double facility_x = 749412.0;
    int record_stride = 5;  ///< frames kept every `record_stride` steps

    /// `count` equally spaced values in [lo, hi].
    static std::vector<double> amplitude_grid(int count, double lo = 0.2, double hi = 3.2);
    std::vector<Index> sensor_indices() const;
    /// Nearest grid index to facility_x (warns on stderr when it has to snap).
    Index facility_index() const;
    nlohmann::json to_json() const;
    std::string hash() const;
};

struct TsunamiTrajectory {
    std::uint64_t id = 0;
    double Mh = 0.0;
    Eigen::MatrixXd sensors;   ///< frames x 2|sensors|, (h, hu) per sensor
    Eigen::VectorXd facility;  ///< depth at the facility per frame
};

struct TsunamiPool {
    TsunamiPoolConfig config;
    std::vector<TsunamiTrajectory> trajectories;

    int frames() const;
    double frame_dt() const { return config.params.dt * config.record_stride; }
};

TsunamiPool sample_tsunami_pool(const TsunamiPoolConfig& cfg, const std::optional<std::filesystem::path>& store = {});

struct TsunamiDatasetConfig {
    double lead_seconds = 9000.0;
    Index n_points = 9100;
    double noise_std = 0.15;
    std::uint64_t seed = 0;
    std::vector<std::size_t> trajectories;  ///< subset of the pool; empty = all
};

Dataset build_tsunami_dataset(const TsunamiPool& pool, const TsunamiDatasetConfig& cfg);

/// All sample times of one trajectory with t + lead <= T, in time order.
Dataset tsunami_trajectory_windows(const TsunamiPool& pool, std::size_t trajectory, double lead_seconds,
                                   double noise_std, std::uint64_t seed);

/// Train/validation split by trajectory: the amplitude-sorted pool is cut into
/// round(n * fraction) contiguous blocks and one random member of each block
/// goes to validation.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_tsunami_pool(const TsunamiPool& pool,
                                                                                 double validation_fraction,
                                                                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset files: <dir>/meta.json, X.bin, Y.bin, tags.bin

void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);
/// Counts and shapes only; the binary blocks are not read.
DatasetMeta read_dataset_meta(const std::filesystem::path& dir);

}  // namespace limda
