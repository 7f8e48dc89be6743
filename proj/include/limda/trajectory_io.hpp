#pragma once

// Trajectory dump format:
//
//   line 1: "LIMDA-TRAJECTORY 1"
//   line 2: JSON header (grid/parameter description plus "frames",
//           "values_per_frame" and "crc64" of the payload)
//   payload: frames x values_per_frame little-endian float64, row-major
//            (one frame after another)

#include "limda/burgers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace limda {

struct TrajectoryFile {
    nlohmann::json header;
    Eigen::MatrixXd frames;  ///< one row per frame
};

void write_trajectory(const std::filesystem::path& path, nlohmann::json header, const Eigen::MatrixXd& frames);
TrajectoryFile read_trajectory(const std::filesystem::path& path);
/// Header only; the payload is not read.
nlohmann::json read_trajectory_header(const std::filesystem::path& path);

nlohmann::json grid_to_json(const Grid2D& grid);
Grid2D grid_from_json(const nlohmann::json& j);

/// Full-field Burgers dump: each frame is flatten(field).
void write_burgers_trajectory(const std::filesystem::path& path, const Grid2D& grid, const BurgersOptions& options,
                              const BoundarySpec& bc, const std::vector<BurgersField>& frames);
std::vector<BurgersField> read_burgers_trajectory(const std::filesystem::path& path, Grid2D* grid = nullptr);

}  // namespace limda
