#pragma once

#include "limda/burgers.hpp"
#include "limda/obsgram.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace limda {

/// Point sensors reading (u, v); locations are in full-grid coordinates.
struct SensorLayout {
    std::vector<GridPoint> locations;

    Index size() const { return static_cast<Index>(locations.size()); }
    Index output_dim() const { return 2 * size(); }
    /// Unique locations, at least one, all inside `grid`.
    void validate(const Grid2D& grid) const;
    SensorLayout translated(GridPoint offset) const;

    /// (24,29), (29,27), (29,29), (23,27)
    static SensorLayout four_sensors();
    /// The four above plus (21,23), (26,21), (22,26), (27,22).
    static SensorLayout eight_sensors();
};

/// Burgers dynamics on `solver`'s grid as a DiscreteSystem: the state is
/// flatten(field), observations are (u, v) at each sensor (sensor-major) and
/// the target is u at `target`. Step k of the system advances field.k = first_step + k.
DiscreteSystem make_burgers_system(std::shared_ptr<const BurgersSolver> solver, BoundarySpec bc,
                                   const SensorLayout& sensors, GridPoint target, int first_step = 0);

/// Sorted flat indices of u and v at every point of the (2R+1)^2 square around `center`.
std::vector<Index> region_index_set(const Grid2D& grid, GridPoint center, int radius);

/// rho for u(center) at time K with the index set restricted to the radius-R square.
double rho_for_radius(std::shared_ptr<const BurgersSolver> solver, const BoundarySpec& bc, GridPoint center, int radius,
                      const SensorLayout& sensors, const BurgersField& nominal_initial, ObservabilityConfig cfg);

struct RadiusSweep {
    GridPoint center;
    std::vector<int> radii;
    std::vector<double> rho_values;
    std::optional<int> stabilized_radius;
    double threshold = 1e-4;
};

/// Smallest radii[r] with |rho(R') - rho(R)| < threshold for every larger sampled R'.
/// The largest radius is never declared on its own: it has nothing to compare against.
std::optional<int> stabilized_radius(const std::vector<int>& radii, const std::vector<double>& rho, double threshold);

/// Generic sweep: index_set_for_radius(R) must be nested in R. The perturbation
/// runs are done once for the largest set and every smaller set reuses its columns.
RadiusSweep find_effective_region(const DiscreteSystem& sys, const State& nominal_initial, ObservabilityConfig cfg,
                                  const std::function<std::vector<Index>(int)>& index_set_for_radius, int r_min,
                                  int r_max, double threshold = 1e-4);

/// Burgers sweep over R = 1..r_max around `center`.
RadiusSweep find_effective_region(std::shared_ptr<const BurgersSolver> solver, const BoundarySpec& bc,
                                  GridPoint center, const SensorLayout& sensors, const BurgersField& nominal_initial,
                                  const ObservabilityConfig& cfg, int r_max = 12, double threshold = 1e-4);

/// "radius,rho" CSV with a header row.
void write_sweep_csv(const std::filesystem::path& path, const RadiusSweep& sweep);

}  // namespace limda
