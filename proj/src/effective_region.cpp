#include "limda/effective_region.hpp"

#include "limda/errors.hpp"
#include "limda/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace limda {

void SensorLayout::validate(const Grid2D& grid) const {
    if (locations.empty()) throw InvalidInput("SensorLayout: at least one sensor is required");
    std::set<GridPoint> seen;
    for (const GridPoint& p : locations) {
        if (!grid.contains(grid.to_local(p))) {
            std::ostringstream os;
            os << "SensorLayout: sensor (" << p.i << "," << p.j << ") is outside the grid";
            throw InvalidInput(os.str());
        }
        if (!seen.insert(p).second) throw InvalidInput("SensorLayout: duplicate sensor location");
    }
}

SensorLayout SensorLayout::translated(GridPoint offset) const {
    SensorLayout out;
    for (const GridPoint& p : locations) out.locations.push_back(p + offset);
    return out;
}

SensorLayout SensorLayout::four_sensors() { return {{{24, 29}, {29, 27}, {29, 29}, {23, 27}}}; }

SensorLayout SensorLayout::eight_sensors() {
    return {{{24, 29}, {29, 27}, {29, 29}, {23, 27}, {21, 23}, {26, 21}, {22, 26}, {27, 22}}};
}

DiscreteSystem make_burgers_system(std::shared_ptr<const BurgersSolver> solver, BoundarySpec bc,
                                   const SensorLayout& sensors, GridPoint target, int first_step) {
    const Grid2D grid = solver->grid();
    sensors.validate(grid);
    const GridPoint target_local = grid.to_local(target);
    if (!grid.contains(target_local)) throw InvalidInput("make_burgers_system: target outside the grid");

    std::vector<Index> u_obs;
    std::vector<Index> v_obs;
    for (const GridPoint& p : sensors.locations) {
        u_obs.push_back(flat_index(grid, 0, grid.to_local(p)));
        v_obs.push_back(flat_index(grid, 1, grid.to_local(p)));
    }
    const Index target_index = flat_index(grid, 0, target_local);

    DiscreteSystem sys;
    sys.n = 2 * grid.size();
    sys.m = sensors.output_dim();
    sys.step = [solver, bc = std::move(bc), grid, first_step](const State& u, int k) {
        return flatten(solver->step(unflatten(grid, u, first_step + k), bc));
    };
    sys.observe = [u_obs, v_obs](const State& u) {
        Eigen::VectorXd y(2 * static_cast<Index>(u_obs.size()));
        for (std::size_t s = 0; s < u_obs.size(); ++s) {
            y(2 * Index(s)) = u(u_obs[s]);
            y(2 * Index(s) + 1) = u(v_obs[s]);
        }
        return y;
    };
    sys.target = [target_index](const State& u) { return u(target_index); };
    return sys;
}

std::vector<Index> region_index_set(const Grid2D& grid, GridPoint center, int radius) {
    const GridPoint c = grid.to_local(center);
    region_grid(grid, c, radius);  // bounds check
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(2 * (2 * radius + 1) * (2 * radius + 1)));
    for (int var = 0; var < 2; ++var)
        for (int i = c.i - radius; i <= c.i + radius; ++i)
            for (int j = c.j - radius; j <= c.j + radius; ++j) out.push_back(flat_index(grid, var, {i, j}));
    std::sort(out.begin(), out.end());
    return out;
}

double rho_for_radius(std::shared_ptr<const BurgersSolver> solver, const BoundarySpec& bc, GridPoint center, int radius,
                      const SensorLayout& sensors, const BurgersField& nominal_initial, ObservabilityConfig cfg) {
    const Grid2D grid = solver->grid();
    cfg.index_set = region_index_set(grid, center, radius);
    const DiscreteSystem sys = make_burgers_system(solver, bc, sensors, center, nominal_initial.k);
    return rho_from_empirical(empirical_gramian(sys, flatten(nominal_initial), cfg), cfg);
}

std::optional<int> stabilized_radius(const std::vector<int>& radii, const std::vector<double>& rho, double threshold) {
    if (radii.size() != rho.size()) throw InvalidInput("stabilized_radius: size mismatch");
    for (std::size_t r = 0; r + 1 < radii.size(); ++r) {
        bool stable = true;
        for (std::size_t s = r + 1; s < radii.size() && stable; ++s) stable = std::abs(rho[s] - rho[r]) < threshold;
        if (stable) return radii[r];
    }
    return std::nullopt;
}

RadiusSweep find_effective_region(const DiscreteSystem& sys, const State& nominal_initial, ObservabilityConfig cfg,
                                  const std::function<std::vector<Index>(int)>& index_set_for_radius, int r_min,
                                  int r_max, double threshold) {
    if (r_min < 0 || r_max < r_min) throw InvalidInput("find_effective_region: need 0 <= r_min <= r_max");
    if (threshold < 0) throw InvalidInput("find_effective_region: threshold must be >= 0");
    cfg.index_set = index_set_for_radius(r_max);
    const EmpiricalSensitivities all = empirical_sensitivities(sys, nominal_initial, cfg);

    RadiusSweep sweep;
    sweep.threshold = threshold;
    for (int R = r_min; R <= r_max; ++R) {
        std::vector<Index> subset = index_set_for_radius(R);
        std::sort(subset.begin(), subset.end());
        std::vector<Index> positions;
        positions.reserve(subset.size());
        for (Index idx : subset) {
            auto it = std::lower_bound(all.index_set.begin(), all.index_set.end(), idx);
            if (it == all.index_set.end() || *it != idx)
                throw InvalidInput("find_effective_region: index sets are not nested");
            positions.push_back(static_cast<Index>(it - all.index_set.begin()));
        }
        const EmpiricalGramian eg = gramian_from_sensitivities(select_indices(all, positions), cfg.delta_K);
        sweep.radii.push_back(R);
        sweep.rho_values.push_back(rho_from_empirical(eg, cfg));
    }
    sweep.stabilized_radius = stabilized_radius(sweep.radii, sweep.rho_values, threshold);
    return sweep;
}

RadiusSweep find_effective_region(std::shared_ptr<const BurgersSolver> solver, const BoundarySpec& bc,
                                  GridPoint center, const SensorLayout& sensors, const BurgersField& nominal_initial,
                                  const ObservabilityConfig& cfg, int r_max, double threshold) {
    const Grid2D grid = solver->grid();
    region_grid(grid, grid.to_local(center), r_max);  // bounds check before any simulation
    const DiscreteSystem sys = make_burgers_system(solver, bc, sensors, center, nominal_initial.k);
    RadiusSweep sweep = find_effective_region(
        sys, flatten(nominal_initial), cfg, [&](int R) { return region_index_set(grid, center, R); }, 1, r_max,
        threshold);
    sweep.center = center;
    return sweep;
}

void write_sweep_csv(const std::filesystem::path& path, const RadiusSweep& sweep) {
    std::ostringstream os;
    os << "radius,rho\n" << std::setprecision(17);
    for (std::size_t r = 0; r < sweep.radii.size(); ++r) os << sweep.radii[r] << ',' << sweep.rho_values[r] << '\n';
    io::atomic_write(path, os.str());
}

}  // namespace limda
