#pragma once

// 1D shallow-water equations over a sloping seabed,
//
//   h_t + (hu)_x = 0
//   (hu)_t + (u^2 h + g h^2 / 2)_x = -g h B'(x),   B(x) = bed_rise * x / L,
//
// solved with the first-order Lax-Friedrichs scheme. The shoreward boundary
// (x = 0) is driven by a slow sinusoidal depth signal of amplitude M_h.

#include "limda/types.hpp"

#include <vector>

namespace limda {

enum class SweBoundary {
    Physical,  ///< time-dependent inflow at x = 0, wall at x = L
    Frozen,    ///< boundary cells held at their t = 0 values
    Periodic,  ///< wrap-around neighbours, no boundary cells (test hook)
};

struct TsunamiParams {
    double length = 1.296e6;  ///< L [m]
    int nx = 4001;            ///< grid points on [0, L]
    double dt = 10.0;         ///< [s]
    double duration = 60000.0;
    double H0 = 61.5;         ///< undisturbed depth [m]
    double Mh = 3.0;          ///< forcing amplitude [m]
    double g = 9.81;
    double bed_rise = 40.0;   ///< B(L) - B(0) [m]
    double base_depth = 64.5; ///< mean of the inflow depth signal [m]
    SweBoundary boundary = SweBoundary::Physical;
    /// swe_advance splits dt into equal substeps once the CFL number of a full
    /// step would exceed this value; 0 disables splitting.
    double cfl_limit = 0.9;

    double dx() const { return length / (nx - 1); }
    int steps() const;
    double bed_slope() const { return bed_rise / length; }
    void validate() const;
};

struct ShallowWaterField {
    Eigen::VectorXd h;   ///< depth [m]
    Eigen::VectorXd hu;  ///< momentum [m^2/s]
    double t = 0.0;
};

/// h(t, 0) = base_depth + M_h sin(pi (4t / 86400 - 1/2))
double inflow_depth(const TsunamiParams& p, double t);
/// u(t, 0) = sqrt(g) (sqrt(h(t, 0)) - sqrt(H0))
double inflow_velocity(const TsunamiParams& p, double t);

/// h = H0, u = 0 everywhere, with boundary cells set for t = 0.
ShallowWaterField swe_initial(const TsunamiParams& p);

/// max (|u| + sqrt(g h)) dt / dx
double cfl_number(const ShallowWaterField& field, const TsunamiParams& p);

/// One Lax-Friedrichs step. Throws DryState if any depth is <= 0 and
/// StabilityError if the CFL number is >= 1.
ShallowWaterField swe_step(const ShallowWaterField& field, const TsunamiParams& p);

/// Advances by dt using ceil(CFL / cfl_limit) equal Lax-Friedrichs substeps.
/// The initial state is not at rest over the sloping bed, so the interior flow
/// keeps accelerating at -g B' and a single 10 s step stops satisfying CFL < 1
/// late in the run.
ShallowWaterField swe_advance(const ShallowWaterField& field, const TsunamiParams& p, int* substeps = nullptr);

/// Recorded columns of a run: depth and momentum at `probes` and depth at
/// `depth_probes`, sampled every `stride` steps (frame 0 is t = 0).
struct SweRecording {
    std::vector<Index> probes;
    std::vector<Index> depth_probes;
    int stride = 1;
    Eigen::MatrixXd probe_series;  ///< frames x 2|probes|, columns (h, hu) per probe
    Eigen::MatrixXd depth_series;  ///< frames x |depth_probes|
    double max_cfl = 0.0;  ///< largest CFL number of a full dt step
    int max_substeps = 1;
};

SweRecording run_shallow_water(const TsunamiParams& p, const std::vector<Index>& probes,
                               const std::vector<Index>& depth_probes, int stride = 1);

}  // namespace limda
