#pragma once

// 2D viscous Burgers equation on [0, 2pi]^2
//
//   U_t + U U_x1 + V U_x2 = kappa (U_x1x1 + U_x2x2)
//   V_t + U V_x1 + V V_x2 = kappa (V_x1x1 + V_x2x2)
//
// advanced by Lie splitting: explicit first-order upwind advection followed by
// an implicit central-difference diffusion solve with Dirichlet boundary data.

#include "limda/types.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace limda {

/// Uniform grid; point (i, j) sits at ((i0 + i) dx1, (j0 + j) dx2) so that a
/// sub-grid keeps the coordinates of its parent.
struct Grid2D {
    int n1 = 50;
    int n2 = 50;
    double dx1 = 2.0 * std::numbers::pi / 49.0;
    double dx2 = 2.0 * std::numbers::pi / 49.0;
    double dt = 0.05;
    int i0 = 0;
    int j0 = 0;

    /// n x n points spanning [0, length]^2.
    static Grid2D square(int n = 50, double length = 2.0 * std::numbers::pi, double dt = 0.05);

    double x1(int i) const { return (i0 + i) * dx1; }
    double x2(int j) const { return (j0 + j) * dx2; }
    bool contains(GridPoint p) const { return p.i >= 0 && p.i < n1 && p.j >= 0 && p.j < n2; }
    bool on_boundary(GridPoint p) const { return p.i == 0 || p.j == 0 || p.i == n1 - 1 || p.j == n2 - 1; }
    /// Parent-grid coordinates of a local point, and back.
    GridPoint to_global(GridPoint p) const { return {p.i + i0, p.j + j0}; }
    GridPoint to_local(GridPoint p) const { return {p.i - i0, p.j - j0}; }
    Index size() const { return Index(n1) * n2; }

    void validate() const;
};

struct BurgersField {
    Eigen::MatrixXd u;  ///< u(i, j)
    Eigen::MatrixXd v;
    int k = 0;          ///< time index; t = k dt

    static BurgersField zeros(const Grid2D& grid, int k = 0);
    bool all_finite() const { return u.allFinite() && v.allFinite(); }
};

enum class BoundaryKind { Zero, Fabricated, Sinusoidal, ConstantTanh };

std::string to_string(BoundaryKind kind);
BoundaryKind boundary_kind_from_string(const std::string& name);

/// Dirichlet data on the grid boundary.
///  - Zero:          U = V = 0
///  - Fabricated:    U(x, t) = U(x, 0) e^{-t}  (same for V); needs the initial field
///  - Sinusoidal:    U = V = sin(t pi / 5) sin(z), z = x1 on the x2 = const edges, x2 on the x1 = const edges
///  - ConstantTanh:  U = V = c tanh(t)
struct BoundarySpec {
    BoundaryKind kind = BoundaryKind::Zero;
    double amplitude = 0.0;
    std::shared_ptr<const BurgersField> initial;

    static BoundarySpec zero() { return {}; }
    static BoundarySpec fabricated(BurgersField initial_field);
    static BoundarySpec sinusoidal() { return {BoundaryKind::Sinusoidal, 1.0, nullptr}; }
    static BoundarySpec constant_tanh(double c) { return {BoundaryKind::ConstantTanh, c, nullptr}; }
};

/// (U, V) at a boundary point of `grid` at time t.
std::pair<double, double> boundary_value(const BoundarySpec& bc, const Grid2D& grid, GridPoint point, double t);

struct BurgersOptions {
    double kappa = 0.14;
    bool advection = true;  ///< false leaves pure implicit diffusion (test hook)
};

/// Owns the diffusion factorization for one grid; immutable and shareable after construction.
class BurgersSolver {
public:
    explicit BurgersSolver(Grid2D grid, BurgersOptions options = {});

    const Grid2D& grid() const { return grid_; }
    const BurgersOptions& options() const { return options_; }

    /// One dt advance with boundary data from `bc` at t_{k+1}.
    BurgersField step(const BurgersField& field, const BoundarySpec& bc) const;

    /// One dt advance with boundary rows copied from `boundary` (its interior is ignored).
    BurgersField step_with_boundary(const BurgersField& field, const BurgersField& boundary) const;

    /// Field whose boundary entries hold bc at time t (interior zero).
    BurgersField boundary_frame(const BoundarySpec& bc, double t) const;

    /// Frames k = 0..steps.
    std::vector<BurgersField> run(const BurgersField& initial, const BoundarySpec& bc, int steps) const;

private:
    using SparseMatrix = Eigen::SparseMatrix<double>;

    Grid2D grid_;
    BurgersOptions options_;
    std::shared_ptr<const SparseMatrix> matrix_;
    std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>> factor_;
};

/// Convenience wrapper that builds a solver on every call.
BurgersField burgers_step(const BurgersField& field, const Grid2D& grid, double kappa, const BoundarySpec& bc);

// ---------------------------------------------------------------------------
// Initial conditions

/// g(x1, x2) = x1^3 (2 - x1)^3 x2^3 (2 - x2)^3 on [0, 2]^2, zero elsewhere.
double nominal_profile(double x1, double x2);

/// Sine-series coefficients a(l-1, s-1), l, s = 1..N_F, for U and V.
struct FourierCoefficients {
    Eigen::MatrixXd u;
    Eigen::MatrixXd v;

    static FourierCoefficients zeros(int modes = 3);
};

/// I.i.d. N(0, stddev^2) coefficients, deterministic in `seed`. stddev = 0 gives zeros.
FourierCoefficients random_fourier_coefficients(std::uint64_t seed, double stddev = 0.1, int modes = 3);

/// g(x1, x2) + sum_{l,s} a(l-1, s-1) sin(l x1 / 2) sin(s x2 / 2)
double perturbed_profile(double x1, double x2, const Eigen::MatrixXd& coefficients);

BurgersField burgers_nominal_initial(const Grid2D& grid);
BurgersField burgers_series_initial(const Grid2D& grid, const FourierCoefficients& coefficients);
BurgersField burgers_random_initial(const Grid2D& grid, std::uint64_t seed, double stddev = 0.1, int modes = 3);

// ---------------------------------------------------------------------------
// Sub-grids and flattening

/// (2R+1)^2 square centred on `center` (local coordinates of `grid`).
std::pair<Grid2D, BurgersField> restrict_to_region(const Grid2D& grid, const BurgersField& field, GridPoint center,
                                                   int radius);
Grid2D region_grid(const Grid2D& grid, GridPoint center, int radius);

/// State vector layout: all u values (row-major over (i, j)) followed by all v values.
Index flat_index(const Grid2D& grid, int variable, GridPoint p);
Eigen::VectorXd flatten(const BurgersField& field);
BurgersField unflatten(const Grid2D& grid, const Eigen::VectorXd& state, int k = 0);

}  // namespace limda
