#include "limda/burgers.hpp"

#include "limda/errors.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace limda {

Grid2D Grid2D::square(int n, double length, double dt) {
    if (n < 2) throw InvalidInput("Grid2D::square: need at least 2 points per side");
    Grid2D g;
    g.n1 = g.n2 = n;
    g.dx1 = g.dx2 = length / (n - 1);
    g.dt = dt;
    return g;
}

void Grid2D::validate() const {
    if (n1 < 3 || n2 < 3) throw InvalidInput("Grid2D: need at least 3 points per side");
    if (!(dx1 > 0) || !(dx2 > 0) || !(dt > 0)) throw InvalidInput("Grid2D: spacings and dt must be > 0");
}

BurgersField BurgersField::zeros(const Grid2D& grid, int k) {
    return {Eigen::MatrixXd::Zero(grid.n1, grid.n2), Eigen::MatrixXd::Zero(grid.n1, grid.n2), k};
}

std::string to_string(BoundaryKind kind) {
    switch (kind) {
        case BoundaryKind::Zero: return "zero";
        case BoundaryKind::Fabricated: return "fabricated";
        case BoundaryKind::Sinusoidal: return "sinusoidal";
        case BoundaryKind::ConstantTanh: return "constant_tanh";
    }
    return "unknown";
}

BoundaryKind boundary_kind_from_string(const std::string& name) {
    if (name == "zero") return BoundaryKind::Zero;
    if (name == "fabricated") return BoundaryKind::Fabricated;
    if (name == "sinusoidal") return BoundaryKind::Sinusoidal;
    if (name == "constant_tanh") return BoundaryKind::ConstantTanh;
    throw InvalidInput("unknown boundary kind: " + name);
}

BoundarySpec BoundarySpec::fabricated(BurgersField initial_field) {
    return {BoundaryKind::Fabricated, 1.0, std::make_shared<const BurgersField>(std::move(initial_field))};
}

std::pair<double, double> boundary_value(const BoundarySpec& bc, const Grid2D& grid, GridPoint p, double t) {
    if (!grid.contains(p) || !grid.on_boundary(p)) throw InvalidInput("boundary_value: point is not on the grid boundary");
    switch (bc.kind) {
        case BoundaryKind::Zero: return {0.0, 0.0};
        case BoundaryKind::Fabricated: {
            if (!bc.initial) throw InvalidInput("boundary_value: fabricated boundary needs the initial field");
            if (bc.initial->u.rows() != grid.n1 || bc.initial->u.cols() != grid.n2)
                throw InvalidInput("boundary_value: initial field does not match the grid");
            const double decay = std::exp(-t);
            return {bc.initial->u(p.i, p.j) * decay, bc.initial->v(p.i, p.j) * decay};
        }
        case BoundaryKind::Sinusoidal: {
            const bool horizontal_edge = p.j == 0 || p.j == grid.n2 - 1;
            const double z = horizontal_edge ? grid.x1(p.i) : grid.x2(p.j);
            const double value = bc.amplitude * std::sin(t * std::numbers::pi / 5.0) * std::sin(z);
            return {value, value};
        }
        case BoundaryKind::ConstantTanh: {
            const double value = bc.amplitude * std::tanh(t);
            return {value, value};
        }
    }
    throw InvalidInput("boundary_value: unknown boundary kind");
}

// ---------------------------------------------------------------------------

namespace {

inline Index interior_index(const Grid2D& g, int i, int j) { return Index(i - 1) * (g.n2 - 2) + (j - 1); }

}  // namespace

BurgersSolver::BurgersSolver(Grid2D grid, BurgersOptions options) : grid_(grid), options_(options) {
    grid_.validate();
    if (!(options_.kappa > 0)) throw InvalidInput("BurgersSolver: kappa must be > 0");

    // (I - kappa dt L) on interior points, Dirichlet neighbours moved to the right-hand side.
    const double r1 = options_.kappa * grid_.dt / (grid_.dx1 * grid_.dx1);
    const double r2 = options_.kappa * grid_.dt / (grid_.dx2 * grid_.dx2);
    const Index n = Index(grid_.n1 - 2) * (grid_.n2 - 2);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(5 * n));
    for (int i = 1; i < grid_.n1 - 1; ++i) {
        for (int j = 1; j < grid_.n2 - 1; ++j) {
            const Index row = interior_index(grid_, i, j);
            entries.emplace_back(row, row, 1.0 + 2.0 * r1 + 2.0 * r2);
            if (i > 1) entries.emplace_back(row, interior_index(grid_, i - 1, j), -r1);
            if (i < grid_.n1 - 2) entries.emplace_back(row, interior_index(grid_, i + 1, j), -r1);
            if (j > 1) entries.emplace_back(row, interior_index(grid_, i, j - 1), -r2);
            if (j < grid_.n2 - 2) entries.emplace_back(row, interior_index(grid_, i, j + 1), -r2);
        }
    }
    auto matrix = std::make_shared<SparseMatrix>(n, n);
    matrix->setFromTriplets(entries.begin(), entries.end());
    auto factor = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(*matrix);
    if (factor->info() != Eigen::Success) throw SolverFailure("BurgersSolver: diffusion factorization failed");
    matrix_ = std::move(matrix);
    factor_ = std::move(factor);
}

BurgersField BurgersSolver::boundary_frame(const BoundarySpec& bc, double t) const {
    BurgersField frame = BurgersField::zeros(grid_);
    auto set = [&](int i, int j) {
        const auto [bu, bv] = boundary_value(bc, grid_, {i, j}, t);
        frame.u(i, j) = bu;
        frame.v(i, j) = bv;
    };
    for (int i = 0; i < grid_.n1; ++i) {
        set(i, 0);
        set(i, grid_.n2 - 1);
    }
    for (int j = 1; j < grid_.n2 - 1; ++j) {
        set(0, j);
        set(grid_.n1 - 1, j);
    }
    return frame;
}

BurgersField BurgersSolver::step(const BurgersField& field, const BoundarySpec& bc) const {
    return step_with_boundary(field, boundary_frame(bc, (field.k + 1) * grid_.dt));
}

BurgersField BurgersSolver::step_with_boundary(const BurgersField& field, const BurgersField& boundary) const {
    const int n1 = grid_.n1;
    const int n2 = grid_.n2;
    if (field.u.rows() != n1 || field.u.cols() != n2 || field.v.rows() != n1 || field.v.cols() != n2)
        throw InvalidInput("BurgersSolver::step: field shape does not match the grid");
    if (boundary.u.rows() != n1 || boundary.u.cols() != n2 || boundary.v.rows() != n1 || boundary.v.cols() != n2)
        throw InvalidInput("BurgersSolver::step: boundary frame shape does not match the grid");

    const Eigen::MatrixXd& u = field.u;
    const Eigen::MatrixXd& v = field.v;
    const double dt = grid_.dt;
    const double c1 = dt / grid_.dx1;
    const double c2 = dt / grid_.dx2;
    const double r1 = options_.kappa * dt / (grid_.dx1 * grid_.dx1);
    const double r2 = options_.kappa * dt / (grid_.dx2 * grid_.dx2);

    const Index n = Index(n1 - 2) * (n2 - 2);
    Eigen::MatrixXd rhs(n, 2);
    for (int i = 1; i < n1 - 1; ++i) {
        for (int j = 1; j < n2 - 1; ++j) {
            double us = u(i, j);
            double vs = v(i, j);
            if (options_.advection) {
                const double a = u(i, j);
                const double b = v(i, j);
                // upwind by the sign of the local velocity; zero velocity takes the backward difference
                const double du1 = a >= 0.0 ? u(i, j) - u(i - 1, j) : u(i + 1, j) - u(i, j);
                const double dv1 = a >= 0.0 ? v(i, j) - v(i - 1, j) : v(i + 1, j) - v(i, j);
                const double du2 = b >= 0.0 ? u(i, j) - u(i, j - 1) : u(i, j + 1) - u(i, j);
                const double dv2 = b >= 0.0 ? v(i, j) - v(i, j - 1) : v(i, j + 1) - v(i, j);
                us -= c1 * a * du1 + c2 * b * du2;
                vs -= c1 * a * dv1 + c2 * b * dv2;
            }
            const Index row = interior_index(grid_, i, j);
            rhs(row, 0) = us;
            rhs(row, 1) = vs;
        }
    }
    // Dirichlet contributions at t_{k+1}
    for (int i = 1; i < n1 - 1; ++i) {
        rhs(interior_index(grid_, i, 1), 0) += r2 * boundary.u(i, 0);
        rhs(interior_index(grid_, i, 1), 1) += r2 * boundary.v(i, 0);
        rhs(interior_index(grid_, i, n2 - 2), 0) += r2 * boundary.u(i, n2 - 1);
        rhs(interior_index(grid_, i, n2 - 2), 1) += r2 * boundary.v(i, n2 - 1);
    }
    for (int j = 1; j < n2 - 1; ++j) {
        rhs(interior_index(grid_, 1, j), 0) += r1 * boundary.u(0, j);
        rhs(interior_index(grid_, 1, j), 1) += r1 * boundary.v(0, j);
        rhs(interior_index(grid_, n1 - 2, j), 0) += r1 * boundary.u(n1 - 1, j);
        rhs(interior_index(grid_, n1 - 2, j), 1) += r1 * boundary.v(n1 - 1, j);
    }

    const Eigen::MatrixXd sol = factor_->solve(rhs);
    const double residual = (*matrix_ * sol - rhs).norm();
    if (factor_->info() != Eigen::Success || residual > 1e-10 * rhs.norm()) {
        std::ostringstream os;
        os << "BurgersSolver: implicit diffusion solve failed at step " << field.k << " (residual " << residual << ")";
        throw SolverFailure(os.str());
    }

    BurgersField next;
    next.k = field.k + 1;
    next.u = boundary.u;
    next.v = boundary.v;
    for (int i = 1; i < n1 - 1; ++i) {
        for (int j = 1; j < n2 - 1; ++j) {
            const Index row = interior_index(grid_, i, j);
            next.u(i, j) = sol(row, 0);
            next.v(i, j) = sol(row, 1);
        }
    }
    if (!next.all_finite()) {
        std::ostringstream os;
        os << "BurgersSolver: non-finite state after step " << next.k;
        throw TrajectoryBlowup(os.str(), -1, next.k);
    }
    return next;
}

std::vector<BurgersField> BurgersSolver::run(const BurgersField& initial, const BoundarySpec& bc, int steps) const {
    std::vector<BurgersField> frames;
    frames.reserve(static_cast<std::size_t>(steps) + 1);
    frames.push_back(initial);
    for (int s = 0; s < steps; ++s) frames.push_back(step(frames.back(), bc));
    return frames;
}

BurgersField burgers_step(const BurgersField& field, const Grid2D& grid, double kappa, const BoundarySpec& bc) {
    return BurgersSolver(grid, {kappa, true}).step(field, bc);
}

// ---------------------------------------------------------------------------

double nominal_profile(double x1, double x2) {
    if (x1 < 0.0 || x1 > 2.0 || x2 < 0.0 || x2 > 2.0) return 0.0;
    const double a = x1 * (2.0 - x1);
    const double b = x2 * (2.0 - x2);
    return a * a * a * b * b * b;
}

FourierCoefficients FourierCoefficients::zeros(int modes) {
    return {Eigen::MatrixXd::Zero(modes, modes), Eigen::MatrixXd::Zero(modes, modes)};
}

FourierCoefficients random_fourier_coefficients(std::uint64_t seed, double stddev, int modes) {
    if (modes < 1) throw InvalidInput("random_fourier_coefficients: modes must be >= 1");
    if (stddev < 0) throw InvalidInput("random_fourier_coefficients: stddev must be >= 0");
    FourierCoefficients out = FourierCoefficients::zeros(modes);
    if (stddev == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    for (int l = 0; l < modes; ++l)
        for (int s = 0; s < modes; ++s) out.u(l, s) = normal(rng);
    for (int l = 0; l < modes; ++l)
        for (int s = 0; s < modes; ++s) out.v(l, s) = normal(rng);
    return out;
}

double perturbed_profile(double x1, double x2, const Eigen::MatrixXd& a) {
    double value = nominal_profile(x1, x2);
    for (Index l = 0; l < a.rows(); ++l) {
        const double sl = std::sin(double(l + 1) * x1 / 2.0);
        for (Index s = 0; s < a.cols(); ++s) value += a(l, s) * sl * std::sin(double(s + 1) * x2 / 2.0);
    }
    return value;
}

BurgersField burgers_series_initial(const Grid2D& grid, const FourierCoefficients& c) {
    BurgersField f = BurgersField::zeros(grid);
    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            f.u(i, j) = perturbed_profile(grid.x1(i), grid.x2(j), c.u);
            f.v(i, j) = perturbed_profile(grid.x1(i), grid.x2(j), c.v);
        }
    }
    return f;
}

BurgersField burgers_nominal_initial(const Grid2D& grid) {
    return burgers_series_initial(grid, FourierCoefficients::zeros(1));
}

BurgersField burgers_random_initial(const Grid2D& grid, std::uint64_t seed, double stddev, int modes) {
    return burgers_series_initial(grid, random_fourier_coefficients(seed, stddev, modes));
}

// ---------------------------------------------------------------------------

Grid2D region_grid(const Grid2D& grid, GridPoint center, int radius) {
    if (radius < 0) throw InvalidInput("restrict_to_region: radius must be >= 0");
    if (center.i - radius < 0 || center.j - radius < 0 || center.i + radius >= grid.n1 || center.j + radius >= grid.n2) {
        std::ostringstream os;
        os << "restrict_to_region: square of radius " << radius << " around (" << center.i << "," << center.j
           << ") exceeds the " << grid.n1 << "x" << grid.n2 << " grid";
        throw OutOfBounds(os.str());
    }
    Grid2D sub = grid;
    sub.n1 = sub.n2 = 2 * radius + 1;
    sub.i0 = grid.i0 + center.i - radius;
    sub.j0 = grid.j0 + center.j - radius;
    return sub;
}

std::pair<Grid2D, BurgersField> restrict_to_region(const Grid2D& grid, const BurgersField& field, GridPoint center,
                                                   int radius) {
    Grid2D sub = region_grid(grid, center, radius);
    const int side = 2 * radius + 1;
    BurgersField out;
    out.k = field.k;
    out.u = field.u.block(center.i - radius, center.j - radius, side, side);
    out.v = field.v.block(center.i - radius, center.j - radius, side, side);
    return {sub, std::move(out)};
}

Index flat_index(const Grid2D& grid, int variable, GridPoint p) {
    if (variable < 0 || variable > 1 || !grid.contains(p)) throw InvalidInput("flat_index: out of range");
    return Index(variable) * grid.size() + Index(p.i) * grid.n2 + p.j;
}

Eigen::VectorXd flatten(const BurgersField& field) {
    const Index n1 = field.u.rows();
    const Index n2 = field.u.cols();
    Eigen::VectorXd state(2 * n1 * n2);
    for (Index i = 0; i < n1; ++i) {
        for (Index j = 0; j < n2; ++j) {
            state(i * n2 + j) = field.u(i, j);
            state(n1 * n2 + i * n2 + j) = field.v(i, j);
        }
    }
    return state;
}

BurgersField unflatten(const Grid2D& grid, const Eigen::VectorXd& state, int k) {
    if (state.size() != 2 * grid.size()) throw InvalidInput("unflatten: state length does not match grid");
    BurgersField f = BurgersField::zeros(grid, k);
    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            f.u(i, j) = state(Index(i) * grid.n2 + j);
            f.v(i, j) = state(grid.size() + Index(i) * grid.n2 + j);
        }
    }
    return f;
}

}  // namespace limda
