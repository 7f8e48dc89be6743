#include "limda/effective_region.hpp"
#include "limda/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace limda;

namespace {

std::shared_ptr<const BurgersSolver> default_solver() {
    static const auto solver = std::make_shared<const BurgersSolver>(Grid2D::square());
    return solver;
}

DiscreteSystem direct_observation(Index n) {
    DiscreteSystem s;
    s.n = n;
    s.m = n;
    s.step = [](const State& x, int) { return x; };
    s.observe = [](const State& x) { return Eigen::VectorXd(x); };
    s.target = [](const State& x) { return x(0); };
    return s;
}

}  // namespace

TEST_SUITE("effective_region") {

TEST_CASE("sensor layouts") {
    const SensorLayout four = SensorLayout::four_sensors();
    REQUIRE(four.size() == 4);
    CHECK(four.locations[0] == GridPoint{24, 29});
    CHECK(four.locations[3] == GridPoint{23, 27});
    CHECK(four.output_dim() == 8);
    const SensorLayout eight = SensorLayout::eight_sensors();
    REQUIRE(eight.size() == 8);
    for (int s = 0; s < 4; ++s) CHECK(eight.locations[static_cast<std::size_t>(s)] == four.locations[static_cast<std::size_t>(s)]);
    eight.validate(Grid2D::square());
    CHECK(four.translated({-10, -10}).locations[1] == GridPoint{19, 17});

    CHECK_THROWS_AS(SensorLayout{}.validate(Grid2D::square()), InvalidInput);
    CHECK_THROWS_AS((SensorLayout{{{1, 1}, {1, 1}}}.validate(Grid2D::square())), InvalidInput);
    CHECK_THROWS_AS((SensorLayout{{{1, 50}}}.validate(Grid2D::square())), InvalidInput);
}

TEST_CASE("region index set has 2(2R+1)^2 entries and is nested") {
    const Grid2D grid = Grid2D::square();
    std::vector<Index> prev;
    for (int R = 0; R <= 12; ++R) {
        const std::vector<Index> idx = region_index_set(grid, {25, 25}, R);
        CHECK(idx.size() == static_cast<std::size_t>(2 * (2 * R + 1) * (2 * R + 1)));
        CHECK(std::is_sorted(idx.begin(), idx.end()));
        CHECK(std::includes(idx.begin(), idx.end(), prev.begin(), prev.end()));
        prev = idx;
    }
    const std::vector<Index> zero = region_index_set(grid, {25, 25}, 0);
    CHECK(zero == std::vector<Index>{flat_index(grid, 0, {25, 25}), flat_index(grid, 1, {25, 25})});
    CHECK_THROWS_AS(region_index_set(grid, {25, 25}, 25), OutOfBounds);
}

TEST_CASE("stabilization rule") {
    const std::vector<int> radii{1, 2, 3, 4, 5};
    CHECK(stabilized_radius(radii, {0.1, 0.1, 0.1, 0.1, 0.1}, 1e-4) == 1);
    CHECK(stabilized_radius(radii, {0.01, 0.02, 0.03, 0.03, 0.03}, 1e-4) == 3);
    // a late jump resets the plateau
    CHECK(stabilized_radius(radii, {0.03, 0.03, 0.03, 0.031, 0.031}, 1e-4) == 4);
    CHECK(!stabilized_radius(radii, {0.01, 0.02, 0.03, 0.04, 0.05}, 1e-4).has_value());
    CHECK(!stabilized_radius(radii, {0.1, 0.1, 0.1, 0.1, 0.1}, 0.0).has_value());
    CHECK(!stabilized_radius({3}, {0.1}, 1e-4).has_value());
    CHECK_THROWS_AS(stabilized_radius(radii, {0.1}, 1e-4), InvalidInput);
}

TEST_CASE("directly observed system stabilizes at the smallest radius") {
    const DiscreteSystem sys = direct_observation(6);
    ObservabilityConfig cfg;
    cfg.K = 3;
    auto sets = [](int R) {
        std::vector<Index> s;
        for (Index i = 0; i <= std::min<Index>(R, 5); ++i) s.push_back(i);
        return s;
    };
    const RadiusSweep sweep = find_effective_region(sys, Eigen::VectorXd::Zero(6), cfg, sets, 1, 5);
    REQUIRE(sweep.rho_values.size() == 5);
    for (double r : sweep.rho_values) CHECK(r == doctest::Approx(0.065 / 2.0).epsilon(1e-6));
    CHECK(sweep.stabilized_radius == 1);

    const RadiusSweep never = find_effective_region(sys, Eigen::VectorXd::Zero(6), cfg, sets, 1, 5, 0.0);
    CHECK(!never.stabilized_radius.has_value());

    auto not_nested = [](int R) { return std::vector<Index>{static_cast<Index>(R)}; };
    CHECK_THROWS_AS(find_effective_region(sys, Eigen::VectorXd::Zero(6), cfg, not_nested, 1, 3), InvalidInput);
}

TEST_CASE("property: enlarging a full-rank index set never lowers rho") {
    // Schur complement: W_S G_SS^-1 W_S^T <= W G^-1 W^T for nested S
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 8;
        Eigen::MatrixXd M(n + 3, n);
        for (Index i = 0; i < M.rows(); ++i)
            for (Index j = 0; j < n; ++j) M(i, j) = n01(rng);
        const Eigen::MatrixXd G = M.transpose() * M;
        Eigen::RowVectorXd W(n);
        for (Index j = 0; j < n; ++j) W(j) = n01(rng);
        double prev = 0.0;
        for (Index size = 1; size <= n; ++size) {
            const double r = rho_oracle<double>(G.topLeftCorner(size, size), W.head(size), 0.065);
            CHECK(r >= prev * (1 - 1e-10));
            prev = r;
        }
    }
}

TEST_CASE("Burgers: centre-only index set gives a smaller rho than R = 7") {
    const Grid2D grid = Grid2D::square();
    const BurgersField ic = burgers_nominal_initial(grid);
    const ObservabilityConfig cfg;
    const double r0 = rho_for_radius(default_solver(), BoundarySpec::zero(), {25, 25}, 0, SensorLayout::four_sensors(), ic, cfg);
    const double r7 = rho_for_radius(default_solver(), BoundarySpec::zero(), {25, 25}, 7, SensorLayout::four_sensors(), ic, cfg);
    MESSAGE("rho(0) = " << r0 << ", rho(7) = " << r7);
    CHECK(std::isfinite(r0));
    CHECK(r0 > 0.0);
    CHECK(r0 <= r7);
}

TEST_CASE("Burgers: sensors far outside the square saturate rho at delta |W(K)|") {
    const Grid2D grid = Grid2D::square();
    const BurgersField ic = burgers_nominal_initial(grid);
    const SensorLayout far{{{3, 3}, {3, 46}, {46, 3}, {46, 46}}};
    ObservabilityConfig cfg;
    cfg.K = 2;
    const auto solver = default_solver();
    const DiscreteSystem sys = make_burgers_system(solver, BoundarySpec::zero(), far, {25, 25});
    cfg.index_set = region_index_set(grid, {25, 25}, 2);
    const EmpiricalGramian eg = empirical_gramian(sys, flatten(ic), cfg);
    const double rho = rho_from_empirical(eg, cfg);
    CHECK(rho == doctest::Approx(cfg.delta * eg.W_K.norm()).epsilon(1e-6));
    CHECK(rho_for_radius(solver, BoundarySpec::zero(), {25, 25}, 2, far, ic, cfg) == rho);
}

TEST_CASE("Burgers sweep: nested dimensions and bitwise reproducibility") {
    const Grid2D grid = Grid2D::square();
    const BurgersField ic = burgers_nominal_initial(grid);
    ObservabilityConfig cfg;
    cfg.K = 6;
    const RadiusSweep a =
        find_effective_region(default_solver(), BoundarySpec::zero(), {25, 25}, SensorLayout::four_sensors(), ic, cfg, 4);
    const RadiusSweep b = find_effective_region(std::make_shared<const BurgersSolver>(grid), BoundarySpec::zero(), {25, 25},
                                                SensorLayout::four_sensors(), ic, cfg, 4);
    CHECK(a.radii == std::vector<int>{1, 2, 3, 4});
    CHECK(a.rho_values == b.rho_values);
    for (double r : a.rho_values) CHECK((std::isfinite(r) && r >= 0.0));
    // sliced sweep agrees with a direct evaluation at each radius
    for (std::size_t r = 0; r < a.radii.size(); ++r) {
        const double direct =
            rho_for_radius(default_solver(), BoundarySpec::zero(), {25, 25}, a.radii[r], SensorLayout::four_sensors(), ic, cfg);
        CHECK(a.rho_values[r] == doctest::Approx(direct).epsilon(1e-10));
    }
    if (a.stabilized_radius) {
        const auto it = std::find(a.radii.begin(), a.radii.end(), *a.stabilized_radius);
        CHECK(std::abs(a.rho_values[static_cast<std::size_t>(it - a.radii.begin())] - a.rho_values.back()) < a.threshold);
    }

    const auto dir = std::filesystem::temp_directory_path() / "limda_sweep_test";
    std::filesystem::create_directories(dir);
    write_sweep_csv(dir / "sweep.csv", a);
    std::ifstream in(dir / "sweep.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("radius,rho", 0) == 0);
    int rows = 0;
    for (std::string line; std::getline(in, line);) rows += !line.empty();
    CHECK(rows == 4);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
