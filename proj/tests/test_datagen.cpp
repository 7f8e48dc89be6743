#include "limda/datagen.hpp"
#include "limda/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace limda;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

BurgersPoolConfig small_pool_config(int count = 3, std::uint64_t seed = 9) {
    BurgersPoolConfig cfg;
    cfg.steps = 20;
    cfg.count = count;
    cfg.seed = seed;
    cfg.probes = merge_points({SensorLayout::four_sensors().locations, target_block({25, 25})});
    return cfg;
}

const BurgersPool& small_pool() {
    static const BurgersPool pool = sample_burgers_pool(small_pool_config());
    return pool;
}

BurgersDatasetConfig dataset_config(double noise, std::uint64_t seed = 3, Index n = 200) {
    BurgersDatasetConfig cfg;
    cfg.sensors = SensorLayout::four_sensors();
    cfg.targets = target_block({25, 25});
    cfg.K = 12;
    cfg.n_points = n;
    cfg.noise_std = noise;
    cfg.seed = seed;
    return cfg;
}

TsunamiPoolConfig tsunami_config(std::vector<double> amplitudes) {
    TsunamiPoolConfig cfg;
    cfg.amplitudes = std::move(amplitudes);
    return cfg;
}

const TsunamiPool& nominal_tsunami_pool() {
    static const TsunamiPool pool = sample_tsunami_pool(tsunami_config({3.0}));
    return pool;
}

double residual_std(const RowMatrixXd& noisy, const RowMatrixXd& clean) {
    const Eigen::ArrayXXd d = (noisy - clean).array();
    const double mean = d.mean();
    return std::sqrt((d - mean).square().mean());
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("X index map is a bijection") {
    for (int sensors : {4, 8}) {
        for (int K : {2, 5, 12}) {
            const Index total = 2 * sensors * (K + 1);
            std::set<Index> seen;
            for (int s = 0; s < sensors; ++s)
                for (int off = 0; off <= K; ++off)
                    for (int var = 0; var < 2; ++var) {
                        const BurgersXIndex e{s, var, off};
                        const Index i = burgers_x_index(e, K);
                        CHECK((i >= 0 && i < total));
                        CHECK(seen.insert(i).second);
                        CHECK(burgers_x_decode(i, sensors, K) == e);
                    }
            CHECK(static_cast<Index>(seen.size()) == total);
        }
    }
    CHECK(burgers_x_index({1, 1, 0}, 12) == 27);
    CHECK_THROWS_AS(burgers_x_decode(104, 4, 12), InvalidInput);
    CHECK_THROWS_AS(burgers_x_index({0, 2, 0}, 12), InvalidInput);
}

TEST_CASE("point helpers") {
    const auto block = target_block({25, 25});
    REQUIRE(block.size() == 9);
    CHECK(block.front() == GridPoint{24, 24});
    CHECK(block[1] == GridPoint{24, 25});
    CHECK(block[4] == GridPoint{25, 25});
    CHECK(block.back() == GridPoint{26, 26});
    CHECK(region_points({25, 25}, 7).size() == 225);
    const auto merged = merge_points({{{1, 1}, {0, 2}}, {{1, 1}, {3, 0}}});
    CHECK(merged == std::vector<GridPoint>{{0, 2}, {1, 1}, {3, 0}});
}

TEST_CASE("nominal pool holds exactly the nominal trajectory") {
    BurgersPoolConfig cfg = small_pool_config(1);
    cfg.coefficient_std = 0.0;
    const BurgersPool pool = sample_burgers_pool(cfg);
    REQUIRE(pool.trajectories.size() == 1);
    const Grid2D grid = Grid2D::square();
    const auto frames = BurgersSolver(grid).run(burgers_nominal_initial(grid), BoundarySpec::zero(), 20);
    const Eigen::MatrixXd& series = pool.trajectories[0].series;
    CHECK(series.rows() == 21);
    for (const GridPoint p : cfg.probes) {
        for (int k = 0; k <= 20; ++k) {
            REQUIRE(series(k, pool.column(p, 0)) == frames[static_cast<std::size_t>(k)].u(p.i, p.j));
            REQUIRE(series(k, pool.column(p, 1)) == frames[static_cast<std::size_t>(k)].v(p.i, p.j));
        }
    }
    CHECK_THROWS_AS(pool.column({0, 0}, 0), InvalidInput);
}

TEST_CASE("effective-region pool is a 15x15 fabricated-boundary run") {
    BurgersPoolConfig cfg;
    cfg.domain = PoolDomain::Region;
    cfg.radius = 7;
    cfg.count = 2;
    cfg.seed = 4;
    cfg.probes = region_points({25, 25}, 7);
    const BurgersPool pool = sample_burgers_pool(cfg);
    for (const auto& t : pool.trajectories) {
        CHECK(t.series.rows() == 101);
        CHECK(t.series.cols() == 15 * 15 * 2);
    }
    // boundary probe follows U(x, 0) e^{-t}
    const Index c = pool.column({18, 25}, 0);
    const double u0 = pool.trajectories[0].series(0, c);
    CHECK(pool.trajectories[0].series(40, c) == doctest::Approx(u0 * std::exp(-40 * 0.05)));

    cfg.probes = {{10, 10}};
    CHECK_THROWS_AS(sample_burgers_pool(cfg), InvalidInput);
}

TEST_CASE("pools are deterministic and resume from stored trajectories") {
    TempDir dir("limda_pool_test");
    const BurgersPoolConfig cfg = small_pool_config();
    const BurgersPool a = sample_burgers_pool(cfg, dir.path);
    CHECK(a.trajectories[1].series == small_pool().trajectories[1].series);
    const BurgersPool loaded = load_burgers_pool(dir.path);
    REQUIRE(loaded.trajectories.size() == 3);
    CHECK(loaded.trajectories[2].series == a.trajectories[2].series);
    CHECK(loaded.trajectories[2].id == a.trajectories[2].id);

    // drop one file and corrupt another: both are regenerated identically
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir.path))
        if (e.path().extension() == ".bin") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    REQUIRE(files.size() == 3);
    fs::remove(files[0]);
    fs::resize_file(files[1], fs::file_size(files[1]) - 8);
    const BurgersPool resumed = sample_burgers_pool(cfg, dir.path);
    for (std::size_t t = 0; t < 3; ++t) CHECK(resumed.trajectories[t].series == a.trajectories[t].series);

    CHECK(cfg.hash() == small_pool_config().hash());
    CHECK(cfg.hash() != small_pool_config(3, 10).hash());
    CHECK(BurgersPoolConfig::from_json(cfg.to_json()).hash() == cfg.hash());
}

TEST_CASE("training and validation pools do not share trajectories") {
    const BurgersPool train = sample_burgers_pool(small_pool_config(4, 1));
    const BurgersPool val = sample_burgers_pool(small_pool_config(4, 2));
    std::set<std::uint64_t> ids;
    for (const auto& t : train.trajectories) ids.insert(t.id);
    for (const auto& t : val.trajectories) CHECK(ids.count(t.id) == 0);
    CHECK(train.trajectories[0].series != val.trajectories[0].series);
}

TEST_CASE("Burgers dataset: shapes, noise-free values and layout") {
    const BurgersPool& pool = small_pool();
    const Dataset d = build_burgers_dataset(pool, dataset_config(0.0));
    CHECK(d.X.cols() == 104);
    CHECK(d.Y.cols() == 9);
    CHECK(d.size() == 200);
    CHECK(d.meta.input_dim == 104);
    CHECK(d.meta.output_dim == 9);
    CHECK(d.meta.window == 12);
    const SensorLayout sensors = SensorLayout::four_sensors();
    const auto targets = target_block({25, 25});
    for (Index n = 0; n < d.size(); ++n) {
        const PointTag tag = d.tags[static_cast<std::size_t>(n)];
        CHECK(tag.k0 <= 8u);
        const auto it = std::find_if(pool.trajectories.begin(), pool.trajectories.end(),
                                     [&](const BurgersTrajectory& t) { return t.id == tag.trajectory_id; });
        REQUIRE(it != pool.trajectories.end());
        const int k0 = static_cast<int>(tag.k0);
        for (int s = 0; s < 4; ++s)
            for (int off = 0; off <= 12; ++off)
                for (int var = 0; var < 2; ++var)
                    REQUIRE(d.X(n, burgers_x_index({s, var, off}, 12)) ==
                            it->series(k0 + off, pool.column(sensors.locations[static_cast<std::size_t>(s)], var)));
        for (std::size_t q = 0; q < targets.size(); ++q)
            REQUIRE(d.Y(n, Index(q)) == it->series(k0 + 12, pool.column(targets[q], 0)));
    }
    BurgersDatasetConfig eight = dataset_config(0.0);
    eight.sensors = SensorLayout::eight_sensors();
    CHECK_THROWS_AS(build_burgers_dataset(pool, eight), InvalidInput);  // probes not recorded
    BurgersDatasetConfig too_long = dataset_config(0.0);
    too_long.K = 21;
    CHECK_THROWS_AS(build_burgers_dataset(pool, too_long), InvalidInput);
}

TEST_CASE("Burgers dataset: noise only on X with the requested spread") {
    const BurgersPool& pool = small_pool();
    const Dataset clean = build_burgers_dataset(pool, dataset_config(0.0, 5, 1000));
    const Dataset noisy = build_burgers_dataset(pool, dataset_config(0.065, 5, 1000));
    CHECK(noisy.Y == clean.Y);
    CHECK(noisy.X.size() >= 100000);
    CHECK(residual_std(noisy.X, clean.X) == doctest::Approx(0.065).epsilon(0.02));
    const Dataset again = build_burgers_dataset(pool, dataset_config(0.065, 5, 1000));
    CHECK(again.X == noisy.X);
    CHECK(build_burgers_dataset(pool, dataset_config(0.065, 6, 1000)).X != noisy.X);
}

TEST_CASE("Burgers trajectory windows cover every start in order") {
    const BurgersPool& pool = small_pool();
    const Dataset w = burgers_trajectory_windows(pool, 1, SensorLayout::four_sensors(), {{25, 25}}, 5, 0.0, 1);
    CHECK(w.size() == 16);
    for (Index k0 = 0; k0 < w.size(); ++k0) {
        CHECK(w.tags[static_cast<std::size_t>(k0)].k0 == static_cast<std::uint64_t>(k0));
        CHECK(w.Y(k0, 0) == pool.trajectories[1].series(k0 + 5, pool.column({25, 25}, 0)));
    }
}

TEST_CASE("tsunami configuration") {
    const auto grid = TsunamiPoolConfig::amplitude_grid(91);
    REQUIRE(grid.size() == 91);
    CHECK(grid.front() == 0.2);
    CHECK(grid.back() == doctest::Approx(3.2));
    CHECK(grid[1] == doctest::Approx(0.2 + 1.0 / 30.0));
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] - grid[i - 1] == doctest::Approx(1.0 / 30.0));

    const TsunamiPoolConfig cfg = tsunami_config({3.0});
    const auto sensors = cfg.sensor_indices();
    REQUIRE(sensors.size() == 81);
    CHECK(sensors[0] == 0);
    CHECK(sensors[1] == 50);
    CHECK(sensors.back() == 4000);
    CHECK(cfg.facility_index() == 2313);
    CHECK(tsunami_config({3.0}).hash() != tsunami_config({2.0}).hash());
}

TEST_CASE("tsunami dataset: shapes, flat pre-arrival target and noise") {
    const TsunamiPool& pool = nominal_tsunami_pool();
    REQUIRE(pool.trajectories.size() == 1);
    CHECK(pool.frames() == 1201);
    const Dataset w = tsunami_trajectory_windows(pool, 0, 9000.0, 0.0, 1);
    CHECK(w.X.cols() == 162);
    CHECK(w.Y.cols() == 1);
    CHECK(w.size() == 1201 - 180);
    CHECK(w.meta.input_dim == 162);
    // nothing reaches the facility during the first hours
    CHECK(w.Y(0, 0) == 61.5);
    CHECK(w.Y(50, 0) == 61.5);
    CHECK(w.X(0, 0) == doctest::Approx(61.5));
    CHECK(w.X(10, 2) == pool.trajectories[0].sensors(10, 2));

    TsunamiDatasetConfig dc;
    dc.n_points = 700;
    dc.noise_std = 0.0;
    dc.seed = 4;
    const Dataset clean = build_tsunami_dataset(pool, dc);
    dc.noise_std = 0.15;
    const Dataset noisy = build_tsunami_dataset(pool, dc);
    CHECK(noisy.Y == clean.Y);
    CHECK(noisy.X.size() >= 100000);
    CHECK(residual_std(noisy.X, clean.X) == doctest::Approx(0.15).epsilon(0.02));
    CHECK(build_tsunami_dataset(pool, dc).X == noisy.X);
    for (const PointTag& t : noisy.tags) CHECK(t.k0 <= 1020u);

    dc.lead_seconds = 9010.0;
    CHECK_THROWS_AS(build_tsunami_dataset(pool, dc), InvalidInput);
    dc.lead_seconds = 70000.0;
    CHECK_THROWS_AS(build_tsunami_dataset(pool, dc), InvalidInput);
}

TEST_CASE("tsunami split is disjoint, complete and amplitude stratified") {
    TsunamiPool pool;
    for (int t = 0; t < 91; ++t) {
        TsunamiTrajectory traj;
        traj.id = 1000 + static_cast<std::uint64_t>(t);
        traj.Mh = 3.2 - t / 30.0;
        pool.trajectories.push_back(traj);
    }
    const auto [train, val] = split_tsunami_pool(pool, 0.1, 7);
    CHECK(val.size() == 9);
    CHECK(train.size() + val.size() == 91);
    std::set<std::uint64_t> ids;
    for (std::size_t t : train) ids.insert(pool.trajectories[t].id);
    for (std::size_t t : val) CHECK(ids.insert(pool.trajectories[t].id).second);
    CHECK(ids.size() == 91);
    double lo = 10, hi = -10;
    for (std::size_t t : val) {
        lo = std::min(lo, pool.trajectories[t].Mh);
        hi = std::max(hi, pool.trajectories[t].Mh);
    }
    CHECK(hi - lo > 2.0);
    const auto again = split_tsunami_pool(pool, 0.1, 7);
    CHECK(again.second == val);
    CHECK_THROWS_AS(split_tsunami_pool(pool, 0.0, 7), InvalidInput);
}

TEST_CASE("dataset files round trip and detect corruption") {
    TempDir dir("limda_dataset_test");
    const Dataset d = build_burgers_dataset(small_pool(), dataset_config(0.065, 8, 50));
    write_dataset(dir.path / "ds", d);
    const Dataset r = read_dataset(dir.path / "ds");
    CHECK(r.X == d.X);
    CHECK(r.Y == d.Y);
    REQUIRE(r.tags.size() == d.tags.size());
    CHECK(r.tags[7].k0 == d.tags[7].k0);
    CHECK(r.tags[7].trajectory_id == d.tags[7].trajectory_id);
    CHECK(r.meta.to_json() == d.meta.to_json());

    fs::copy(dir.path / "ds", dir.path / "meta_only", fs::copy_options::recursive);
    fs::remove(dir.path / "meta_only" / "X.bin");
    const DatasetMeta m = read_dataset_meta(dir.path / "meta_only");
    CHECK(m.count == 50);
    CHECK(m.input_dim == 104);
    CHECK_THROWS_AS(read_dataset(dir.path / "meta_only"), CorruptData);

    fs::copy(dir.path / "ds", dir.path / "short", fs::copy_options::recursive);
    fs::resize_file(dir.path / "short" / "Y.bin", fs::file_size(dir.path / "short" / "Y.bin") - 8);
    CHECK_THROWS_AS(read_dataset(dir.path / "short"), CorruptData);

    fs::copy(dir.path / "ds", dir.path / "flipped", fs::copy_options::recursive);
    {
        std::fstream f(dir.path / "flipped" / "X.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        f.put('\x5a');
    }
    CHECK_THROWS_AS(read_dataset(dir.path / "flipped"), CorruptData);
    CHECK_THROWS_AS(read_dataset(dir.path / "missing"), CorruptData);
}

}  // TEST_SUITE
