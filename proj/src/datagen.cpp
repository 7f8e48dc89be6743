#include "limda/datagen.hpp"

#include "limda/errors.hpp"
#include "limda/io.hpp"
#include "limda/parallel.hpp"
#include "limda/trajectory_io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace limda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json points_to_json(const std::vector<GridPoint>& pts) {
    json out = json::array();
    for (const GridPoint& p : pts) out.push_back({p.i, p.j});
    return out;
}

std::vector<GridPoint> points_from_json(const json& j) {
    std::vector<GridPoint> out;
    for (const auto& e : j) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return out;
}

std::string domain_name(PoolDomain d) { return d == PoolDomain::Full ? "full" : "region"; }

PoolDomain domain_from_name(const std::string& s) {
    if (s == "full") return PoolDomain::Full;
    if (s == "region") return PoolDomain::Region;
    throw InvalidInput("unknown pool domain: " + s);
}

std::string trajectory_file_name(std::size_t index) {
    std::ostringstream os;
    os << "traj_" << std::setw(6) << std::setfill('0') << index << ".bin";
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

json BurgersPoolConfig::to_json() const {
    return {
        {"domain", domain_name(domain)},
        {"grid", grid_to_json(grid)},
        {"kappa", physics.kappa},
        {"advection", physics.advection},
        {"boundary", to_string(domain == PoolDomain::Region ? BoundaryKind::Fabricated : boundary)},
        {"boundary_amplitude", boundary_amplitude},
        {"center", {center.i, center.j}},
        {"radius", radius},
        {"steps", steps},
        {"probes", points_to_json(probes)},
        {"count", count},
        {"seed", seed},
        {"coefficient_std", coefficient_std},
        {"modes", modes},
    };
}

BurgersPoolConfig BurgersPoolConfig::from_json(const json& j) {
    BurgersPoolConfig c;
    c.domain = domain_from_name(j.at("domain"));
    c.grid = grid_from_json(j.at("grid"));
    c.physics.kappa = j.at("kappa");
    c.physics.advection = j.value("advection", true);
    c.boundary = boundary_kind_from_string(j.at("boundary"));
    c.boundary_amplitude = j.value("boundary_amplitude", 1.0);
    c.center = {j.at("center").at(0).get<int>(), j.at("center").at(1).get<int>()};
    c.radius = j.at("radius");
    c.steps = j.at("steps");
    c.probes = points_from_json(j.at("probes"));
    c.count = j.at("count");
    c.seed = j.at("seed");
    c.coefficient_std = j.at("coefficient_std");
    c.modes = j.at("modes");
    return c;
}

std::string BurgersPoolConfig::hash() const { return io::hex64(io::crc64(to_json().dump())); }

Index BurgersPool::column(GridPoint p, int variable) const {
    for (std::size_t s = 0; s < config.probes.size(); ++s)
        if (config.probes[s] == p) return 2 * static_cast<Index>(s) + variable;
    std::ostringstream os;
    os << "BurgersPool: (" << p.i << "," << p.j << ") is not a probe of this pool";
    throw InvalidInput(os.str());
}

std::vector<GridPoint> region_points(GridPoint center, int radius) {
    std::vector<GridPoint> out;
    for (int i = center.i - radius; i <= center.i + radius; ++i)
        for (int j = center.j - radius; j <= center.j + radius; ++j) out.push_back({i, j});
    return out;
}

std::vector<GridPoint> target_block(GridPoint c) {
    std::vector<GridPoint> out;
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) out.push_back({c.i + di, c.j + dj});
    return out;
}

std::vector<GridPoint> merge_points(std::vector<std::vector<GridPoint>> lists) {
    std::set<GridPoint> all;
    for (const auto& l : lists) all.insert(l.begin(), l.end());
    return {all.begin(), all.end()};
}

namespace {

BurgersTrajectory simulate_burgers_trajectory(const BurgersPoolConfig& cfg, const BurgersSolver& solver,
                                              std::uint64_t id) {
    const Grid2D& grid = solver.grid();
    const BurgersField ic =
        burgers_series_initial(grid, random_fourier_coefficients(id, cfg.coefficient_std, cfg.modes));
    const BoundarySpec bc = cfg.domain == PoolDomain::Region || cfg.boundary == BoundaryKind::Fabricated
                                ? BoundarySpec::fabricated(ic)
                                : BoundarySpec{cfg.boundary, cfg.boundary_amplitude, nullptr};
    std::vector<GridPoint> local;
    for (const GridPoint& p : cfg.probes) local.push_back(grid.to_local(p));

    BurgersTrajectory out;
    out.id = id;
    out.series.resize(cfg.steps + 1, 2 * static_cast<Index>(local.size()));
    auto record = [&](const BurgersField& f) {
        for (std::size_t s = 0; s < local.size(); ++s) {
            out.series(f.k, 2 * Index(s)) = f.u(local[s].i, local[s].j);
            out.series(f.k, 2 * Index(s) + 1) = f.v(local[s].i, local[s].j);
        }
    };
    BurgersField f = ic;
    record(f);
    for (int k = 0; k < cfg.steps; ++k) {
        try {
            f = solver.step(f, bc);
        } catch (const TrajectoryBlowup& e) {
            std::ostringstream os;
            os << "Burgers pool: trajectory with seed " << id << " blew up: " << e.what();
            throw TrajectoryBlowup(os.str(), e.index, e.step);
        }
        record(f);
    }
    return out;
}

}  // namespace

BurgersPool sample_burgers_pool(const BurgersPoolConfig& cfg, const std::optional<fs::path>& store) {
    if (cfg.count < 1) throw InvalidInput("sample_burgers_pool: count must be >= 1");
    if (cfg.steps < 1) throw InvalidInput("sample_burgers_pool: steps must be >= 1");
    if (cfg.probes.empty()) throw InvalidInput("sample_burgers_pool: no probe points");
    const Grid2D grid = cfg.domain == PoolDomain::Region ? region_grid(cfg.grid, cfg.grid.to_local(cfg.center), cfg.radius)
                                                         : cfg.grid;
    for (const GridPoint& p : cfg.probes) {
        if (!grid.contains(grid.to_local(p))) {
            std::ostringstream os;
            os << "sample_burgers_pool: probe (" << p.i << "," << p.j << ") lies outside the simulated domain";
            throw InvalidInput(os.str());
        }
    }
    const BurgersSolver solver(grid, cfg.physics);
    const std::string hash = cfg.hash();

    BurgersPool pool;
    pool.config = cfg;
    pool.trajectories.resize(static_cast<std::size_t>(cfg.count));
    if (store) {
        fs::create_directories(*store);
        io::atomic_write(*store / "pool.json", json{{"kind", "burgers"}, {"hash", hash}, {"config", cfg.to_json()}}.dump(2));
    }
    parallel_for(pool.trajectories.size(), [&](std::size_t t) {
        const std::uint64_t id = io::derive_seed(cfg.seed, t);
        if (store) {
            const fs::path file = *store / trajectory_file_name(t);
            if (fs::exists(file)) {
                try {
                    TrajectoryFile existing = read_trajectory(file);
                    if (existing.header.value("pool_hash", "") == hash && existing.header.value("trajectory_id", 0ULL) == id &&
                        existing.frames.rows() == cfg.steps + 1) {
                        pool.trajectories[t] = {id, std::move(existing.frames)};
                        return;
                    }
                } catch (const CorruptData&) {
                    // regenerate below
                }
            }
            pool.trajectories[t] = simulate_burgers_trajectory(cfg, solver, id);
            write_trajectory(file,
                             {{"model", "burgers-probes"},
                              {"pool_hash", hash},
                              {"trajectory_id", id},
                              {"grid", grid_to_json(grid)},
                              {"boundary", to_string(cfg.domain == PoolDomain::Region ? BoundaryKind::Fabricated : cfg.boundary)},
                              {"probes", points_to_json(cfg.probes)},
                              {"layout", "(u, v) per probe"}},
                             pool.trajectories[t].series);
        } else {
            pool.trajectories[t] = simulate_burgers_trajectory(cfg, solver, id);
        }
    });
    return pool;
}

BurgersPool load_burgers_pool(const fs::path& store) {
    const json index = json::parse(io::read_file(store / "pool.json"));
    BurgersPool pool;
    pool.config = BurgersPoolConfig::from_json(index.at("config"));
    const std::string hash = pool.config.hash();
    if (index.at("hash") != hash) throw CorruptData("pool.json hash does not match its configuration");
    for (int t = 0; t < pool.config.count; ++t) {
        TrajectoryFile file = read_trajectory(store / trajectory_file_name(static_cast<std::size_t>(t)));
        if (file.header.value("pool_hash", "") != hash) throw CorruptData("trajectory belongs to a different pool");
        pool.trajectories.push_back({file.header.at("trajectory_id").get<std::uint64_t>(), std::move(file.frames)});
    }
    return pool;
}

// ---------------------------------------------------------------------------

json DatasetMeta::to_json() const {
    return {
        {"experiment", experiment},
        {"sensors", sensors},
        {"window", window},
        {"noise_std", noise_std},
        {"boundary", boundary},
        {"region_center", {region_center.i, region_center.j}},
        {"region_radius", region_radius},
        {"seed", seed},
        {"count", count},
        {"input_dim", input_dim},
        {"output_dim", output_dim},
        {"created", created},
        {"extra", extra},
    };
}

DatasetMeta DatasetMeta::from_json(const json& j) {
    DatasetMeta m;
    m.experiment = j.at("experiment");
    m.sensors = j.at("sensors");
    m.window = j.at("window");
    m.noise_std = j.at("noise_std");
    m.boundary = j.at("boundary");
    m.region_center = {j.at("region_center").at(0).get<int>(), j.at("region_center").at(1).get<int>()};
    m.region_radius = j.at("region_radius");
    m.seed = j.at("seed");
    m.count = j.at("count");
    m.input_dim = j.at("input_dim");
    m.output_dim = j.at("output_dim");
    m.created = j.value("created", "");
    m.extra = j.value("extra", json::object());
    return m;
}

Index burgers_x_index(const BurgersXIndex& e, int K) {
    if (e.offset < 0 || e.offset > K || e.variable < 0 || e.variable > 1 || e.sensor < 0)
        throw InvalidInput("burgers_x_index: entry out of range");
    return Index(e.sensor) * 2 * (K + 1) + 2 * e.offset + e.variable;
}

BurgersXIndex burgers_x_decode(Index index, int n_sensors, int K) {
    const Index per_sensor = 2 * (K + 1);
    if (index < 0 || index >= per_sensor * n_sensors) throw InvalidInput("burgers_x_decode: index out of range");
    const Index within = index % per_sensor;
    return {static_cast<int>(index / per_sensor), static_cast<int>(within % 2), static_cast<int>(within / 2)};
}

namespace {

struct BurgersColumns {
    std::vector<Index> u;  // per sensor
    std::vector<Index> v;
    std::vector<Index> targets;
};

BurgersColumns resolve_columns(const BurgersPool& pool, const SensorLayout& sensors,
                               const std::vector<GridPoint>& targets) {
    if (sensors.locations.empty()) throw InvalidInput("dataset: no sensors");
    if (targets.empty()) throw InvalidInput("dataset: no target points");
    BurgersColumns c;
    for (const GridPoint& p : sensors.locations) {
        c.u.push_back(pool.column(p, 0));
        c.v.push_back(pool.column(p, 1));
    }
    for (const GridPoint& p : targets) c.targets.push_back(pool.column(p, 0));
    return c;
}

void fill_burgers_point(const Eigen::MatrixXd& series, const BurgersColumns& cols, int K, int k0, double noise_std,
                        std::mt19937_64& rng, Eigen::Ref<Eigen::RowVectorXd> x, Eigen::Ref<Eigen::RowVectorXd> y) {
    const int n_sensors = static_cast<int>(cols.u.size());
    for (int s = 0; s < n_sensors; ++s) {
        for (int dk = 0; dk <= K; ++dk) {
            x(burgers_x_index({s, 0, dk}, K)) = series(k0 + dk, cols.u[static_cast<std::size_t>(s)]);
            x(burgers_x_index({s, 1, dk}, K)) = series(k0 + dk, cols.v[static_cast<std::size_t>(s)]);
        }
    }
    if (noise_std > 0) {
        std::normal_distribution<double> noise(0.0, noise_std);
        for (Index e = 0; e < x.size(); ++e) x(e) += noise(rng);
    }
    for (std::size_t t = 0; t < cols.targets.size(); ++t) y(static_cast<Index>(t)) = series(k0 + K, cols.targets[t]);
}

DatasetMeta burgers_meta(const BurgersPool& pool, const SensorLayout& sensors, int K, double noise_std,
                         std::uint64_t seed, Index count, Index out_dim, const std::vector<GridPoint>& targets) {
    DatasetMeta m;
    m.experiment = "burgers";
    m.sensors = points_to_json(sensors.locations);
    m.window = K;
    m.noise_std = noise_std;
    m.boundary = to_string(pool.config.domain == PoolDomain::Region ? BoundaryKind::Fabricated : pool.config.boundary);
    m.region_center = pool.config.center;
    m.region_radius = pool.config.domain == PoolDomain::Region ? pool.config.radius : -1;
    m.seed = seed;
    m.count = count;
    m.input_dim = 2 * sensors.size() * (K + 1);
    m.output_dim = out_dim;
    m.created = io::utc_timestamp();
    m.extra = {{"pool_hash", pool.config.hash()}, {"targets", points_to_json(targets)}, {"pool_count", pool.config.count}};
    return m;
}

}  // namespace

Dataset build_burgers_dataset(const BurgersPool& pool, const BurgersDatasetConfig& cfg) {
    if (cfg.K < 1) throw InvalidInput("build_burgers_dataset: K must be >= 1");
    if (cfg.K > pool.config.steps) throw InvalidInput("build_burgers_dataset: K exceeds the number of simulated steps");
    if (cfg.n_points < 1) throw InvalidInput("build_burgers_dataset: n_points must be >= 1");
    if (cfg.noise_std < 0) throw InvalidInput("build_burgers_dataset: noise_std must be >= 0");
    if (pool.trajectories.empty()) throw InvalidInput("build_burgers_dataset: empty pool");
    const BurgersColumns cols = resolve_columns(pool, cfg.sensors, cfg.targets);

    Dataset data;
    const Index d_in = 2 * cfg.sensors.size() * (cfg.K + 1);
    data.X.resize(cfg.n_points, d_in);
    data.Y.resize(cfg.n_points, static_cast<Index>(cfg.targets.size()));
    data.tags.resize(static_cast<std::size_t>(cfg.n_points));
    const int last_start = pool.config.steps - cfg.K;
    parallel_for(static_cast<std::size_t>(cfg.n_points), [&](std::size_t n) {
        std::mt19937_64 rng(io::derive_seed(cfg.seed, n));
        std::uniform_int_distribution<std::size_t> pick(0, pool.trajectories.size() - 1);
        std::uniform_int_distribution<int> start(0, last_start);
        const std::size_t t = pick(rng);
        const int k0 = start(rng);
        const Index row = static_cast<Index>(n);
        fill_burgers_point(pool.trajectories[t].series, cols, cfg.K, k0, cfg.noise_std, rng, data.X.row(row),
                           data.Y.row(row));
        data.tags[n] = {static_cast<std::uint64_t>(k0), pool.trajectories[t].id};
    });
    data.meta = burgers_meta(pool, cfg.sensors, cfg.K, cfg.noise_std, cfg.seed, cfg.n_points,
                             static_cast<Index>(cfg.targets.size()), cfg.targets);
    return data;
}

Dataset burgers_trajectory_windows(const BurgersPool& pool, std::size_t trajectory, const SensorLayout& sensors,
                                   const std::vector<GridPoint>& targets, int K, double noise_std, std::uint64_t seed) {
    if (trajectory >= pool.trajectories.size()) throw InvalidInput("burgers_trajectory_windows: no such trajectory");
    if (K < 1 || K > pool.config.steps) throw InvalidInput("burgers_trajectory_windows: invalid K");
    const BurgersColumns cols = resolve_columns(pool, sensors, targets);
    const Index n = pool.config.steps - K + 1;
    Dataset data;
    data.X.resize(n, 2 * sensors.size() * (K + 1));
    data.Y.resize(n, static_cast<Index>(targets.size()));
    for (Index k0 = 0; k0 < n; ++k0) {
        std::mt19937_64 rng(io::derive_seed(seed, static_cast<std::uint64_t>(k0)));
        fill_burgers_point(pool.trajectories[trajectory].series, cols, K, static_cast<int>(k0), noise_std, rng,
                           data.X.row(k0), data.Y.row(k0));
        data.tags.push_back({static_cast<std::uint64_t>(k0), pool.trajectories[trajectory].id});
    }
    data.meta = burgers_meta(pool, sensors, K, noise_std, seed, n, static_cast<Index>(targets.size()), targets);
    return data;
}

// ---------------------------------------------------------------------------

std::vector<double> TsunamiPoolConfig::amplitude_grid(int count, double lo, double hi) {
    if (count < 1) throw InvalidInput("amplitude_grid: count must be >= 1");
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    return out;
}

std::vector<Index> TsunamiPoolConfig::sensor_indices() const {
    std::vector<Index> out;
    const double dx = params.dx();
    for (int s = 0; s < sensor_count; ++s) {
        const Index idx = static_cast<Index>(std::lround(s * sensor_spacing / dx));
        if (idx < 0 || idx >= params.nx) throw InvalidInput("TsunamiPoolConfig: sensor outside the domain");
        out.push_back(idx);
    }
    return out;
}

Index TsunamiPoolConfig::facility_index() const {
    const double pos = facility_x / params.dx();
    const Index idx = static_cast<Index>(std::lround(pos));
    if (idx < 0 || idx >= params.nx) throw InvalidInput("TsunamiPoolConfig: facility outside the domain");
    if (std::abs(pos - double(idx)) > 1e-9)
        std::cerr << "warning: facility x = " << facility_x << " m is not a grid point; using index " << idx << '\n';
    return idx;
}

json TsunamiPoolConfig::to_json() const {
    return {
        {"length", params.length}, {"nx", params.nx}, {"dt", params.dt}, {"duration", params.duration},
        {"H0", params.H0}, {"g", params.g}, {"bed_rise", params.bed_rise}, {"base_depth", params.base_depth},
        {"amplitudes", amplitudes}, {"sensor_count", sensor_count}, {"sensor_spacing", sensor_spacing},
        {"facility_x", facility_x}, {"record_stride", record_stride},
    };
}

std::string TsunamiPoolConfig::hash() const { return io::hex64(io::crc64(to_json().dump())); }

int TsunamiPool::frames() const { return config.params.steps() / config.record_stride + 1; }

TsunamiPool sample_tsunami_pool(const TsunamiPoolConfig& cfg, const std::optional<fs::path>& store) {
    if (cfg.amplitudes.empty()) throw InvalidInput("sample_tsunami_pool: no amplitudes");
    if (cfg.record_stride < 1) throw InvalidInput("sample_tsunami_pool: record_stride must be >= 1");
    const std::vector<Index> sensors = cfg.sensor_indices();
    const Index facility = cfg.facility_index();
    const std::string hash = cfg.hash();

    TsunamiPool pool;
    pool.config = cfg;
    pool.trajectories.resize(cfg.amplitudes.size());
    if (store) {
        fs::create_directories(*store);
        io::atomic_write(*store / "pool.json", json{{"kind", "tsunami"}, {"hash", hash}, {"config", cfg.to_json()}}.dump(2));
    }
    parallel_for(cfg.amplitudes.size(), [&](std::size_t t) {
        const std::uint64_t id = io::derive_seed(std::hash<std::string>{}(hash), t);
        TsunamiTrajectory& out = pool.trajectories[t];
        out.id = id;
        out.Mh = cfg.amplitudes[t];
        const fs::path file = store ? *store / trajectory_file_name(t) : fs::path{};
        if (store && fs::exists(file)) {
            try {
                TrajectoryFile existing = read_trajectory(file);
                if (existing.header.value("pool_hash", "") == hash && existing.frames.rows() == pool.frames()) {
                    out.sensors = existing.frames.leftCols(2 * static_cast<Index>(sensors.size()));
                    out.facility = existing.frames.rightCols(1);
                    return;
                }
            } catch (const CorruptData&) {
            }
        }
        TsunamiParams p = cfg.params;
        p.Mh = cfg.amplitudes[t];
        p.boundary = SweBoundary::Physical;
        const SweRecording rec = run_shallow_water(p, sensors, {facility}, cfg.record_stride);
        out.sensors = rec.probe_series;
        out.facility = rec.depth_series.col(0);
        if (store) {
            Eigen::MatrixXd frames(out.sensors.rows(), out.sensors.cols() + 1);
            frames << out.sensors, out.facility;
            write_trajectory(file,
                             {{"model", "shallow-water-probes"},
                              {"pool_hash", hash},
                              {"trajectory_id", id},
                              {"Mh", p.Mh},
                              {"dt", p.dt * cfg.record_stride},
                              {"layout", "(h, hu) per sensor, then facility depth"}},
                             frames);
        }
    });
    return pool;
}

namespace {

void fill_tsunami_point(const TsunamiTrajectory& traj, int frame, int lead_frames, double noise_std,
                        std::mt19937_64& rng, Eigen::Ref<Eigen::RowVectorXd> x, Eigen::Ref<Eigen::RowVectorXd> y) {
    x = traj.sensors.row(frame);
    if (noise_std > 0) {
        std::normal_distribution<double> noise(0.0, noise_std);
        for (Index e = 0; e < x.size(); ++e) x(e) += noise(rng);
    }
    y(0) = traj.facility(frame + lead_frames);
}

int lead_in_frames(const TsunamiPool& pool, double lead_seconds) {
    const double frames = lead_seconds / pool.frame_dt();
    const int lead = static_cast<int>(std::lround(frames));
    if (lead < 0 || std::abs(frames - lead) > 1e-9)
        throw InvalidInput("tsunami dataset: lead time is not a multiple of the recorded frame spacing");
    if (lead >= pool.frames()) throw InvalidInput("tsunami dataset: lead time exceeds the simulated horizon");
    return lead;
}

DatasetMeta tsunami_meta(const TsunamiPool& pool, double lead_seconds, double noise_std, std::uint64_t seed, Index count) {
    DatasetMeta m;
    m.experiment = "tsunami";
    m.sensors = pool.config.sensor_indices();
    m.noise_std = noise_std;
    m.boundary = "physical";
    m.seed = seed;
    m.count = count;
    m.input_dim = 2 * pool.config.sensor_count;
    m.output_dim = 1;
    m.created = io::utc_timestamp();
    m.extra = {{"pool_hash", pool.config.hash()},
               {"lead_seconds", lead_seconds},
               {"facility_x", pool.config.facility_x},
               {"frame_dt", pool.frame_dt()}};
    return m;
}

}  // namespace

Dataset build_tsunami_dataset(const TsunamiPool& pool, const TsunamiDatasetConfig& cfg) {
    if (cfg.n_points < 1) throw InvalidInput("build_tsunami_dataset: n_points must be >= 1");
    if (cfg.noise_std < 0) throw InvalidInput("build_tsunami_dataset: noise_std must be >= 0");
    std::vector<std::size_t> subset = cfg.trajectories;
    if (subset.empty()) {
        subset.resize(pool.trajectories.size());
        std::iota(subset.begin(), subset.end(), std::size_t{0});
    }
    for (std::size_t t : subset)
        if (t >= pool.trajectories.size()) throw InvalidInput("build_tsunami_dataset: trajectory index out of range");
    const int lead = lead_in_frames(pool, cfg.lead_seconds);
    const int last_start = pool.frames() - 1 - lead;

    Dataset data;
    data.X.resize(cfg.n_points, 2 * pool.config.sensor_count);
    data.Y.resize(cfg.n_points, 1);
    data.tags.resize(static_cast<std::size_t>(cfg.n_points));
    parallel_for(static_cast<std::size_t>(cfg.n_points), [&](std::size_t n) {
        std::mt19937_64 rng(io::derive_seed(cfg.seed, n));
        std::uniform_int_distribution<std::size_t> pick(0, subset.size() - 1);
        std::uniform_int_distribution<int> start(0, last_start);
        const TsunamiTrajectory& traj = pool.trajectories[subset[pick(rng)]];
        const int frame = start(rng);
        fill_tsunami_point(traj, frame, lead, cfg.noise_std, rng, data.X.row(Index(n)), data.Y.row(Index(n)));
        data.tags[n] = {static_cast<std::uint64_t>(frame), traj.id};
    });
    data.meta = tsunami_meta(pool, cfg.lead_seconds, cfg.noise_std, cfg.seed, cfg.n_points);
    return data;
}

Dataset tsunami_trajectory_windows(const TsunamiPool& pool, std::size_t trajectory, double lead_seconds,
                                   double noise_std, std::uint64_t seed) {
    if (trajectory >= pool.trajectories.size()) throw InvalidInput("tsunami_trajectory_windows: no such trajectory");
    const int lead = lead_in_frames(pool, lead_seconds);
    const Index n = pool.frames() - lead;
    Dataset data;
    data.X.resize(n, 2 * pool.config.sensor_count);
    data.Y.resize(n, 1);
    for (Index f = 0; f < n; ++f) {
        std::mt19937_64 rng(io::derive_seed(seed, static_cast<std::uint64_t>(f)));
        fill_tsunami_point(pool.trajectories[trajectory], static_cast<int>(f), lead, noise_std, rng, data.X.row(f),
                           data.Y.row(f));
        data.tags.push_back({static_cast<std::uint64_t>(f), pool.trajectories[trajectory].id});
    }
    data.meta = tsunami_meta(pool, lead_seconds, noise_std, seed, n);
    return data;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_tsunami_pool(const TsunamiPool& pool,
                                                                                 double validation_fraction,
                                                                                 std::uint64_t seed) {
    const std::size_t n = pool.trajectories.size();
    if (!(validation_fraction > 0) || !(validation_fraction < 1)) throw InvalidInput("split_tsunami_pool: fraction must be in (0, 1)");
    if (n < 2) throw InvalidInput("split_tsunami_pool: need at least two trajectories");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pool.trajectories[a].Mh < pool.trajectories[b].Mh; });
    const std::size_t blocks = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(double(n) * validation_fraction)), 1, n - 1);
    std::mt19937_64 rng(seed);
    std::vector<bool> is_val(n, false);
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t lo = b * n / blocks;
        const std::size_t hi = (b + 1) * n / blocks;
        std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
        is_val[order[pick(rng)]] = true;
    }
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    for (std::size_t t = 0; t < n; ++t) (is_val[t] ? val : train).push_back(t);
    return {train, val};
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kDatasetFormat = "limda-dataset-1";

std::string encode_matrix(const RowMatrixXd& m) {
    return io::encode_f64_le({m.data(), static_cast<std::size_t>(m.size())});
}

std::string encode_tags(const std::vector<PointTag>& tags) {
    std::vector<std::uint64_t> flat;
    flat.reserve(2 * tags.size());
    for (const PointTag& t : tags) {
        flat.push_back(t.k0);
        flat.push_back(t.trajectory_id);
    }
    return io::encode_u64_le(flat);
}

json read_index(const fs::path& dir) {
    const fs::path path = dir / "meta.json";
    if (!fs::exists(path)) throw CorruptData("dataset has no meta.json: " + dir.string());
    try {
        json j = json::parse(io::read_file(path));
        if (j.at("format") != kDatasetFormat) throw CorruptData("unsupported dataset format in " + path.string());
        return j;
    } catch (const json::exception& e) {
        throw CorruptData("bad dataset meta.json: " + std::string(e.what()));
    }
}

std::string read_block(const fs::path& dir, const std::string& name, std::size_t expected_bytes, const json& index) {
    const fs::path path = dir / name;
    if (!fs::exists(path)) throw CorruptData("dataset block missing: " + path.string());
    std::string bytes = io::read_file(path);
    if (bytes.size() != expected_bytes) throw CorruptData("dataset block " + name + " is truncated or oversized");
    if (io::hex64(io::crc64(bytes)) != index.at("checksums").at(name).get<std::string>())
        throw CorruptData("dataset block " + name + " fails its checksum");
    return bytes;
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& data) {
    if (data.Y.rows() != data.X.rows() || data.tags.size() != static_cast<std::size_t>(data.X.rows()))
        throw InvalidInput("write_dataset: X, Y and tags disagree on the number of samples");
    fs::create_directories(dir);
    const std::string xb = encode_matrix(data.X);
    const std::string yb = encode_matrix(data.Y);
    const std::string tb = encode_tags(data.tags);
    io::atomic_write(dir / "X.bin", xb);
    io::atomic_write(dir / "Y.bin", yb);
    io::atomic_write(dir / "tags.bin", tb);
    const json index = {
        {"format", kDatasetFormat},
        {"meta", data.meta.to_json()},
        {"shapes", {{"X", {data.X.rows(), data.X.cols()}}, {"Y", {data.Y.rows(), data.Y.cols()}}}},
        {"layout", "row-major little-endian float64; tags are (k0, trajectory_id) uint64 pairs"},
        {"checksums",
         {{"X.bin", io::hex64(io::crc64(xb))}, {"Y.bin", io::hex64(io::crc64(yb))}, {"tags.bin", io::hex64(io::crc64(tb))}}},
    };
    io::atomic_write(dir / "meta.json", index.dump(2));
}

DatasetMeta read_dataset_meta(const fs::path& dir) {
    const json index = read_index(dir);
    DatasetMeta meta = DatasetMeta::from_json(index.at("meta"));
    meta.count = index.at("shapes").at("X").at(0);
    meta.input_dim = index.at("shapes").at("X").at(1);
    meta.output_dim = index.at("shapes").at("Y").at(1);
    return meta;
}

Dataset read_dataset(const fs::path& dir) {
    const json index = read_index(dir);
    Dataset data;
    data.meta = DatasetMeta::from_json(index.at("meta"));
    const Index n = index.at("shapes").at("X").at(0);
    const Index d_in = index.at("shapes").at("X").at(1);
    const Index d_out = index.at("shapes").at("Y").at(1);
    if (index.at("shapes").at("Y").at(0).get<Index>() != n || n < 0 || d_in < 0 || d_out < 0)
        throw CorruptData("dataset shapes are inconsistent");
    data.X.resize(n, d_in);
    data.Y.resize(n, d_out);
    const std::string xb = read_block(dir, "X.bin", static_cast<std::size_t>(n * d_in * 8), index);
    const std::string yb = read_block(dir, "Y.bin", static_cast<std::size_t>(n * d_out * 8), index);
    const std::string tb = read_block(dir, "tags.bin", static_cast<std::size_t>(n * 16), index);
    {
        std::istringstream in(xb);
        io::read_f64_le(in, {data.X.data(), static_cast<std::size_t>(data.X.size())});
    }
    {
        std::istringstream in(yb);
        io::read_f64_le(in, {data.Y.data(), static_cast<std::size_t>(data.Y.size())});
    }
    std::vector<std::uint64_t> flat(static_cast<std::size_t>(2 * n));
    io::decode_u64_le(tb, flat);
    for (Index i = 0; i < n; ++i) data.tags.push_back({flat[2 * std::size_t(i)], flat[2 * std::size_t(i) + 1]});
    return data;
}

}  // namespace limda
