// limda: command-line front end for simulations, sweeps, dataset generation,
// training, evaluation and the packaged experiments.

#include "limda/datagen.hpp"
#include "limda/errors.hpp"
#include "limda/experiments.hpp"
#include "limda/io.hpp"
#include "limda/mlp.hpp"
#include "limda/trajectory_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace limda;

namespace {

struct ConfigArgs {
    std::string file;
    std::vector<std::string> sets;
    double desk_scale = 0.0;  // 0: leave the config value alone
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.file, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", args.sets, "override key=value (dotted keys reach nested objects); flags win over the file");
    cmd->add_option("--desk-scale", args.desk_scale, "shrink pool and dataset sizes by this factor in (0, 1]");
}

json load_config(const ConfigArgs& args) {
    json config = json::object();
    if (!args.file.empty()) {
        try {
            config = json::parse(io::read_file(args.file));
        } catch (const json::exception& e) {
            throw InvalidInput("config file " + args.file + " is not valid JSON: " + e.what());
        }
    }
    apply_overrides(config, args.sets);
    if (args.desk_scale != 0.0) config["desk_scale"] = args.desk_scale;
    return config;
}

Cache make_cache(const std::string& dir, bool force) {
    Cache c;
    if (!dir.empty()) c.root = dir;
    c.force = force;
    c.log = &std::clog;
    return c;
}

SensorLayout layout_for(int sensors) {
    if (sensors == 4) return SensorLayout::four_sensors();
    if (sensors == 8) return SensorLayout::eight_sensors();
    throw InvalidInput("--sensors must be 4 or 8");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Limited-area data assimilation: observability, effective regions and surrogate estimators"};
    app.require_subcommand(1);

    // simulate ---------------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "run one PDE trajectory and dump it");
    std::string sim_model = "burgers";
    std::string sim_out;
    std::string sim_boundary = "zero";
    double sim_amplitude = 1.0;
    int sim_steps = 100;
    std::uint64_t sim_seed = 0;
    double sim_std = 0.0;
    double sim_mh = 3.0;
    int sim_stride = 50;
    simulate->add_option("--model", sim_model, "burgers | shallow-water")->check(CLI::IsMember({"burgers", "shallow-water"}));
    simulate->add_option("--out", sim_out, "trajectory file")->required();
    simulate->add_option("--boundary", sim_boundary, "zero | fabricated | sinusoidal | constant_tanh (burgers)");
    simulate->add_option("--amplitude", sim_amplitude, "constant_tanh amplitude (burgers)");
    simulate->add_option("--steps", sim_steps, "time steps (burgers)");
    simulate->add_option("--seed", sim_seed, "initial-condition seed (burgers)");
    simulate->add_option("--coefficient-std", sim_std, "std of the random sine coefficients; 0 = nominal (burgers)");
    simulate->add_option("--Mh", sim_mh, "forcing amplitude (shallow-water)");
    simulate->add_option("--stride", sim_stride, "keep every n-th step (shallow-water)");

    // sweep ------------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "rho versus effective-region radius (Burgers, nominal trajectory)");
    ConfigArgs sweep_cfg;
    std::string sweep_out;
    add_config_options(sweep, sweep_cfg);
    sweep->add_option("--out", sweep_out, "CSV file")->required();

    // gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "build a training or validation dataset");
    ConfigArgs gen_cfg;
    std::string gen_kind = "burgers";
    std::string gen_out;
    std::string gen_domain = "region";
    std::string gen_split = "train";
    int gen_sensors = 4;
    int gen_K = 12;
    std::string cache_dir;
    bool force = false;
    add_config_options(gen, gen_cfg);
    gen->add_option("kind", gen_kind, "burgers | tsunami")->check(CLI::IsMember({"burgers", "tsunami"}));
    gen->add_option("--out", gen_out, "dataset directory")->required();
    gen->add_option("--domain", gen_domain, "region | full (burgers training pool)")->check(CLI::IsMember({"region", "full"}));
    gen->add_option("--split", gen_split, "train | validation")->check(CLI::IsMember({"train", "validation"}));
    gen->add_option("--sensors", gen_sensors, "4 or 8 (burgers)");
    gen->add_option("--K", gen_K, "window length (burgers)");
    gen->add_option("--cache", cache_dir, "cache directory (default $LIMDA_CACHE_DIR or ./limda-cache)");

    // train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "train a surrogate network on a dataset");
    ConfigArgs train_cfg;
    std::string train_data;
    std::string train_val;
    std::string train_out;
    add_config_options(train, train_cfg);
    train->add_option("--data", train_data, "training dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--validation", train_val, "early-stopping dataset (default: hold out part of --data)")
        ->check(CLI::ExistingDirectory);
    train->add_option("--out", train_out, "model file")->required();

    // eval -------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "RMSE of a model on a dataset");
    std::string eval_model;
    std::string eval_data;
    eval->add_option("--model", eval_model, "model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eval_data, "dataset directory")->required()->check(CLI::ExistingDirectory);

    // run --------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run a packaged experiment and write its manifest");
    ConfigArgs run_cfg;
    std::string run_id;
    std::string run_out;
    add_config_options(run, run_cfg);
    run->add_option("experiment", run_id, "experiment id")->required()->check(CLI::IsMember(experiment_ids()));
    run->add_option("--out", run_out, "output directory (default runs/<experiment>)");
    run->add_option("--cache", cache_dir, "cache directory (default $LIMDA_CACHE_DIR or ./limda-cache)");
    run->add_flag("--force", force, "regenerate cached pools, datasets and models");

    // report -----------------------------------------------------------------
    auto* report = app.add_subcommand("report", "summarize a manifest; exit 1 if any check failed");
    std::string report_path;
    report->add_option("manifest", report_path, "manifest.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) {
            if (sim_model == "burgers") {
                const Grid2D grid = Grid2D::square();
                const BurgersSolver solver(grid);
                const BurgersField ic = sim_std > 0 ? burgers_random_initial(grid, sim_seed, sim_std)
                                                    : burgers_nominal_initial(grid);
                BoundarySpec bc;
                switch (boundary_kind_from_string(sim_boundary)) {
                    case BoundaryKind::Zero: bc = BoundarySpec::zero(); break;
                    case BoundaryKind::Fabricated: bc = BoundarySpec::fabricated(ic); break;
                    case BoundaryKind::Sinusoidal: bc = BoundarySpec::sinusoidal(); break;
                    case BoundaryKind::ConstantTanh: bc = BoundarySpec::constant_tanh(sim_amplitude); break;
                }
                write_burgers_trajectory(sim_out, grid, solver.options(), bc, solver.run(ic, bc, sim_steps));
            } else {
                TsunamiParams p;
                p.Mh = sim_mh;
                std::vector<Index> all(static_cast<std::size_t>(p.nx));
                for (Index i = 0; i < p.nx; ++i) all[std::size_t(i)] = i;
                const SweRecording rec = run_shallow_water(p, all, {}, sim_stride);
                write_trajectory(sim_out,
                                 {{"model", "shallow-water"}, {"Mh", p.Mh}, {"nx", p.nx}, {"dx", p.dx()},
                                  {"dt", p.dt * sim_stride}, {"layout", "(h, hu) per grid point"},
                                  {"max_cfl", rec.max_cfl}, {"max_substeps", rec.max_substeps}},
                                 rec.probe_series);
            }
            std::cout << sim_out << '\n';
        } else if (*sweep) {
            const BurgersStudyConfig cfg = BurgersStudyConfig::from_json(load_config(sweep_cfg));
            const RadiusSweep s = run_burgers_sweep(cfg);
            write_sweep_csv(sweep_out, s);
            std::cout << "stabilized radius: " << (s.stabilized_radius ? std::to_string(*s.stabilized_radius) : "none") << '\n';
        } else if (*gen) {
            const Cache cache = make_cache(cache_dir, false);
            const json config = load_config(gen_cfg);
            const bool validation = gen_split == "validation";
            if (gen_kind == "burgers") {
                const BurgersStudyConfig cfg = BurgersStudyConfig::from_json(config);
                BurgersPoolConfig pc = cfg.base;
                pc.domain = (!validation && gen_domain == "region") ? PoolDomain::Region : PoolDomain::Full;
                pc.center = cfg.center;
                pc.radius = cfg.radius;
                pc.probes = merge_points({SensorLayout::eight_sensors().locations, target_block(cfg.center)});
                pc.count = cfg.scaled_pool_count();
                pc.seed = io::derive_seed(cfg.seed, validation ? 2 : 1);
                const BurgersPool pool = cached_burgers_pool(pc, cache);
                BurgersDatasetConfig dc;
                dc.sensors = layout_for(gen_sensors);
                dc.targets = target_block(cfg.center);
                dc.K = gen_K;
                dc.n_points = validation ? cfg.scaled_validation_points() : cfg.scaled_train_points();
                dc.noise_std = cfg.noise_std;
                dc.seed = io::derive_seed(cfg.seed, validation ? 4 : 3);
                write_dataset(gen_out, build_burgers_dataset(pool, dc));
            } else {
                const TsunamiStudyConfig cfg = TsunamiStudyConfig::from_json(config);
                TsunamiPoolConfig pc = cfg.pool;
                pc.amplitudes = TsunamiPoolConfig::amplitude_grid(cfg.scaled_amplitude_count(), cfg.amplitude_min, cfg.amplitude_max);
                const TsunamiPool pool = cached_tsunami_pool(pc, cache);
                const auto split = split_tsunami_pool(pool, cfg.validation_fraction, io::derive_seed(cfg.seed, 1));
                TsunamiDatasetConfig dc;
                dc.lead_seconds = cfg.lead_seconds;
                dc.noise_std = cfg.noise_std;
                const Index n_val = std::max<Index>(1, static_cast<Index>(std::llround(double(cfg.scaled_points()) * cfg.validation_fraction)));
                dc.n_points = validation ? n_val : cfg.scaled_points() - n_val;
                dc.seed = io::derive_seed(cfg.seed, validation ? 3 : 2);
                dc.trajectories = validation ? split.second : split.first;
                write_dataset(gen_out, build_tsunami_dataset(pool, dc));
            }
            const DatasetMeta meta = read_dataset_meta(gen_out);
            std::cout << gen_out << ": " << meta.count << " points, " << meta.input_dim << " inputs, " << meta.output_dim
                      << " outputs\n";
        } else if (*train) {
            json config = load_config(train_cfg);
            config.erase("desk_scale");
            json wrapped = {{"train", config}};
            const TrainConfig tc = BurgersStudyConfig::from_json(wrapped).train;
            const Dataset data = read_dataset(train_data);
            TrainResult result;
            if (!train_val.empty()) {
                const Dataset val = read_dataset(train_val);
                result = mlp_train(data.X, data.Y, val.X, val.Y, tc);
            } else {
                result = mlp_train(data.X, data.Y, tc);
            }
            model_write(train_out, result.model,
                        {{"train", tc.to_json()}, {"data", data.meta.to_json()}, {"best_epoch", result.log.best_epoch},
                         {"epochs", result.log.epochs.size()}});
            std::cout << "best epoch " << result.log.best_epoch << " of " << result.log.epochs.size()
                      << ", validation MSE (normalized) " << result.log.best_validation_mse << '\n';
        } else if (*eval) {
            const MlpModel model = model_read(eval_model);
            const Dataset data = read_dataset(eval_data);
            std::cout << evaluate_rmse(model, data.X, data.Y).to_json().dump(2) << '\n';
        } else if (*run) {
            RunOptions opt;
            opt.experiment = run_id;
            opt.config = load_config(run_cfg);
            opt.output_dir = run_out.empty() ? fs::path("runs") / run_id : fs::path(run_out);
            opt.cache = make_cache(cache_dir, force);
            run_experiment(opt);
            return report_manifest(opt.output_dir / "manifest.json", std::cout);
        } else if (*report) {
            return report_manifest(report_path, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
