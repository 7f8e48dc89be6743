// Acceptance runner: one PASS/FAIL line per criterion.
//
//   limda_acceptance [--only N[,N...]] [--full] [--verbose]
//
// Burgers and tsunami studies run at desk scale unless --full is given.
// Pools, datasets and trained models go to $LIMDA_CACHE_DIR and are reused.

#include "limda/burgers.hpp"
#include "limda/errors.hpp"
#include "limda/experiments.hpp"
#include "limda/obsgram.hpp"
#include "limda/shallow_water.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace limda;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Options {
    std::set<int> only;
    bool full = false;
    bool verbose = false;
};

Options g_opt;
Cache g_cache;

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

json burgers_config() {
    BurgersStudyConfig c;
    if (!g_opt.full) c.desk_scale = 8000.0 / 30000.0;
    return c.to_json();
}

json tsunami_config() {
    TsunamiStudyConfig c;
    if (!g_opt.full) c.desk_scale = 31.0 / 91.0;
    return c.to_json();
}

Manifest run(const std::string& experiment, json config) {
    RunOptions o;
    o.experiment = experiment;
    o.config = std::move(config);
    o.output_dir = g_cache.root / "acceptance-runs" / (g_opt.full ? "full" : "desk") / experiment;
    o.cache = g_cache;
    return run_experiment(o);
}

// Every check of a manifest folded into one outcome.
Outcome from_manifest(const Manifest& m) {
    Outcome o{true, ""};
    for (const ManifestCheck& c : m.checks) {
        o.passed = o.passed && c.passed;
        if (!o.detail.empty()) o.detail += "; ";
        o.detail += c.name + " = " + fmt(c.value) + " (" + c.comparison + " " + fmt(c.threshold) + ")";
    }
    if (m.checks.empty()) o.passed = false;
    return o;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> dim(1, 50);
    std::uniform_real_distribution<double> expo(-5.0, 2.0);
    const ObservabilityConfig cfg{0.065, 0.5};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = dim(rng);
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, p, p)).householderQ();
        Eigen::VectorXd d(p);
        for (Index i = 0; i < p; ++i) d(i) = std::pow(10.0, expo(rng));
        Eigen::MatrixXd G = Q * d.asDiagonal() * Q.transpose();
        G = 0.5 * (G + G.transpose());
        const Eigen::RowVectorXd W = random_matrix(rng, 1, p);
        const auto g = modify_gramian(spectral_decomposition(G), cfg);
        const double primary = rho_primary(g, W, cfg).rho;
        const double oracle = rho_oracle<double>(g.reconstruct_modified(), W, cfg.epsilon);
        worst = std::max(worst, std::abs(primary - oracle) / oracle);
    }
    return {worst <= 1e-8, "max relative difference " + fmt(worst) + " over 100 instances (<= 1e-8)"};
}

Outcome criterion_2() {
    std::mt19937_64 rng(102);
    std::uniform_int_distribution<int> ndist(1, 20);
    std::uniform_int_distribution<int> kdist(1, 10);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = ndist(rng);
        const int K = kdist(rng);
        const Eigen::MatrixXd A = random_matrix(rng, n, n, 0.9 / std::sqrt(double(n)));
        const Eigen::MatrixXd H = random_matrix(rng, 1 + trial % 4, n);
        const Eigen::RowVectorXd W = random_matrix(rng, 1, n);
        DiscreteSystem s;
        s.n = n;
        s.m = H.rows();
        s.step = [A](const State& x, int) { return State(A * x); };
        s.observe = [H](const State& x) { return Eigen::VectorXd(H * x); };
        s.target = [W](const State& x) { return double(W * x); };
        ObservabilityConfig cfg;
        cfg.K = K;
        const EmpiricalGramian eg = empirical_gramian(s, random_matrix(rng, n, 1), cfg);
        const Eigen::MatrixXd G = linear_gramian_matrix(LinearSystem<double>(A, H, W), K);
        worst = std::max(worst, (eg.gramian.reconstruct() - G).cwiseAbs().maxCoeff() / G.cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-6, "max |G_emp - G| / |G|max = " + fmt(worst) + " over 50 systems (<= 1e-6)"};
}

Outcome criterion_3() { return from_manifest(run("burgers-sweep", burgers_config())); }

Outcome criterion_4() {
    const BurgersStudyConfig cfg = BurgersStudyConfig::from_json(burgers_config());
    const auto cases = table_cases();
    const AverageRho rho = average_rho(cfg, cases);
    const std::vector<double> ref{0.0209, 0.0300, 0.0672, 0.1416};
    Outcome o{true, ""};
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const double dev = std::abs(rho.mean[c] - ref[c]) / ref[c];
        o.passed = o.passed && dev <= 0.4 && (c == 0 || rho.mean[c] > rho.mean[c - 1]);
        if (c) o.detail += ", ";
        o.detail += cases[c].label() + " " + fmt(rho.mean[c]) + " (ref " + fmt(ref[c]) + ")";
    }
    o.detail = "average rho over " + std::to_string(cfg.rho_draws) + " draws: " + o.detail;
    return o;
}

Outcome criterion_5() { return from_manifest(run("burgers-table3", burgers_config())); }

Outcome criterion_6() {
    json c = burgers_config();
    c["radius"] = 4;
    return from_manifest(run("burgers-table3b", c));
}

Outcome criterion_7() { return from_manifest(run("burgers-nonzero-bc", burgers_config())); }

Outcome criterion_8() { return from_manifest(run("burgers-shifted", burgers_config())); }

Outcome criterion_9() { return from_manifest(run("tsunami", tsunami_config())); }

Outcome criterion_10() {
    std::vector<std::string> failed;
    std::string detail;
    auto note = [&](const std::string& name, bool ok, const std::string& value) {
        if (!ok) failed.push_back(name);
        if (!detail.empty()) detail += "; ";
        detail += name + " " + value;
    };

    {
        // constant state with a matching constant boundary stays put
        const Grid2D grid = Grid2D::square(30);
        const BurgersSolver solver(grid);
        BurgersField g = BurgersField::zeros(grid);
        for (int k = 0; k < 20; ++k) g = solver.step(g, BoundarySpec::zero());
        const double drift = std::max(g.u.cwiseAbs().maxCoeff(), g.v.cwiseAbs().maxCoeff());
        note("constant state drift", drift <= 1e-12, fmt(drift));
    }
    {
        const Grid2D grid = Grid2D::square(30);
        const BurgersSolver solver(grid, BurgersOptions{0.14, false});
        BurgersField f = burgers_random_initial(grid, 21, 0.3);
        const double hi = std::max(f.u.maxCoeff(), 0.25);
        const double lo = std::min(f.u.minCoeff(), 0.0);
        double excess = 0.0;
        for (int k = 0; k < 40; ++k) {
            f = solver.step(f, BoundarySpec::constant_tanh(0.25));
            excess = std::max({excess, f.u.maxCoeff() - hi, lo - f.u.minCoeff()});
        }
        note("maximum principle excess", excess <= 1e-12, fmt(excess));
    }
    {
        TsunamiParams p;
        p.nx = 401;
        p.bed_rise = 0.0;
        p.boundary = SweBoundary::Periodic;
        ShallowWaterField f = swe_initial(p);
        for (Index i = 0; i < p.nx; ++i) {
            const double x = double(i) / (p.nx - 1);
            f.h(i) = p.H0 + 2.0 * std::exp(-200.0 * (x - 0.4) * (x - 0.4));
            f.hu(i) = 5.0 * std::sin(2.0 * std::numbers::pi * x);
        }
        double worst = 0.0;
        for (int k = 0; k < 200; ++k) {
            const double before = f.h.sum();
            f = swe_step(f, p);
            worst = std::max(worst, std::abs(f.h.sum() - before) / before);
        }
        note("mass change per step", worst <= 1e-12, fmt(worst));
    }
    {
        const Grid2D grid = Grid2D::square();
        const BurgersSolver full(grid);
        const BurgersField ic = burgers_random_initial(grid, 8);
        const auto frames = full.run(ic, BoundarySpec::zero(), 30);
        auto [sub_grid, sub] = restrict_to_region(grid, ic, {25, 25}, 7);
        const BurgersSolver local(sub_grid);
        double worst = 0.0;
        for (int k = 1; k <= 30; ++k) {
            const BurgersField b = restrict_to_region(grid, frames[static_cast<std::size_t>(k)], {25, 25}, 7).second;
            sub = local.step_with_boundary(sub, b);
            worst = std::max({worst, (sub.u - b.u).cwiseAbs().maxCoeff(), (sub.v - b.v).cwiseAbs().maxCoeff()});
        }
        note("sub-grid difference", worst <= 1e-10, fmt(worst));
    }
    {
        std::mt19937_64 rng(110);
        const RowMatrixXd X = random_matrix(rng, 12, 5);
        const RowMatrixXd Y = random_matrix(rng, 12, 2);
        MlpModel m = MlpModel::initialize(5, 2, MlpArchitecture{3, 6}, 4);
        for (auto& b : m.biases)
            for (Index i = 0; i < b.size(); ++i) b(i) = 0.05 * double(i % 5) - 0.1;
        m.input_norm = Standardizer::fit(X);
        m.output_norm = Standardizer::fit(Y);
        MlpGradient g;
        mlp_loss(m, X, Y, &g);
        const double h = 1e-6;
        double worst = 0.0;
        auto compare = [&](double& param, double analytic) {
            const double keep = param;
            param = keep + h;
            const double up = mlp_loss(m, X, Y);
            param = keep - h;
            const double down = mlp_loss(m, X, Y);
            param = keep;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
        };
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            for (Index i = 0; i < m.weights[l].rows(); ++i)
                for (Index j = 0; j < m.weights[l].cols(); ++j) compare(m.weights[l](i, j), g.weights[l](i, j));
            for (Index i = 0; i < m.biases[l].size(); ++i) compare(m.biases[l](i), g.biases[l](i));
        }
        note("gradient relative error", worst <= 1e-4, fmt(worst));
    }
    Outcome o{failed.empty(), detail};
    return o;
}

Options parse(int argc, char** argv) {
    Options o;
    for (int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if (arg == "--full") {
            o.full = true;
        } else if (arg == "--verbose") {
            o.verbose = true;
        } else if (arg == "--only" && a + 1 < argc) {
            std::stringstream list(argv[++a]);
            for (std::string item; std::getline(list, item, ',');) o.only.insert(std::stoi(item));
        } else {
            throw InvalidInput("usage: limda_acceptance [--only N[,N...]] [--full] [--verbose]");
        }
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        g_opt = parse(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    if (g_opt.verbose) g_cache.log = &std::cerr;

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"rho matches the linear-solve oracle", criterion_1},
        {"empirical gramian equals the analytic gramian", criterion_2},
        {"rho sweep plateau radius in [6, 8]", criterion_3},
        {"average rho ordering and magnitude", criterion_4},
        {"effective-region surrogate RMSE", criterion_5},
        {"smaller training region degrades RMSE", criterion_6},
        {"non-zero boundary generalization", criterion_7},
        {"shifted effective region", criterion_8},
        {"tsunami facility forecast", criterion_9},
        {"kernel properties", criterion_10},
    };

    std::cout << "acceptance (" << (g_opt.full ? "full scale" : "desk scale") << "), cache " << g_cache.root.string() << '\n';
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!g_opt.only.empty() && !g_opt.only.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.passed;
        std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " | " << o.detail
                  << " [" << fmt(secs) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
