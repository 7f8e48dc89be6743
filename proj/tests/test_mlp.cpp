#include "limda/errors.hpp"
#include "limda/mlp.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace limda;
namespace fs = std::filesystem;

namespace {

RowMatrixXd random_rows(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    RowMatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

MlpModel single_unit(double w1, double b1, double w2, double b2) {
    MlpModel m = MlpModel::initialize(1, 1, MlpArchitecture{1, 1}, 0);
    m.weights[0](0, 0) = w1;
    m.biases[0](0) = b1;
    m.weights[1](0, 0) = w2;
    m.biases[1](0) = b2;
    return m;
}

TrainConfig quick_config(std::uint64_t seed = 0) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.max_epochs = 300;
    cfg.patience = 40;
    cfg.batch_size = 64;
    cfg.architecture = {3, 16};
    return cfg;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("default architecture has 8 tanh layers of width 16") {
    const MlpModel m = MlpModel::initialize(104, 9, MlpArchitecture{}, 1);
    CHECK(m.layer_dims() == std::vector<Index>{104, 16, 16, 16, 16, 16, 16, 16, 16, 9});
    CHECK(m.weights.size() == 9);
    CHECK(m.parameter_count() == 104 * 16 + 16 + 7 * (16 * 16 + 16) + 16 * 9 + 9);
    const double bound = std::sqrt(3.0 / 104.0);
    CHECK(m.weights[0].cwiseAbs().maxCoeff() <= bound);
    CHECK(m.biases[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(MlpModel::initialize(104, 9, MlpArchitecture{}, 1).weights[3] == m.weights[3]);
    CHECK(MlpModel::initialize(104, 9, MlpArchitecture{}, 2).weights[3] != m.weights[3]);
}

TEST_CASE("zero weights and biases give a zero output") {
    MlpModel m = MlpModel::initialize(5, 3, MlpArchitecture{}, 4);
    for (auto& w : m.weights) w.setZero();
    const Eigen::VectorXd y = mlp_forward(m, Eigen::VectorXd::LinSpaced(5, -3, 3));
    CHECK(y.size() == 3);
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(mlp_forward(m, Eigen::VectorXd::Zero(4)), InvalidInput);
}

TEST_CASE("single hidden unit matches hand arithmetic") {
    const double w1 = 0.7, b1 = -0.2, w2 = 1.9, b2 = 0.05;
    const MlpModel m = single_unit(w1, b1, w2, b2);
    for (double x : {-2.0, -0.5, 0.0, 0.3, 4.0}) {
        const double expected = w2 * std::tanh(w1 * x + b1) + b2;
        CHECK(mlp_forward(m, Eigen::VectorXd::Constant(1, x))(0) == doctest::Approx(expected).epsilon(1e-15));
    }
    RowMatrixXd X(2, 1);
    X << -0.5, 4.0;
    const RowMatrixXd Y = mlp_predict(m, X);
    CHECK(Y(1, 0) == doctest::Approx(w2 * std::tanh(w1 * 4.0 + b1) + b2));
}

TEST_CASE("hidden activations stay strictly inside (-1, 1)") {
    MlpModel m = MlpModel::initialize(3, 1, MlpArchitecture{4, 8}, 2);
    for (auto& w : m.weights) w.setOnes();
    const auto acts = mlp_hidden_activations(m, Eigen::Vector3d(1e3, -2e3, 5e2));
    REQUIRE(acts.size() == 4);
    for (const auto& a : acts) {
        CHECK(a.size() == 8);
        CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
        CHECK((a.array() > -1.0 && a.array() < 1.0).all() == (a.cwiseAbs().maxCoeff() < 1.0));
    }
    // saturation still leaves the output finite
    CHECK(std::isfinite(mlp_forward(m, Eigen::Vector3d(1e300, 0, 0))(0)));
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(5);
    const RowMatrixXd X = random_rows(rng, 10, 4);
    const RowMatrixXd Y = random_rows(rng, 10, 2);
    MlpModel m = MlpModel::initialize(4, 2, MlpArchitecture{3, 5}, 9);
    for (auto& b : m.biases)
        for (Index i = 0; i < b.size(); ++i) b(i) = 0.1 * double(i % 3) - 0.1;
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
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        for (Index i = 0; i < m.weights[l].rows(); ++i)
            for (Index j = 0; j < m.weights[l].cols(); ++j) compare(m.weights[l](i, j), g.weights[l](i, j));
        for (Index i = 0; i < m.biases[l].size(); ++i) compare(m.biases[l](i), g.biases[l](i));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("normalization round trip and zero-variance features") {
    std::mt19937_64 rng(6);
    RowMatrixXd Y = random_rows(rng, 50, 3, 7.0);
    Y.col(1).setConstant(1.7);  // its mean is not exactly representable as a sum
    const Standardizer s = Standardizer::fit(Y);
    CHECK(s.scale(1) == 1.0);
    CHECK(s.mean(1) == doctest::Approx(1.7).epsilon(1e-15));
    CHECK((s.invert(s.apply(Y)) - Y).cwiseAbs().maxCoeff() <= 1e-12);
    const RowMatrixXd z = s.apply(Y);
    CHECK(std::abs(z.col(0).mean()) <= 1e-12);
    CHECK(std::sqrt(z.col(2).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("training is deterministic") {
    std::mt19937_64 rng(7);
    const RowMatrixXd X = random_rows(rng, 300, 3);
    const RowMatrixXd Y = (X.col(0).array() * X.col(1).array()).matrix();
    TrainConfig cfg = quick_config(3);
    cfg.max_epochs = 30;
    cfg.patience = 10;
    const TrainResult a = mlp_train(X, Y, cfg);
    const TrainResult b = mlp_train(X, Y, cfg);
    for (std::size_t l = 0; l < a.model.weights.size(); ++l) CHECK(a.model.weights[l] == b.model.weights[l]);
    CHECK(a.log.best_validation_mse == b.log.best_validation_mse);
    CHECK(a.log.epochs.size() == b.log.epochs.size());
    cfg.seed = 4;
    CHECK(mlp_train(X, Y, cfg).model.weights[0] != a.model.weights[0]);
}

TEST_CASE("constant target is learned") {
    std::mt19937_64 rng(8);
    const RowMatrixXd X = random_rows(rng, 1000, 5);
    const double c = 1.7;
    const RowMatrixXd Y = RowMatrixXd::Constant(1000, 1, c);
    TrainConfig cfg;  // default budget and architecture
    cfg.seed = 1;
    const TrainResult r = mlp_train(X, Y, cfg);
    MESSAGE("constant target: best validation MSE " << r.log.best_validation_mse << " at epoch " << r.log.best_epoch);
    const double tol = std::abs(c) * 1e-3 + 1e-3;
    CHECK((mlp_predict(r.model, X).array() - c).abs().maxCoeff() <= tol);
    CHECK((mlp_predict(r.model, random_rows(rng, 100, 5)).array() - c).abs().maxCoeff() <= tol);
    CHECK(r.log.best_validation_mse <= 1e-4);
}

TEST_CASE("linear function is recovered") {
    std::mt19937_64 rng(9);
    const RowMatrixXd X = random_rows(rng, 1000, 6);
    Eigen::VectorXd a(6);
    a << 0.5, -1.0, 2.0, 0.0, 0.3, -0.7;
    const RowMatrixXd Y = X * a;
    RowMatrixXd Xv = random_rows(rng, 300, 6);
    const RowMatrixXd Yv = Xv * a;
    TrainConfig cfg = quick_config(2);
    cfg.max_epochs = 2000;
    cfg.patience = 100;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    const TrainResult r = mlp_train(X, Y, Xv, Yv, cfg);
    const RmseReport rep = evaluate_rmse(r.model, Xv, Yv);
    const double ystd = std::sqrt((Yv.array() - Yv.mean()).square().mean());
    MESSAGE("linear recovery RMSE " << rep.aggregate << " vs target std " << ystd << " after " << r.log.epochs.size()
                                    << " epochs");
    CHECK(rep.aggregate <= 0.01 * ystd);
}

TEST_CASE("training log and early stopping") {
    std::mt19937_64 rng(10);
    const RowMatrixXd X = random_rows(rng, 200, 2);
    const RowMatrixXd Y = random_rows(rng, 200, 1);  // pure noise: validation stops improving quickly
    TrainConfig cfg = quick_config(5);
    cfg.max_epochs = 500;
    cfg.patience = 10;
    const TrainResult r = mlp_train(X, Y, cfg);
    CHECK(r.log.early_stopped);
    CHECK(static_cast<int>(r.log.epochs.size()) == r.log.best_epoch + cfg.patience);
    const auto best = std::min_element(r.log.epochs.begin(), r.log.epochs.end(),
                                       [](const EpochRecord& a, const EpochRecord& b) { return a.validation_mse < b.validation_mse; });
    CHECK(best->epoch == r.log.best_epoch);
    CHECK(best->validation_mse == r.log.best_validation_mse);
}

TEST_CASE("invalid training input") {
    TrainConfig cfg;
    CHECK_THROWS_AS(mlp_train(RowMatrixXd(0, 3), RowMatrixXd(0, 1), cfg), InvalidInput);
    CHECK_THROWS_AS(mlp_train(RowMatrixXd::Zero(10, 3), RowMatrixXd::Zero(9, 1), cfg), InvalidInput);
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = {};
    cfg.patience = 3000;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("divergence is reported with its epoch") {
    std::mt19937_64 rng(11);
    RowMatrixXd X = random_rows(rng, 100, 2);
    RowMatrixXd Y = random_rows(rng, 100, 1);
    TrainConfig cfg = quick_config();
    cfg.learning_rate = 1e300;
    try {
        mlp_train(X, Y, cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch >= 1);
    }
}

TEST_CASE("RMSE evaluation") {
    std::mt19937_64 rng(12);
    const RowMatrixXd Y = random_rows(rng, 40, 9);
    const RmseReport exact = evaluate_rmse(Y, Y);
    CHECK(exact.aggregate == 0.0);
    CHECK(exact.count == 40);
    const RmseReport off = evaluate_rmse((Y.array() - 0.3).matrix(), Y);
    CHECK(off.aggregate == doctest::Approx(0.3));
    CHECK(off.max_abs_error == doctest::Approx(0.3));
    for (Index q = 0; q < 9; ++q) {
        CHECK(off.per_output(q) == doctest::Approx(0.3));
        CHECK(off.mean_error(q) == doctest::Approx(-0.3));
    }
    RowMatrixXd P = Y;
    P.col(2).array() += 0.9;
    const RmseReport one = evaluate_rmse(P, Y);
    CHECK(one.per_output(2) == doctest::Approx(0.9));
    CHECK(one.aggregate == doctest::Approx(0.3));  // sqrt(0.81 / 9)
    CHECK_THROWS_AS(evaluate_rmse(RowMatrixXd(0, 9), RowMatrixXd(0, 9)), InvalidInput);
    CHECK_THROWS_AS(evaluate_rmse(Y, RowMatrixXd::Zero(40, 8)), InvalidInput);
    CHECK(off.to_json().at("aggregate").get<double>() == doctest::Approx(0.3));
}

TEST_CASE("model files round trip and reject tampering") {
    const fs::path dir = fs::temp_directory_path() / "limda_model_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 rng(13);
    MlpModel m = MlpModel::initialize(7, 2, MlpArchitecture{}, 14);
    for (auto& b : m.biases) b.setConstant(0.01);
    m.input_norm = Standardizer::fit(random_rows(rng, 30, 7, 3.0));
    m.output_norm = Standardizer::fit(random_rows(rng, 30, 2, 0.2));
    model_write(dir / "m.mlp", m, {{"note", "test"}});

    nlohmann::json extra;
    const MlpModel r = model_read(dir / "m.mlp", &extra);
    CHECK(extra.at("note") == "test");
    const RowMatrixXd probes = random_rows(rng, 100, 7);
    CHECK(mlp_predict(r, probes) == mlp_predict(m, probes));

    std::ifstream in(dir / "m.mlp", std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    auto write_variant = [&](const std::string& name, std::string content) {
        std::ofstream(dir / name, std::ios::binary) << content;
        return dir / name;
    };
    {
        std::string t = text;
        const auto pos = t.find("[7,16");
        REQUIRE(pos != std::string::npos);
        t.replace(pos, 5, "[8,16");
        CHECK_THROWS_AS(model_read(write_variant("dims.mlp", t)), CorruptData);
    }
    {
        std::string t = text;
        t[t.size() - 20] ^= 0x40;
        CHECK_THROWS_AS(model_read(write_variant("payload.mlp", t)), CorruptData);
    }
    CHECK_THROWS_AS(model_read(write_variant("short.mlp", text.substr(0, text.size() - 8))), CorruptData);
    CHECK_THROWS_AS(model_read(write_variant("magic.mlp", "LIMDA-MLP 9" + text.substr(11))), CorruptData);
    CHECK_THROWS_AS(model_read(dir / "absent.mlp"), CorruptData);
    fs::remove_all(dir);
}

}  // TEST_SUITE
