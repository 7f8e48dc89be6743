#include "limda/mlp.hpp"

#include "limda/errors.hpp"
#include "limda/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace limda {

namespace {

constexpr const char* kModelMagic = "LIMDA-MLP 1";

void check_same_rows(const RowMatrixXd& X, const RowMatrixXd& Y, const char* where) {
    if (X.rows() != Y.rows()) throw InvalidInput(std::string(where) + ": X and Y have different numbers of rows");
    if (X.rows() == 0) throw InvalidInput(std::string(where) + ": empty dataset");
}

}  // namespace

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const RowMatrixXd& data) {
    if (data.rows() == 0) throw InvalidInput("Standardizer::fit: empty data");
    Standardizer s;
    s.mean = data.colwise().mean();
    const RowMatrixXd centered = data.rowwise() - s.mean;
    s.scale = (centered.array().square().colwise().sum() / double(data.rows())).sqrt();
    // a constant column leaves rounding residue in the std, so compare relative to the mean
    for (Index c = 0; c < s.scale.size(); ++c)
        if (!(s.scale(c) > 1e-12 * std::max(1.0, std::abs(s.mean(c))))) s.scale(c) = 1.0;
    return s;
}

Standardizer Standardizer::identity(Index dim) {
    return {Eigen::RowVectorXd::Zero(dim), Eigen::RowVectorXd::Ones(dim)};
}

RowMatrixXd Standardizer::apply(const RowMatrixXd& data) const {
    if (data.cols() != mean.size()) throw InvalidInput("Standardizer: width mismatch");
    return (data.rowwise() - mean).array().rowwise() / scale.array();
}

RowMatrixXd Standardizer::invert(const RowMatrixXd& data) const {
    if (data.cols() != mean.size()) throw InvalidInput("Standardizer: width mismatch");
    return (data.array().rowwise() * scale.array()).matrix().rowwise() + mean;
}

// ---------------------------------------------------------------------------

MlpModel MlpModel::initialize(Index input_dim, Index output_dim, const MlpArchitecture& arch, std::uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw InvalidInput("MlpModel: dimensions must be >= 1");
    if (arch.hidden_layers < 0 || arch.width < 1) throw InvalidInput("MlpModel: invalid architecture");
    std::vector<Index> dims{input_dim};
    for (int l = 0; l < arch.hidden_layers; ++l) dims.push_back(arch.width);
    dims.push_back(output_dim);

    std::mt19937_64 rng(seed);
    MlpModel m;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double bound = std::sqrt(3.0 / double(dims[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Eigen::MatrixXd W(dims[l + 1], dims[l]);
        for (Index r = 0; r < W.rows(); ++r)
            for (Index c = 0; c < W.cols(); ++c) W(r, c) = dist(rng);
        m.weights.push_back(std::move(W));
        m.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
    }
    m.input_norm = Standardizer::identity(input_dim);
    m.output_norm = Standardizer::identity(output_dim);
    return m;
}

std::vector<Index> MlpModel::layer_dims() const {
    std::vector<Index> dims{input_dim()};
    for (const auto& W : weights) dims.push_back(W.rows());
    return dims;
}

Index MlpModel::parameter_count() const {
    Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

void MlpModel::validate() const {
    if (weights.empty() || weights.size() != biases.size()) throw InvalidInput("MlpModel: no layers");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows()) throw InvalidInput("MlpModel: bias size mismatch");
        if (l > 0 && weights[l].cols() != weights[l - 1].rows()) throw InvalidInput("MlpModel: layer size mismatch");
    }
    if (input_norm.mean.size() != input_dim() || input_norm.scale.size() != input_dim() ||
        output_norm.mean.size() != output_dim() || output_norm.scale.size() != output_dim())
        throw InvalidInput("MlpModel: normalization size mismatch");
    if ((input_norm.scale.array() <= 0).any() || (output_norm.scale.array() <= 0).any())
        throw InvalidInput("MlpModel: normalization scales must be > 0");
}

// ---------------------------------------------------------------------------
// Column-major kernels: one sample per column, normalized units.

namespace {

struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] = input, activations[L] = output
};

Eigen::MatrixXd forward_columns(const MlpModel& m, const Eigen::MatrixXd& input, ForwardCache* cache) {
    Eigen::MatrixXd a = input;
    if (cache) cache->activations.assign(1, a);
    const std::size_t L = m.weights.size();
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = m.weights[l] * a;
        z.colwise() += m.biases[l];
        if (l + 1 < L) z = z.array().tanh().matrix();
        a = std::move(z);
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

// Returns the mean-square error and accumulates its gradient.
double backward_columns(const MlpModel& m, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target,
                        MlpGradient* grad) {
    ForwardCache cache;
    const Eigen::MatrixXd out = forward_columns(m, input, grad ? &cache : nullptr);
    const Eigen::MatrixXd diff = out - target;
    const double denom = double(diff.size());
    const double loss = diff.squaredNorm() / denom;
    if (!grad) return loss;

    const std::size_t L = m.weights.size();
    grad->weights.resize(L);
    grad->biases.resize(L);
    Eigen::MatrixXd delta = (2.0 / denom) * diff;
    for (std::size_t l = L; l-- > 0;) {
        grad->weights[l].noalias() = delta * cache.activations[l].transpose();
        grad->biases[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = m.weights[l].transpose() * delta;
            delta = back.array() * (1.0 - cache.activations[l].array().square());
        }
    }
    return loss;
}

Eigen::MatrixXd normalized_columns(const Standardizer& s, const RowMatrixXd& data) { return s.apply(data).transpose(); }

}  // namespace

Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim()) {
        std::ostringstream os;
        os << "mlp_forward: input has length " << x.size() << ", model expects " << model.input_dim();
        throw InvalidInput(os.str());
    }
    RowMatrixXd row = x.transpose();
    return mlp_predict(model, row).row(0).transpose();
}

RowMatrixXd mlp_predict(const MlpModel& model, const RowMatrixXd& X) {
    if (X.cols() != model.input_dim()) {
        std::ostringstream os;
        os << "mlp_predict: input has width " << X.cols() << ", model expects " << model.input_dim();
        throw InvalidInput(os.str());
    }
    if (X.rows() == 0) return RowMatrixXd(0, model.output_dim());
    const Eigen::MatrixXd out = forward_columns(model, normalized_columns(model.input_norm, X), nullptr);
    return model.output_norm.invert(out.transpose());
}

std::vector<Eigen::VectorXd> mlp_hidden_activations(const MlpModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim()) throw InvalidInput("mlp_hidden_activations: input length mismatch");
    RowMatrixXd row = x.transpose();
    ForwardCache cache;
    forward_columns(model, normalized_columns(model.input_norm, row), &cache);
    std::vector<Eigen::VectorXd> out;
    for (std::size_t l = 1; l + 1 < cache.activations.size(); ++l) out.push_back(cache.activations[l].col(0));
    return out;
}

double mlp_loss(const MlpModel& model, const RowMatrixXd& X, const RowMatrixXd& Y, MlpGradient* gradient) {
    check_same_rows(X, Y, "mlp_loss");
    if (X.cols() != model.input_dim() || Y.cols() != model.output_dim()) throw InvalidInput("mlp_loss: shape mismatch");
    return backward_columns(model, normalized_columns(model.input_norm, X), normalized_columns(model.output_norm, Y),
                            gradient);
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw InvalidInput("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw InvalidInput("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 1) throw InvalidInput("TrainConfig: max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs) throw InvalidInput("TrainConfig: patience must be in [1, max_epochs]");
    if (!(validation_fraction > 0) || !(validation_fraction < 1))
        throw InvalidInput("TrainConfig: validation_fraction must be in (0, 1)");
    if (architecture.hidden_layers < 0 || architecture.width < 1) throw InvalidInput("TrainConfig: invalid architecture");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"seed", seed},
            {"validation_fraction", validation_fraction},
            {"hidden_layers", architecture.hidden_layers},
            {"width", architecture.width}};
}

namespace {

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long t = 0;

    explicit AdamState(const MlpModel& m) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            mw.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
            vw.push_back(mw.back());
            mb.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
            vb.push_back(mb.back());
        }
    }

    void update(MlpModel& m, const MlpGradient& g, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        const double c1 = 1.0 - std::pow(b1, double(t));
        const double c2 = 1.0 - std::pow(b2, double(t));
        auto step = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
            mom = b1 * mom + (1.0 - b1) * grad;
            vel = b2 * vel + (1.0 - b2) * grad.cwiseProduct(grad);
            param.array() -= lr * (mom.array() / c1) / ((vel.array() / c2).sqrt() + eps);
        };
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            step(m.weights[l], mw[l], vw[l], g.weights[l]);
            step(m.biases[l], mb[l], vb[l], g.biases[l]);
        }
    }
};

TrainResult train_impl(const RowMatrixXd& X, const RowMatrixXd& Y, const RowMatrixXd& Xv, const RowMatrixXd& Yv,
                       const TrainConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    MlpModel model = MlpModel::initialize(X.cols(), Y.cols(), cfg.architecture, io::derive_seed(cfg.seed, 0));
    model.input_norm = Standardizer::fit(X);
    model.output_norm = Standardizer::fit(Y);

    const Eigen::MatrixXd xt = normalized_columns(model.input_norm, X);
    const Eigen::MatrixXd yt = normalized_columns(model.output_norm, Y);
    const Eigen::MatrixXd xv = normalized_columns(model.input_norm, Xv);
    const Eigen::MatrixXd yv = normalized_columns(model.output_norm, Yv);

    std::mt19937_64 shuffle_rng(io::derive_seed(cfg.seed, 1));
    std::vector<Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), Index{0});

    AdamState adam(model);
    MlpGradient grad;
    TrainResult result;
    result.model = model;
    result.log.best_validation_mse = backward_columns(model, xv, yv, nullptr);
    result.log.best_epoch = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const double batch_loss = backward_columns(model, xt(Eigen::all, idx), yt(Eigen::all, idx), &grad);
            if (!std::isfinite(batch_loss)) {
                std::ostringstream os;
                os << "mlp_train: loss became non-finite in epoch " << epoch;
                throw DivergenceError(os.str(), epoch);
            }
            sum += batch_loss * double(stop - start);
            adam.update(model, grad, cfg.learning_rate);
        }
        const double val = backward_columns(model, xv, yv, nullptr);
        if (!std::isfinite(val)) {
            std::ostringstream os;
            os << "mlp_train: validation loss became non-finite in epoch " << epoch;
            throw DivergenceError(os.str(), epoch);
        }
        result.log.epochs.push_back({epoch, sum / double(order.size()), val});
        if (val < result.log.best_validation_mse) {
            result.log.best_validation_mse = val;
            result.log.best_epoch = epoch;
            result.model = model;
        } else if (epoch - result.log.best_epoch >= cfg.patience) {
            result.log.early_stopped = true;
            break;
        }
    }
    result.log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace

TrainResult mlp_train(const RowMatrixXd& X, const RowMatrixXd& Y, const TrainConfig& cfg) {
    cfg.validate();
    check_same_rows(X, Y, "mlp_train");
    if (X.rows() < 2) throw InvalidInput("mlp_train: need at least two rows to hold out a validation part");
    const Index n_val = std::clamp<Index>(static_cast<Index>(std::lround(double(X.rows()) * cfg.validation_fraction)), 1,
                                          X.rows() - 1);
    std::vector<Index> perm(static_cast<std::size_t>(X.rows()));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(io::derive_seed(cfg.seed, 2));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::vector<Index> val(perm.begin(), perm.begin() + n_val);
    std::vector<Index> train(perm.begin() + n_val, perm.end());
    std::sort(train.begin(), train.end());
    return train_impl(X(train, Eigen::all), Y(train, Eigen::all), X(val, Eigen::all), Y(val, Eigen::all), cfg);
}

TrainResult mlp_train(const RowMatrixXd& X, const RowMatrixXd& Y, const RowMatrixXd& Xv, const RowMatrixXd& Yv,
                      const TrainConfig& cfg) {
    cfg.validate();
    check_same_rows(X, Y, "mlp_train");
    check_same_rows(Xv, Yv, "mlp_train (validation)");
    if (Xv.cols() != X.cols() || Yv.cols() != Y.cols()) throw InvalidInput("mlp_train: validation shape mismatch");
    return train_impl(X, Y, Xv, Yv, cfg);
}

// ---------------------------------------------------------------------------

nlohmann::json RmseReport::to_json() const {
    return {{"count", count},
            {"aggregate", aggregate},
            {"max_abs_error", max_abs_error},
            {"per_output", std::vector<double>(per_output.data(), per_output.data() + per_output.size())},
            {"mean_error", std::vector<double>(mean_error.data(), mean_error.data() + mean_error.size())}};
}

RmseReport evaluate_rmse(const RowMatrixXd& predictions, const RowMatrixXd& truth) {
    if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols())
        throw InvalidInput("evaluate_rmse: prediction and truth shapes differ");
    if (truth.rows() == 0) throw InvalidInput("evaluate_rmse: empty dataset");
    const RowMatrixXd err = predictions - truth;
    RmseReport r;
    r.count = truth.rows();
    r.per_output = (err.array().square().colwise().mean()).sqrt().transpose();
    r.mean_error = err.colwise().mean().transpose();
    r.aggregate = std::sqrt(err.squaredNorm() / double(err.size()));
    r.max_abs_error = err.cwiseAbs().maxCoeff();
    return r;
}

RmseReport evaluate_rmse(const MlpModel& model, const RowMatrixXd& X, const RowMatrixXd& Y) {
    if (Y.cols() != model.output_dim()) throw InvalidInput("evaluate_rmse: output width mismatch");
    return evaluate_rmse(mlp_predict(model, X), Y);
}

// ---------------------------------------------------------------------------

void model_write(const std::filesystem::path& path, const MlpModel& model, const nlohmann::json& extra) {
    model.validate();
    std::vector<double> flat;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const RowMatrixXd W = model.weights[l];
        flat.insert(flat.end(), W.data(), W.data() + W.size());
        flat.insert(flat.end(), model.biases[l].data(), model.biases[l].data() + model.biases[l].size());
    }
    for (const Eigen::RowVectorXd* v :
         {&model.input_norm.mean, &model.input_norm.scale, &model.output_norm.mean, &model.output_norm.scale})
        flat.insert(flat.end(), v->data(), v->data() + v->size());
    const std::string payload = io::encode_f64_le(flat);
    const nlohmann::json header = {{"layer_dims", model.layer_dims()},
                                   {"activation", "tanh"},
                                   {"output_activation", "linear"},
                                   {"values", flat.size()},
                                   {"crc64", io::hex64(io::crc64(payload))},
                                   {"extra", extra}};
    io::atomic_write(path, std::string(kModelMagic) + "\n" + header.dump() + "\n" + payload);
}

MlpModel model_read(const std::filesystem::path& path, nlohmann::json* extra) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptData("cannot open model file " + path.string());
    std::string magic, line;
    if (!std::getline(in, magic) || magic != kModelMagic) throw CorruptData("not a model file (or unsupported version): " + path.string());
    if (!std::getline(in, line)) throw CorruptData("model header missing: " + path.string());
    nlohmann::json header;
    std::vector<Index> dims;
    std::size_t values = 0;
    try {
        header = nlohmann::json::parse(line);
        dims = header.at("layer_dims").get<std::vector<Index>>();
        values = header.at("values").get<std::size_t>();
        if (header.at("activation") != "tanh" || header.at("output_activation") != "linear")
            throw CorruptData("unsupported activation in " + path.string());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptData("bad model header in " + path.string() + ": " + e.what());
    }
    if (dims.size() < 2 || std::any_of(dims.begin(), dims.end(), [](Index d) { return d < 1; }))
        throw CorruptData("bad layer dimensions in " + path.string());
    std::size_t expected = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) expected += std::size_t(dims[l + 1] * (dims[l] + 1));
    expected += 2 * std::size_t(dims.front() + dims.back());
    if (expected != values) throw CorruptData("model dimensions do not match the stored value count: " + path.string());

    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string payload = rest.str();
    if (payload.size() != values * 8) throw CorruptData("truncated or oversized model payload: " + path.string());
    if (io::hex64(io::crc64(payload)) != header.at("crc64").get<std::string>())
        throw CorruptData("model checksum mismatch: " + path.string());
    std::vector<double> flat(values);
    std::istringstream block(payload);
    io::read_f64_le(block, flat);

    MlpModel m;
    std::size_t pos = 0;
    auto take = [&](Index n) {
        const double* p = flat.data() + pos;
        pos += static_cast<std::size_t>(n);
        return p;
    };
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        m.weights.push_back(Eigen::Map<const RowMatrixXd>(take(dims[l + 1] * dims[l]), dims[l + 1], dims[l]));
        m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(take(dims[l + 1]), dims[l + 1]));
    }
    const Index d_in = dims.front(), d_out = dims.back();
    m.input_norm.mean = Eigen::Map<const Eigen::RowVectorXd>(take(d_in), d_in);
    m.input_norm.scale = Eigen::Map<const Eigen::RowVectorXd>(take(d_in), d_in);
    m.output_norm.mean = Eigen::Map<const Eigen::RowVectorXd>(take(d_out), d_out);
    m.output_norm.scale = Eigen::Map<const Eigen::RowVectorXd>(take(d_out), d_out);
    try {
        m.validate();
    } catch (const InvalidInput& e) {
        throw CorruptData(std::string("inconsistent model file: ") + e.what());
    }
    if (extra) *extra = header.value("extra", nlohmann::json::object());
    return m;
}

}  // namespace limda
