#pragma once

// Fully connected tanh network with a linear output layer, trained on
// mean-square error with Adam. Inputs and outputs are z-scored with statistics
// of the training set; the loss is measured in the normalized output space.

#include "limda/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace limda {

struct MlpArchitecture {
    int hidden_layers = 8;
    int width = 16;
};

/// Per-feature affine map z = (x - mean) / scale.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    /// Zero-variance features get scale 1.
    static Standardizer fit(const RowMatrixXd& data);
    static Standardizer identity(Index dim);
    RowMatrixXd apply(const RowMatrixXd& data) const;
    RowMatrixXd invert(const RowMatrixXd& data) const;
};

struct MlpModel {
    std::vector<Eigen::MatrixXd> weights;  ///< layer l maps dims[l] -> dims[l+1]; shape dims[l+1] x dims[l]
    std::vector<Eigen::VectorXd> biases;
    Standardizer input_norm;
    Standardizer output_norm;

    /// Fan-in scaled uniform weights U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases, identity normalization.
    static MlpModel initialize(Index input_dim, Index output_dim, const MlpArchitecture& arch, std::uint64_t seed);

    Index input_dim() const { return weights.front().cols(); }
    Index output_dim() const { return weights.back().rows(); }
    std::vector<Index> layer_dims() const;
    Index parameter_count() const;
    void validate() const;
};

/// Single sample, raw units in and out.
Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::VectorXd& x);
/// One sample per row, raw units in and out.
RowMatrixXd mlp_predict(const MlpModel& model, const RowMatrixXd& X);
/// Hidden-layer activations of one sample (for inspection and tests).
std::vector<Eigen::VectorXd> mlp_hidden_activations(const MlpModel& model, const Eigen::VectorXd& x);

struct MlpGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

/// Normalized-space MSE (mean over samples and outputs) of the model on raw
/// (X, Y); fills `gradient` with its derivative w.r.t. every weight and bias.
double mlp_loss(const MlpModel& model, const RowMatrixXd& X, const RowMatrixXd& Y, MlpGradient* gradient = nullptr);

struct TrainConfig {
    double learning_rate = 1e-3;
    Index batch_size = 256;
    int max_epochs = 2000;
    int patience = 100;
    std::uint64_t seed = 0;
    /// Share of the training rows held out for early stopping when no
    /// validation set is passed to mlp_train.
    double validation_fraction = 0.1;
    MlpArchitecture architecture;

    void validate() const;
    nlohmann::json to_json() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_mse = 0.0;
    double validation_mse = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_validation_mse = 0.0;
    bool early_stopped = false;
    double seconds = 0.0;
};

struct TrainResult {
    MlpModel model;  ///< parameters of the best validation epoch
    TrainLog log;
};

/// Trains on (X, Y) with a held-out fraction of the rows for early stopping.
TrainResult mlp_train(const RowMatrixXd& X, const RowMatrixXd& Y, const TrainConfig& cfg);
/// Trains on (X, Y) with early stopping on (Xv, Yv).
TrainResult mlp_train(const RowMatrixXd& X, const RowMatrixXd& Y, const RowMatrixXd& Xv, const RowMatrixXd& Yv,
                      const TrainConfig& cfg);

struct RmseReport {
    Index count = 0;
    Eigen::VectorXd per_output;  ///< RMSE of each output component
    Eigen::VectorXd mean_error;  ///< mean signed error (prediction - truth) per component
    double aggregate = 0.0;      ///< RMSE over all components pooled
    double max_abs_error = 0.0;

    nlohmann::json to_json() const;
};

RmseReport evaluate_rmse(const RowMatrixXd& predictions, const RowMatrixXd& truth);
RmseReport evaluate_rmse(const MlpModel& model, const RowMatrixXd& X, const RowMatrixXd& Y);

/// Model file: "LIMDA-MLP 1", a JSON header line (dims, activation, extra
/// metadata, payload checksum), then little-endian float64 blocks: for each
/// layer W (row-major) and b, followed by input mean/scale and output mean/scale.
void model_write(const std::filesystem::path& path, const MlpModel& model,
                 const nlohmann::json& extra = nlohmann::json::object());
MlpModel model_read(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace limda
