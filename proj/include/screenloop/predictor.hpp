#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "screenloop/core.hpp"
#include "screenloop/mlp.hpp"
#include "screenloop/model_config.hpp"

namespace screenloop {

using Network = ResidualMlp<float>;

/// A trained residual MLP plus what is needed to interpret its outputs.
class Model {
public:
    Model() = default;
    Model(ModelConfig config, TaskKind task, std::size_t input_dim, std::size_t n_classes);

    const ModelConfig& config() const noexcept { return config_; }
    TaskKind task() const noexcept { return task_; }
    std::size_t input_dim() const noexcept { return network_.input_dim(); }
    /// K for classification, 1 for regression.
    std::size_t n_outputs() const noexcept { return network_.n_outputs(); }

    Network& network() noexcept { return network_; }
    const Network& network() const noexcept { return network_; }

    // Regression targets are standardized during training.
    double target_mean() const noexcept { return target_mean_; }
    double target_scale() const noexcept { return target_scale_; }
    void set_target_standardization(double mean, double scale);

    std::size_t epochs_run() const noexcept { return epochs_run_; }
    double best_val_loss() const noexcept { return best_val_loss_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    void set_training_metadata(std::size_t epochs_run, std::size_t best_epoch, double best_val_loss);

    /// Raw outputs (logits, or standardized regression values) for the rows
    /// `ids` of `features`, one column per id.
    Eigen::MatrixXf raw_outputs(const FeatureMatrix& features, std::span<const SampleId> ids) const;

private:
    ModelConfig config_;
    TaskKind task_ = TaskKind::classification;
    Network network_;
    double target_mean_ = 0.0;
    double target_scale_ = 1.0;
    std::size_t epochs_run_ = 0;
    std::size_t best_epoch_ = 0;
    double best_val_loss_ = 0.0;
};

/// Row ids 0..n-1.
std::vector<SampleId> all_ids(std::size_t n);

/// Trains from scratch (or from `warm_start` parameters) with minibatch
/// gradient descent and validation-loss early stopping; returns the
/// best-validation-epoch parameters.
Model train(const ModelConfig& config, const Dataset& train_set, const Dataset& val_set, std::uint64_t seed,
            const Model* warm_start = nullptr);

/// Mean loss of `model` on `data` (cross-entropy or MSE in label units).
double evaluate_loss(const Model& model, const Dataset& data);

std::vector<Prediction> predict_proba(const Model& model, const FeatureMatrix& features,
                                      std::span<const SampleId> ids);
std::vector<Prediction> predict_proba(const Model& model, const FeatureMatrix& features);

/// Member m is trained with seed base_seed + m.
std::vector<Model> train_ensemble(const ModelConfig& config, const Dataset& train_set, const Dataset& val_set,
                                  std::uint64_t base_seed, const std::vector<Model>* warm_start = nullptr);

/// Regression outputs of one model in label units.
std::vector<double> predict_values(const Model& model, const FeatureMatrix& features,
                                   std::span<const SampleId> ids);

struct RegressionOutput {
    std::vector<double> mean;
    std::vector<double> variance;  // population variance across members
};

RegressionOutput predict_regression(std::span<const Model> ensemble, const FeatureMatrix& features,
                                    std::span<const SampleId> ids);
RegressionOutput predict_regression(std::span<const Model> ensemble, const FeatureMatrix& features);

/// Ensemble regression outputs as per-sample member vectors.
std::vector<Prediction> predict_members(std::span<const Model> ensemble, const FeatureMatrix& features,
                                        std::span<const SampleId> ids);

/// Versioned JSON container with config, architecture and parameters.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace screenloop
