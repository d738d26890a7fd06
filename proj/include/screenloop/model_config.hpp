#pragma once

#include <cstddef>

namespace screenloop {

enum class Optimizer { sgd, adam };

/// Hyperparameters of the residual MLP. Defaults are the MNIST column of the
/// reference hyperparameter table.
struct ModelConfig {
    std::size_t n_hidden_layers = 2;
    std::size_t hidden_size = 512;
    double learning_rate = 0.001;
    double grad_norm_clip = 1.0;
    double dropout = 0.1;
    std::size_t max_epochs = 1000;
    std::size_t train_batch_size = 1024;
    std::size_t early_stop_patience = 50;
    std::size_t n_ensemble_members = 1;
    Optimizer optimizer = Optimizer::sgd;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace screenloop
