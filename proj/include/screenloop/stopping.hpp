#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include "screenloop/core.hpp"

namespace screenloop {

enum class StopReason { not_stopped, threshold_met, inference_exhausted, max_steps };

std::string to_string(StopReason reason);

struct StopDecision {
    bool stop = false;
    std::optional<double> alpha;
    std::optional<double> est_system_accuracy;
    StopReason reason = StopReason::not_stopped;
};

/// Bernoulli KL divergence KL(mu_hat || a) in nats, with 0 log 0 = 0.
double kl_bernoulli(double mu_hat, double a);

/// Smallest a in [0, mu_hat] with KL(mu_hat || a) <= ln(1/delta) / n. The
/// bisection result is rounded down: it never exceeds the exact root.
double chernoff_lower_bound(double mu_hat, std::size_t n, double delta);

/// (n_obs + estimate * n_inf) / (n_obs + n_inf).
double estimate_system_accuracy(std::size_t n_obs, std::size_t n_inf, double inf_accuracy_estimate);

/// Evaluated on post-transfer set sizes; `n_b` is the size of the batch
/// just acquired.
StopDecision should_stop_chernoff(const PartitionState& state, double batch_accuracy, std::size_t n_b, double gamma,
                                  double delta);

/// Stops when the last `patience` plug-in estimates all exceed gamma.
StopDecision should_stop_naive(std::span<const double> history, double gamma, std::size_t patience);

/// Stops when the last `patience` batch MSE values are all below t_mse.
/// Heuristic: there is no coverage guarantee behind this rule.
StopDecision should_stop_regression(std::span<const double> mse_history, double t_mse, std::size_t patience);

/// Fraction of `trials` in which the bound computed from n Bernoulli(mu_true)
/// draws exceeds mu_true.
double validate_bound_coverage(double mu_true, std::size_t n, double delta, std::size_t trials,
                               std::mt19937_64& rng);

}  // namespace screenloop
