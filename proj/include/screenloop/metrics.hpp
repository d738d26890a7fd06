#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "screenloop/core.hpp"
#include "screenloop/model_config.hpp"

namespace screenloop {

/// System accuracy: observed samples count as correct, inference samples
/// count when the predicted class matches. `inf_predictions` and
/// `inf_labels` are aligned with `state.inf_ids()`. Simulation only.
double system_accuracy(const PartitionState& state, std::span<const Prediction> inf_predictions,
                       std::span<const int> inf_labels);

/// Fraction of predictions whose top class equals the label.
double batch_accuracy(std::span<const Prediction> predictions, std::span<const int> labels);
double batch_accuracy(std::span<const int> predicted, std::span<const int> labels);

double mean_squared_error(std::span<const double> predicted, std::span<const double> targets);

struct CalibrationBin {
    std::size_t count = 0;
    std::optional<double> mean_confidence;  // absent for empty bins
    std::optional<double> accuracy;         // absent for empty bins
};

struct CalibrationReport {
    std::vector<double> bin_edges;  // n_bins + 1 values from 0 to 1
    std::vector<CalibrationBin> bins;
};

/// Equal-width, right-closed bins on [0,1]; confidence 0 falls in the first bin.
CalibrationReport calibration_bins(std::span<const double> confidences, std::span<const bool> correct,
                                   std::size_t n_bins = 10);

/// Largest accuracy drop between consecutive populated bins (bins with fewer
/// than `min_count` samples are skipped). Absent with fewer than 2 such bins.
std::optional<double> weak_calibration_violation(const CalibrationReport& report, std::size_t min_count = 1);

/// Synthetic model: confidences ~ Uniform(confidence_low, confidence_high),
/// a prediction with confidence v is correct with probability g(v).
struct Lemma1Setup {
    std::size_t n = 1000;
    double confidence_low = 0.5;
    double confidence_high = 1.0;
    std::function<double(double)> g;
};

struct Lemma1Result {
    double mean_batch_accuracy = 0.0;
    double mean_remaining_accuracy = 0.0;
    /// Fraction of trials with batch accuracy <= remaining accuracy.
    double fraction_batch_le_remaining = 0.0;
    /// Standard error of the mean of (remaining - batch) across trials.
    double se_difference = 0.0;
};

/// Per trial, selects the n_b least-confident samples and compares their
/// realized accuracy with that of the rest.
Lemma1Result validate_lemma1(const Lemma1Setup& setup, std::size_t n_b, std::size_t trials, std::mt19937_64& rng);

/// Trains one model per fold on the other folds and flags samples that at
/// least n_folds - 1 of the models misclassify. Returns sorted ids.
std::vector<SampleId> flag_hard_examples(const Dataset& dataset, std::size_t n_folds, const ModelConfig& model_config,
                                         std::uint64_t base_seed);

/// |obs ∩ hard| / |hard|, 0 when the hard set is empty.
double hard_set_fraction_acquired(const PartitionState& state, std::span<const SampleId> hard_ids);
double hard_set_fraction_acquired(std::span<const SampleId> obs_ids, std::span<const SampleId> hard_ids);

}  // namespace screenloop
