#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "screenloop/core.hpp"
#include "screenloop/stopping.hpp"

namespace screenloop {

/// A class index (classification) or a real value (regression).
using Label = std::variant<int, double>;

/// Runs the experiment for one target sample and returns its label.
using LabelOracle = std::function<Label(SampleId)>;

/// Oracle that reads the labels stored in `target` (simulation).
LabelOracle make_dataset_oracle(const Dataset& target);

/// Model outputs on the inference set at one step, before the batch was
/// removed. Classification fills `top_class`/`confidence`; regression fills
/// `value`/`variance`.
struct PredictionSnapshot {
    std::vector<SampleId> ids;
    std::vector<int> top_class;
    std::vector<double> confidence;
    std::vector<double> value;
    std::vector<double> variance;
    /// Ground-truth correctness of each prediction; simulation-only, filled
    /// after the campaign from the target labels.
    std::vector<bool> correct;

    std::size_t size() const noexcept { return ids.size(); }
};

struct StepDetail {
    std::vector<SampleId> acquired;
    std::vector<Label> acquired_labels;
    PredictionSnapshot predictions;
};

enum class ReadoutSource { observed, predicted };

struct HybridReadout {
    SampleId id = 0;
    Label label;
    ReadoutSource source = ReadoutSource::observed;
};

struct CampaignLog {
    CampaignConfig config;
    TaskKind task = TaskKind::classification;
    std::size_t n_target = 0;
    std::vector<StepRecord> records;
    std::vector<StepDetail> details;
    std::optional<std::size_t> stopping_time;
    StopReason stop_reason = StopReason::not_stopped;
    /// Sorted by id; observed labels for acquired samples, predictions for the rest.
    std::vector<HybridReadout> hybrid;
    std::size_t oracle_calls = 0;
    bool complete = true;
    std::string error;
};

struct CampaignData {
    const Dataset* target = nullptr;
    const Dataset* val = nullptr;
    const Dataset* test = nullptr;  // optional held-out monitoring set
};

struct CampaignOptions {
    /// Fill true system/inference accuracy from the target's stored labels
    /// after the run. Never used for acquisition or stopping.
    bool evaluate_ground_truth = true;
};

/// The acquire-label-bound-stop loop over a fixed target set.
CampaignLog run_campaign(const CampaignConfig& config, const CampaignData& data, const LabelOracle& oracle,
                         const CampaignOptions& options = {});

/// One campaign per config on shared data; campaigns run in parallel.
std::vector<CampaignLog> run_comparison(std::span<const CampaignConfig> configs, const CampaignData& data,
                                        const CampaignOptions& options = {});

/// Simulation-only metrics computed from logged predictions and the target
/// labels: true system accuracy, inference accuracy (or MSE) and
/// per-prediction correctness.
void annotate_ground_truth(CampaignLog& log, const Dataset& target);

/// Deterministic seed for step `step` (and an independent `stream`) of a
/// campaign seeded with `seed`.
std::uint64_t step_seed(std::uint64_t seed, std::size_t step, std::uint64_t stream = 0);

}  // namespace screenloop
