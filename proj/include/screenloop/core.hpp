#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "screenloop/model_config.hpp"

namespace screenloop {

using SampleId = std::size_t;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TaskKind { classification, regression };

/// Fixed-width bit vector used for molecular fingerprints.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t n_bits);
    /// Parses a string of '0'/'1' characters, most significant position first.
    static BitVector from_string(std::string_view bits);

    std::size_t size() const noexcept { return n_bits_; }
    bool test(std::size_t i) const;
    void set(std::size_t i, bool value = true);
    std::size_t count() const noexcept;
    std::size_t count_and(const BitVector& other) const;
    std::size_t count_or(const BitVector& other) const;
    std::string to_string() const;

    friend bool operator==(const BitVector&, const BitVector&) = default;

private:
    std::size_t n_bits_ = 0;
    std::vector<std::uint64_t> words_;
};

using RealColumn = std::vector<double>;
using BitColumn = std::vector<BitVector>;
using AuxColumn = std::variant<RealColumn, BitColumn>;

/// Immutable-by-convention target/validation/test data. Sample ids are the
/// dense row indices 0..n-1; `source_rows` maps each row back to the row of
/// the dataset it was carved from (identity for freshly loaded data).
struct Dataset {
    TaskKind task = TaskKind::classification;
    FeatureMatrix features;
    std::vector<int> classes;        // classification labels, one per row
    std::vector<double> targets;     // regression labels, one per row
    std::size_t n_classes = 0;       // 0 for regression
    std::map<std::string, AuxColumn, std::less<>> aux;
    std::vector<std::size_t> source_rows;

    std::size_t n_samples() const noexcept { return static_cast<std::size_t>(features.rows()); }
    std::size_t n_features() const noexcept { return static_cast<std::size_t>(features.cols()); }
    bool is_classification() const noexcept { return task == TaskKind::classification; }

    /// Rows `ids` (in that order) as a new dataset with dense ids.
    Dataset subset(std::span<const SampleId> ids) const;

    const RealColumn& real_column(std::string_view name) const;
    const BitColumn& bit_column(std::string_view name) const;

    /// Throws InvalidArgument if any structural invariant is broken.
    void validate() const;
};

Dataset make_classification_dataset(FeatureMatrix features, std::vector<int> classes,
                                    std::size_t n_classes = 0);
Dataset make_regression_dataset(FeatureMatrix features, std::vector<double> targets);

/// Disjoint observation/inference split of the target ids.
class PartitionState {
public:
    PartitionState() = default;

    const std::vector<SampleId>& obs_ids() const noexcept { return obs_; }
    /// Remaining ids in ascending order.
    std::vector<SampleId> inf_ids() const;
    bool in_inference(SampleId id) const { return id < in_inf_.size() && in_inf_[id]; }
    std::size_t n_obs() const noexcept { return obs_.size(); }
    std::size_t n_inf() const noexcept { return n_inf_; }
    std::size_t n_target() const noexcept { return in_inf_.size(); }
    std::size_t step() const noexcept { return step_; }

    friend PartitionState partition_init(std::size_t n_target);
    friend PartitionState transfer_batch(PartitionState state, std::span<const SampleId> batch_ids);
    friend bool operator==(const PartitionState&, const PartitionState&) = default;

private:
    std::vector<SampleId> obs_;
    std::vector<bool> in_inf_;
    std::size_t n_inf_ = 0;
    std::size_t step_ = 0;
};

PartitionState partition_init(std::size_t n_target);
PartitionState transfer_batch(PartitionState state, std::span<const SampleId> batch_ids);

/// Model output for one sample: class probabilities or ensemble outputs.
class Prediction {
public:
    static Prediction from_probs(std::vector<double> probs);
    static Prediction from_members(std::vector<double> member_values);

    bool is_classification() const noexcept { return !probs_.empty(); }
    const std::vector<double>& probs() const noexcept { return probs_; }
    const std::vector<double>& member_values() const noexcept { return members_; }

    int top_class() const;
    double confidence() const;
    double mean() const;
    /// Population variance across ensemble members.
    double variance() const;

private:
    std::vector<double> probs_;
    std::vector<double> members_;
};

enum class PolicyKind {
    least_confidence,
    random,
    bald,
    qbc_variance,
    fixed_order,
    tanimoto_diversity,
};

enum class OrderDirection { ascending, descending };

struct AcquisitionPolicy {
    PolicyKind kind = PolicyKind::least_confidence;
    std::string order_key = "sample_id";   // fixed_order only
    OrderDirection direction = OrderDirection::ascending;
    std::string fingerprint_column = "fingerprint";  // tanimoto_diversity only

    friend bool operator==(const AcquisitionPolicy&, const AcquisitionPolicy&) = default;
};

enum class StoppingMode { chernoff, naive, mse_threshold };

struct StoppingRule {
    StoppingMode mode = StoppingMode::chernoff;
    std::size_t patience = 1;
    double t_mse = 0.1;

    friend bool operator==(const StoppingRule&, const StoppingRule&) = default;
};

/// How the first batch is chosen when nothing has been observed yet.
enum class ColdStart { uniform_predictions, random_batch };

struct CampaignConfig {
    double gamma = 0.98;
    double delta = 0.05;
    std::size_t batch_size = 1000;
    AcquisitionPolicy acquisition;
    StoppingRule stopping;
    ModelConfig model;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_steps;
    ColdStart cold_start = ColdStart::uniform_predictions;
    bool warm_start = false;

    /// Range checks plus policy/model compatibility.
    void validate() const;

    friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

/// One acquisition round of a campaign. In regression mode the *_acc fields
/// hold mean squared errors instead of accuracies.
struct StepRecord {
    std::size_t step = 0;
    std::size_t n_obs = 0;
    std::size_t n_inf = 0;
    std::size_t batch_size = 0;
    double batch_accuracy = 0.0;
    std::optional<double> alpha;
    std::optional<double> est_system_accuracy;
    std::optional<double> true_system_accuracy;
    std::optional<double> inference_accuracy;
    std::optional<double> test_accuracy;
    bool stopped = false;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

std::string to_string(PolicyKind kind);
std::string to_string(StoppingMode mode);
std::string to_string(OrderDirection direction);
std::string to_string(Optimizer optimizer);
std::string to_string(ColdStart cold_start);

}  // namespace screenloop
