#include "screenloop/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "screenloop/error.hpp"

namespace screenloop {

// ---------------------------------------------------------------- BitVector

BitVector::BitVector(std::size_t n_bits) : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

BitVector BitVector::from_string(std::string_view bits) {
    BitVector out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') {
            out.set(i);
        } else if (bits[i] != '0') {
            throw FormatError("fingerprint contains a character other than 0/1: '" +
                              std::string(bits) + "'");
        }
    }
    return out;
}

bool BitVector::test(std::size_t i) const {
    if (i >= n_bits_) throw InvalidArgument("bit index out of range");
    return (words_[i / 64] >> (i % 64)) & 1U;
}

void BitVector::set(std::size_t i, bool value) {
    if (i >= n_bits_) throw InvalidArgument("bit index out of range");
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value) {
        words_[i / 64] |= mask;
    } else {
        words_[i / 64] &= ~mask;
    }
}

std::size_t BitVector::count() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::size_t BitVector::count_and(const BitVector& other) const {
    if (other.n_bits_ != n_bits_) throw InvalidArgument("fingerprint widths differ");
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) n += std::popcount(words_[i] & other.words_[i]);
    return n;
}

std::size_t BitVector::count_or(const BitVector& other) const {
    if (other.n_bits_ != n_bits_) throw InvalidArgument("fingerprint widths differ");
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) n += std::popcount(words_[i] | other.words_[i]);
    return n;
}

std::string BitVector::to_string() const {
    std::string s(n_bits_, '0');
    for (std::size_t i = 0; i < n_bits_; ++i)
        if (test(i)) s[i] = '1';
    return s;
}

// ------------------------------------------------------------------ Dataset

Dataset Dataset::subset(std::span<const SampleId> ids) const {
    Dataset out;
    out.task = task;
    out.n_classes = n_classes;
    out.features.resize(static_cast<Eigen::Index>(ids.size()), features.cols());
    out.source_rows.reserve(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto id = ids[r];
        if (id >= n_samples()) throw InvalidArgument("subset id out of range");
        out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(id));
        out.source_rows.push_back(source_rows.empty() ? id : source_rows[id]);
        if (is_classification()) {
            out.classes.push_back(classes[id]);
        } else {
            out.targets.push_back(targets[id]);
        }
    }
    for (const auto& [name, column] : aux) {
        out.aux.emplace(name, std::visit(
                                  [&](const auto& col) -> AuxColumn {
                                      std::decay_t<decltype(col)> picked;
                                      picked.reserve(ids.size());
                                      for (auto id : ids) picked.push_back(col[id]);
                                      return picked;
                                  },
                                  column));
    }
    return out;
}

const RealColumn& Dataset::real_column(std::string_view name) const {
    auto it = aux.find(name);
    if (it == aux.end()) throw InvalidArgument("missing aux column '" + std::string(name) + "'");
    if (auto* col = std::get_if<RealColumn>(&it->second)) return *col;
    throw InvalidArgument("aux column '" + std::string(name) + "' is not numeric");
}

const BitColumn& Dataset::bit_column(std::string_view name) const {
    auto it = aux.find(name);
    if (it == aux.end()) throw InvalidArgument("missing fingerprint column '" + std::string(name) + "'");
    if (auto* col = std::get_if<BitColumn>(&it->second)) return *col;
    throw InvalidArgument("aux column '" + std::string(name) + "' is not a fingerprint column");
}

void Dataset::validate() const {
    const auto n = n_samples();
    if (n == 0) throw InvalidArgument("dataset has no samples");
    if (!features.allFinite()) throw InvalidArgument("dataset features contain non-finite values");
    if (is_classification()) {
        if (classes.size() != n) throw InvalidArgument("label count does not match sample count");
        for (int c : classes)
            if (c < 0 || static_cast<std::size_t>(c) >= n_classes)
                throw InvalidArgument("class label " + std::to_string(c) + " outside 0.." +
                                      std::to_string(n_classes) + "-1");
    } else {
        if (targets.size() != n) throw InvalidArgument("target count does not match sample count");
        for (double y : targets)
            if (!std::isfinite(y)) throw InvalidArgument("regression target is not finite");
    }
    if (!source_rows.empty() && source_rows.size() != n)
        throw InvalidArgument("source_rows length does not match sample count");
    for (const auto& [name, column] : aux) {
        const auto len = std::visit([](const auto& c) { return c.size(); }, column);
        if (len != n) throw InvalidArgument("aux column '" + name + "' has wrong length");
    }
}

Dataset make_classification_dataset(FeatureMatrix features, std::vector<int> classes,
                                    std::size_t n_classes) {
    Dataset d;
    d.task = TaskKind::classification;
    d.features = std::move(features);
    d.classes = std::move(classes);
    if (n_classes == 0 && !d.classes.empty())
        n_classes = static_cast<std::size_t>(*std::max_element(d.classes.begin(), d.classes.end())) + 1;
    d.n_classes = n_classes;
    d.source_rows.resize(d.n_samples());
    std::iota(d.source_rows.begin(), d.source_rows.end(), std::size_t{0});
    d.validate();
    return d;
}

Dataset make_regression_dataset(FeatureMatrix features, std::vector<double> targets) {
    Dataset d;
    d.task = TaskKind::regression;
    d.features = std::move(features);
    d.targets = std::move(targets);
    d.source_rows.resize(d.n_samples());
    std::iota(d.source_rows.begin(), d.source_rows.end(), std::size_t{0});
    d.validate();
    return d;
}

// ----------------------------------------------------------- PartitionState

std::vector<SampleId> PartitionState::inf_ids() const {
    std::vector<SampleId> ids;
    ids.reserve(n_inf_);
    for (SampleId i = 0; i < in_inf_.size(); ++i)
        if (in_inf_[i]) ids.push_back(i);
    return ids;
}

PartitionState partition_init(std::size_t n_target) {
    if (n_target == 0) throw InvalidArgument("target set is empty");
    PartitionState s;
    s.in_inf_.assign(n_target, true);
    s.n_inf_ = n_target;
    return s;
}

PartitionState transfer_batch(PartitionState state, std::span<const SampleId> batch_ids) {
    // Validate the whole batch before mutating so a failed transfer leaves no trace.
    std::vector<bool> seen(state.in_inf_.size(), false);
    for (auto id : batch_ids) {
        if (!state.in_inference(id))
            throw InvalidTransfer("sample " + std::to_string(id) + " is not in the inference set");
        if (seen[id]) throw InvalidTransfer("sample " + std::to_string(id) + " appears twice in batch");
        seen[id] = true;
    }
    for (auto id : batch_ids) {
        state.in_inf_[id] = false;
        state.obs_.push_back(id);
    }
    state.n_inf_ -= batch_ids.size();
    ++state.step_;
    return state;
}

// --------------------------------------------------------------- Prediction

Prediction Prediction::from_probs(std::vector<double> probs) {
    if (probs.empty()) throw InvalidArgument("probability vector is empty");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("probabilities do not sum to 1");
    Prediction out;
    out.probs_ = std::move(probs);
    return out;
}

Prediction Prediction::from_members(std::vector<double> member_values) {
    if (member_values.empty()) throw InvalidArgument("ensemble prediction has no members");
    Prediction out;
    out.members_ = std::move(member_values);
    return out;
}

int Prediction::top_class() const {
    if (!is_classification()) throw PolicyMismatch("top_class of a regression prediction");
    // First maximum wins, so ties resolve to the lowest class index.
    return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

double Prediction::confidence() const {
    if (!is_classification()) throw PolicyMismatch("confidence of a regression prediction");
    return *std::max_element(probs_.begin(), probs_.end());
}

double Prediction::mean() const {
    if (is_classification()) throw PolicyMismatch("mean of a classification prediction");
    return std::accumulate(members_.begin(), members_.end(), 0.0) / static_cast<double>(members_.size());
}

double Prediction::variance() const {
    const double m = mean();
    double ss = 0.0;
    for (double v : members_) ss += (v - m) * (v - m);
    return ss / static_cast<double>(members_.size());
}

// ------------------------------------------------------------------ configs

void ModelConfig::validate() const {
    if (n_hidden_layers == 0) throw ConfigError("/model/n_hidden_layers", "must be positive");
    if (hidden_size == 0) throw ConfigError("/model/hidden_size", "must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("/model/learning_rate", "must be positive");
    if (!(grad_norm_clip > 0.0)) throw ConfigError("/model/grad_norm_clip", "must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("/model/dropout", "must lie in [0,1)");
    if (max_epochs == 0) throw ConfigError("/model/max_epochs", "must be positive");
    if (train_batch_size == 0) throw ConfigError("/model/train_batch_size", "must be positive");
    if (early_stop_patience == 0) throw ConfigError("/model/early_stop_patience", "must be positive");
    if (n_ensemble_members == 0) throw ConfigError("/model/n_ensemble_members", "must be positive");
}

void CampaignConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("/campaign/gamma", "must lie in (0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("/campaign/delta", "must lie in (0,1)");
    if (batch_size == 0) throw ConfigError("/campaign/batch_size", "must be at least 1");
    if (max_steps && *max_steps == 0) throw ConfigError("/campaign/max_steps", "must be positive");
    if (stopping.patience == 0) throw ConfigError("/stopping/patience", "must be at least 1");
    if (stopping.mode == StoppingMode::mse_threshold && !(stopping.t_mse > 0.0))
        throw ConfigError("/stopping/t_mse", "must be positive");
    model.validate();
    const bool needs_ensemble =
        acquisition.kind == PolicyKind::bald || acquisition.kind == PolicyKind::qbc_variance;
    if (needs_ensemble && model.n_ensemble_members < 2)
        throw ConfigError("/model/n_ensemble_members",
                          to_string(acquisition.kind) + " requires at least 2 ensemble members");
}

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::least_confidence: return "least_confidence";
        case PolicyKind::random: return "random";
        case PolicyKind::bald: return "bald";
        case PolicyKind::qbc_variance: return "qbc_variance";
        case PolicyKind::fixed_order: return "fixed_order";
        case PolicyKind::tanimoto_diversity: return "tanimoto_diversity";
    }
    return "unknown";
}

std::string to_string(StoppingMode mode) {
    switch (mode) {
        case StoppingMode::chernoff: return "chernoff";
        case StoppingMode::naive: return "naive";
        case StoppingMode::mse_threshold: return "mse_threshold";
    }
    return "unknown";
}

std::string to_string(OrderDirection direction) {
    return direction == OrderDirection::ascending ? "ascending" : "descending";
}

std::string to_string(Optimizer optimizer) { return optimizer == Optimizer::sgd ? "sgd" : "adam"; }

std::string to_string(ColdStart cold_start) {
    return cold_start == ColdStart::uniform_predictions ? "uniform" : "random_batch";
}

}  // namespace screenloop
