#include "screenloop/engine.hpp"

#include <algorithm>
#include <cmath>

#include "screenloop/acquisition.hpp"
#include "screenloop/error.hpp"
#include "screenloop/metrics.hpp"
#include "screenloop/parallel.hpp"
#include "screenloop/predictor.hpp"

namespace screenloop {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool is_model_based(PolicyKind kind) {
    return kind == PolicyKind::least_confidence || kind == PolicyKind::bald || kind == PolicyKind::qbc_variance;
}

void preflight(const CampaignConfig& config, const CampaignData& data) {
    config.validate();
    if (data.target == nullptr) throw InvalidArgument("campaign has no target set");
    if (data.val == nullptr || data.val->n_samples() == 0)
        throw InvalidArgument("campaign needs a non-empty validation set");
    data.target->validate();
    const auto& target = *data.target;
    if (data.val->task != target.task || data.val->n_features() != target.n_features())
        throw InvalidArgument("validation set does not match the target set");
    if (data.test != nullptr && data.test->n_samples() > 0 &&
        (data.test->task != target.task || data.test->n_features() != target.n_features()))
        throw InvalidArgument("test set does not match the target set");

    const auto kind = config.acquisition.kind;
    const auto mode = config.stopping.mode;
    if (target.is_classification()) {
        if (kind == PolicyKind::qbc_variance)
            throw PolicyMismatch("qbc_variance acquisition needs a regression task");
        if (mode == StoppingMode::mse_threshold)
            throw PolicyMismatch("mse_threshold stopping needs a regression task");
    } else {
        if (kind == PolicyKind::least_confidence || kind == PolicyKind::bald)
            throw PolicyMismatch(to_string(kind) + " acquisition needs a classification task");
        if (mode != StoppingMode::mse_threshold)
            throw PolicyMismatch(to_string(mode) + " stopping needs a classification task");
    }
    if (kind == PolicyKind::fixed_order && config.acquisition.order_key != "sample_id")
        (void)target.real_column(config.acquisition.order_key);
    if (kind == PolicyKind::tanimoto_diversity) (void)target.bit_column(config.acquisition.fingerprint_column);
}

// Training data built from the observed ids and the labels the oracle returned.
Dataset observed_dataset(const Dataset& target, const std::vector<SampleId>& obs_ids,
                         const std::vector<Label>& obs_labels) {
    Dataset train = target.subset(obs_ids);
    for (std::size_t i = 0; i < obs_ids.size(); ++i) {
        if (train.is_classification()) {
            train.classes[i] = std::get<int>(obs_labels[i]);
        } else {
            train.targets[i] = std::get<double>(obs_labels[i]);
        }
    }
    return train;
}

std::vector<Prediction> ensemble_class_predictions(const std::vector<Model>& models, const FeatureMatrix& features,
                                                   std::span<const SampleId> ids, std::size_t n_classes,
                                                   std::vector<std::vector<Prediction>>* per_member) {
    if (models.empty()) {
        const std::vector<double> uniform(n_classes, 1.0 / static_cast<double>(n_classes));
        return std::vector<Prediction>(ids.size(), Prediction::from_probs(uniform));
    }
    std::vector<std::vector<Prediction>> members;
    members.reserve(models.size());
    for (const auto& m : models) members.push_back(predict_proba(m, features, ids));
    std::vector<Prediction> mean;
    mean.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (models.size() == 1) {
            mean.push_back(members[0][i]);
            continue;
        }
        std::vector<double> probs(members[0][i].probs().size(), 0.0);
        for (const auto& member : members)
            for (std::size_t k = 0; k < probs.size(); ++k) probs[k] += member[i].probs()[k];
        for (auto& p : probs) p /= static_cast<double>(models.size());
        mean.push_back(Prediction::from_probs(std::move(probs)));
    }
    if (per_member != nullptr) *per_member = std::move(members);
    return mean;
}

std::vector<Prediction> ensemble_regression_predictions(const std::vector<Model>& models,
                                                        const FeatureMatrix& features,
                                                        std::span<const SampleId> ids) {
    if (models.empty()) return std::vector<Prediction>(ids.size(), Prediction::from_members({0.0}));
    return predict_members(models, features, ids);
}

Label checked_label(const Label& label, const Dataset& target, SampleId id) {
    if (target.is_classification()) {
        const int* c = std::get_if<int>(&label);
        if (c == nullptr || *c < 0 || static_cast<std::size_t>(*c) >= target.n_classes)
            throw OracleError("oracle returned an invalid class label for sample " + std::to_string(id));
        return label;
    }
    const double* v = std::get_if<double>(&label);
    if (v == nullptr || !std::isfinite(*v))
        throw OracleError("oracle returned an invalid regression label for sample " + std::to_string(id));
    return label;
}

std::optional<double> test_metric(const std::vector<Model>& models, const Dataset* test, std::size_t n_classes) {
    if (test == nullptr || test->n_samples() == 0) return std::nullopt;
    const auto ids = all_ids(test->n_samples());
    if (test->is_classification()) {
        const auto preds = ensemble_class_predictions(models, test->features, ids, n_classes, nullptr);
        return batch_accuracy(preds, test->classes);
    }
    const auto preds = ensemble_regression_predictions(models, test->features, ids);
    std::vector<double> means;
    means.reserve(preds.size());
    for (const auto& p : preds) means.push_back(p.mean());
    return mean_squared_error(means, test->targets);
}

}  // namespace

std::uint64_t step_seed(std::uint64_t seed, std::size_t step, std::uint64_t stream) {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + static_cast<std::uint64_t>(step));
}

LabelOracle make_dataset_oracle(const Dataset& target) {
    return [&target](SampleId id) -> Label {
        if (id >= target.n_samples()) throw OracleError("no sample with id " + std::to_string(id));
        if (target.is_classification()) return target.classes[id];
        return target.targets[id];
    };
}

CampaignLog run_campaign(const CampaignConfig& config, const CampaignData& data, const LabelOracle& oracle,
                         const CampaignOptions& options) {
    preflight(config, data);
    const Dataset& target = *data.target;
    const Dataset& val = *data.val;
    const bool classification = target.is_classification();
    const auto n_target = target.n_samples();

    CampaignLog log;
    log.config = config;
    log.task = target.task;
    log.n_target = n_target;

    const auto kind = config.acquisition.kind;
    const BitColumn* fingerprints =
        kind == PolicyKind::tanimoto_diversity ? &target.bit_column(config.acquisition.fingerprint_column) : nullptr;
    std::vector<double> static_scores;
    if (kind == PolicyKind::fixed_order)
        static_scores = score_fixed_order(target, config.acquisition.order_key, config.acquisition.direction);

    PartitionState state = partition_init(n_target);
    std::vector<Label> obs_labels;
    std::vector<Model> models;
    std::vector<double> history;
    std::mt19937_64 policy_rng(step_seed(config.seed, 0, 1));
    std::vector<std::size_t> position(n_target, 0);

    while (true) {
        const std::size_t t = state.step() + 1;
        const auto inf = state.inf_ids();

        if (state.n_obs() > 0) {
            const Dataset train_set = observed_dataset(target, state.obs_ids(), obs_labels);
            const bool warm = config.warm_start && !models.empty();
            models = train_ensemble(config.model, train_set, val, step_seed(config.seed, t), warm ? &models : nullptr);
        }

        StepDetail detail;
        auto& snap = detail.predictions;
        snap.ids = inf;
        std::vector<Prediction> preds;
        std::vector<std::vector<Prediction>> member_preds;
        if (classification) {
            preds = ensemble_class_predictions(models, target.features, inf, target.n_classes,
                                               kind == PolicyKind::bald ? &member_preds : nullptr);
            for (const auto& p : preds) {
                snap.top_class.push_back(p.top_class());
                snap.confidence.push_back(p.confidence());
            }
        } else {
            preds = ensemble_regression_predictions(models, target.features, inf);
            for (const auto& p : preds) {
                snap.value.push_back(p.mean());
                snap.variance.push_back(p.variance());
            }
        }
        for (std::size_t i = 0; i < inf.size(); ++i) position[inf[i]] = i;

        ScoredCandidates scored{inf, {}, kind};
        if (models.empty() && is_model_based(kind) && config.cold_start == ColdStart::random_batch) {
            scored.scores = score_random(inf.size(), policy_rng);
            scored.policy = PolicyKind::random;
        } else {
            switch (kind) {
                case PolicyKind::least_confidence: scored.scores = score_least_confidence(preds); break;
                case PolicyKind::random: scored.scores = score_random(inf.size(), policy_rng); break;
                case PolicyKind::bald:
                    scored.scores = member_preds.empty() ? std::vector<double>(inf.size(), 0.0)
                                                         : score_bald(member_preds);
                    break;
                case PolicyKind::qbc_variance: scored.scores = score_qbc_variance(preds); break;
                case PolicyKind::fixed_order:
                    for (auto id : inf) scored.scores.push_back(static_scores[id]);
                    break;
                case PolicyKind::tanimoto_diversity:
                    scored.scores = score_tanimoto_diversity(*fingerprints, state.obs_ids(), inf);
                    break;
            }
        }
        const auto batch = select_batch(scored, config.batch_size, fingerprints);

        state = transfer_batch(std::move(state), batch);

        try {
            for (auto id : batch) {
                const Label label = oracle(id);
                ++log.oracle_calls;
                detail.acquired_labels.push_back(checked_label(label, target, id));
            }
        } catch (const std::exception& e) {
            log.complete = false;
            log.error = std::string("label oracle failed at step ") + std::to_string(t) + ": " + e.what();
            break;
        }
        obs_labels.insert(obs_labels.end(), detail.acquired_labels.begin(), detail.acquired_labels.end());
        detail.acquired = batch;

        StepRecord record;
        record.step = t;
        record.n_obs = state.n_obs();
        record.n_inf = state.n_inf();
        record.batch_size = batch.size();

        StopDecision decision;
        if (classification) {
            std::vector<int> predicted, labels;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                predicted.push_back(snap.top_class[position[batch[i]]]);
                labels.push_back(std::get<int>(detail.acquired_labels[i]));
            }
            record.batch_accuracy = batch_accuracy(predicted, labels);
            if (config.stopping.mode == StoppingMode::chernoff) {
                decision = should_stop_chernoff(state, record.batch_accuracy, batch.size(), config.gamma, config.delta);
            } else {
                history.push_back(estimate_system_accuracy(state.n_obs(), state.n_inf(), record.batch_accuracy));
                decision = should_stop_naive(history, config.gamma, config.stopping.patience);
            }
        } else {
            std::vector<double> predicted, labels;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                predicted.push_back(snap.value[position[batch[i]]]);
                labels.push_back(std::get<double>(detail.acquired_labels[i]));
            }
            record.batch_accuracy = mean_squared_error(predicted, labels);
            history.push_back(record.batch_accuracy);
            decision = should_stop_regression(history, config.stopping.t_mse, config.stopping.patience);
        }
        if (state.n_inf() == 0 && !decision.stop) {
            decision.stop = true;
            decision.reason = StopReason::inference_exhausted;
        }
        record.alpha = decision.alpha;
        record.est_system_accuracy = decision.est_system_accuracy;
        record.test_accuracy = test_metric(models, data.test, target.n_classes);
        record.stopped = decision.stop;

        log.records.push_back(record);
        log.details.push_back(std::move(detail));

        if (decision.stop) {
            log.stopping_time = t;
            log.stop_reason = decision.reason;
            break;
        }
        if (config.max_steps && t >= *config.max_steps) {
            log.stop_reason = StopReason::max_steps;
            break;
        }
    }

    if (log.complete && !log.details.empty()) {
        const auto& obs = state.obs_ids();
        log.hybrid.resize(n_target);
        for (std::size_t i = 0; i < obs.size(); ++i)
            log.hybrid[obs[i]] = HybridReadout{obs[i], obs_labels[i], ReadoutSource::observed};
        const auto& last = log.details.back().predictions;
        for (std::size_t i = 0; i < last.size(); ++i) {
            const auto id = last.ids[i];
            if (!state.in_inference(id)) continue;
            const Label label = classification ? Label{last.top_class[i]} : Label{last.value[i]};
            log.hybrid[id] = HybridReadout{id, label, ReadoutSource::predicted};
        }
    }
    if (options.evaluate_ground_truth) annotate_ground_truth(log, target);
    return log;
}

std::vector<CampaignLog> run_comparison(std::span<const CampaignConfig> configs, const CampaignData& data,
                                        const CampaignOptions& options) {
    if (configs.empty()) throw InvalidArgument("comparison needs at least one config");
    for (const auto& c : configs)
        if (c.batch_size != configs.front().batch_size)
            throw InvalidArgument("compared campaigns must share the acquisition batch size");
    if (data.target == nullptr) throw InvalidArgument("comparison has no target set");
    const LabelOracle oracle = make_dataset_oracle(*data.target);
    std::vector<CampaignLog> logs(configs.size());
    parallel_for(configs.size(), [&](std::size_t i) { logs[i] = run_campaign(configs[i], data, oracle, options); });
    return logs;
}

void annotate_ground_truth(CampaignLog& log, const Dataset& target) {
    if (target.n_samples() != log.n_target) throw InvalidArgument("target set does not match the campaign log");
    for (std::size_t s = 0; s < log.details.size(); ++s) {
        auto& detail = log.details[s];
        auto& record = log.records[s];
        auto& snap = detail.predictions;
        std::vector<bool> acquired(target.n_samples(), false);
        for (auto id : detail.acquired) acquired[id] = true;

        std::size_t remaining = 0;
        if (target.is_classification()) {
            snap.correct.assign(snap.size(), false);
            std::size_t correct_remaining = 0;
            for (std::size_t i = 0; i < snap.size(); ++i) {
                const auto id = snap.ids[i];
                snap.correct[i] = snap.top_class[i] == target.classes[id];
                if (acquired[id]) continue;
                ++remaining;
                if (snap.correct[i]) ++correct_remaining;
            }
            record.true_system_accuracy = static_cast<double>(record.n_obs + correct_remaining) /
                                          static_cast<double>(log.n_target);
            if (remaining > 0)
                record.inference_accuracy = static_cast<double>(correct_remaining) / static_cast<double>(remaining);
        } else {
            double ss = 0.0;
            for (std::size_t i = 0; i < snap.size(); ++i) {
                const auto id = snap.ids[i];
                if (acquired[id]) continue;
                ++remaining;
                const double d = snap.value[i] - target.targets[id];
                ss += d * d;
            }
            if (remaining > 0) record.inference_accuracy = ss / static_cast<double>(remaining);
        }
    }
}

}  // namespace screenloop
