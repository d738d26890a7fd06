#include "screenloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "screenloop/error.hpp"
#include "screenloop/parallel.hpp"
#include "screenloop/predictor.hpp"

namespace screenloop {

double system_accuracy(const PartitionState& state, std::span<const Prediction> inf_predictions,
                       std::span<const int> inf_labels) {
    if (inf_predictions.size() != inf_labels.size())
        throw InvalidArgument("prediction and label counts differ");
    if (inf_predictions.size() != state.n_inf())
        throw InvalidArgument("predictions do not cover the inference set");
    if (state.n_target() == 0) throw InvalidArgument("target set is empty");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inf_predictions.size(); ++i)
        if (inf_predictions[i].top_class() == inf_labels[i]) ++correct;
    return static_cast<double>(state.n_obs() + correct) / static_cast<double>(state.n_target());
}

double batch_accuracy(std::span<const Prediction> predictions, std::span<const int> labels) {
    if (predictions.empty()) throw InvalidArgument("batch is empty");
    if (predictions.size() != labels.size()) throw InvalidArgument("prediction and label counts differ");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i].top_class() == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double batch_accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.empty()) throw InvalidArgument("batch is empty");
    if (predicted.size() != labels.size()) throw InvalidArgument("prediction and label counts differ");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> targets) {
    if (predicted.empty()) throw InvalidArgument("batch is empty");
    if (predicted.size() != targets.size()) throw InvalidArgument("prediction and target counts differ");
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) ss += (predicted[i] - targets[i]) * (predicted[i] - targets[i]);
    return ss / static_cast<double>(predicted.size());
}

CalibrationReport calibration_bins(std::span<const double> confidences, std::span<const bool> correct,
                                   std::size_t n_bins) {
    if (confidences.size() != correct.size()) throw InvalidArgument("confidence and correctness counts differ");
    if (n_bins < 2) throw InvalidArgument("calibration needs at least 2 bins");
    CalibrationReport report;
    report.bin_edges.resize(n_bins + 1);
    for (std::size_t b = 0; b <= n_bins; ++b)
        report.bin_edges[b] = static_cast<double>(b) / static_cast<double>(n_bins);
    report.bins.resize(n_bins);
    std::vector<double> conf_sum(n_bins, 0.0);
    std::vector<std::size_t> hits(n_bins, 0);
    const auto& edges = report.bin_edges;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("confidence outside [0,1]");
        auto b = std::min(n_bins - 1, static_cast<std::size_t>(c * static_cast<double>(n_bins)));
        while (b > 0 && c <= edges[b]) --b;
        while (b + 1 < n_bins && c > edges[b + 1]) ++b;
        ++report.bins[b].count;
        conf_sum[b] += c;
        if (correct[i]) ++hits[b];
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
        auto& bin = report.bins[b];
        if (bin.count == 0) continue;
        bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
        bin.accuracy = static_cast<double>(hits[b]) / static_cast<double>(bin.count);
    }
    return report;
}

std::optional<double> weak_calibration_violation(const CalibrationReport& report, std::size_t min_count) {
    std::vector<double> accuracies;
    for (const auto& bin : report.bins)
        if (bin.accuracy && bin.count >= std::max<std::size_t>(1, min_count)) accuracies.push_back(*bin.accuracy);
    if (accuracies.size() < 2) return std::nullopt;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < accuracies.size(); ++i)
        worst = std::max(worst, accuracies[i] - accuracies[i + 1]);
    return worst;
}

Lemma1Result validate_lemma1(const Lemma1Setup& setup, std::size_t n_b, std::size_t trials, std::mt19937_64& rng) {
    if (!setup.g) throw InvalidArgument("conditional accuracy function is missing");
    if (n_b == 0 || n_b >= setup.n) throw InvalidArgument("batch size must lie in [1, n)");
    if (trials == 0) throw InvalidArgument("trials must be positive");
    if (!(setup.confidence_low <= setup.confidence_high)) throw InvalidArgument("empty confidence range");

    std::uniform_real_distribution<double> conf(setup.confidence_low, setup.confidence_high);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> v(setup.n);
    std::vector<bool> hit(setup.n);
    std::vector<std::size_t> order(setup.n);
    double batch_sum = 0.0;
    double rest_sum = 0.0;
    double diff_sq_sum = 0.0;
    std::size_t batch_le_rest = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < setup.n; ++i) {
            v[i] = conf(rng);
            hit[i] = unit(rng) < setup.g(v[i]);
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_b), order.end(),
                          [&](std::size_t a, std::size_t b) { return v[a] != v[b] ? v[a] < v[b] : a < b; });
        std::size_t batch_hits = 0;
        for (std::size_t i = 0; i < n_b; ++i) batch_hits += hit[order[i]] ? 1 : 0;
        const auto total_hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
        const double batch_acc = static_cast<double>(batch_hits) / static_cast<double>(n_b);
        const double rest_acc =
            static_cast<double>(total_hits - batch_hits) / static_cast<double>(setup.n - n_b);
        batch_sum += batch_acc;
        rest_sum += rest_acc;
        diff_sq_sum += (rest_acc - batch_acc) * (rest_acc - batch_acc);
        if (batch_acc <= rest_acc) ++batch_le_rest;
    }
    const auto tr = static_cast<double>(trials);
    const double mean_diff = (rest_sum - batch_sum) / tr;
    const double var_diff = trials > 1 ? (diff_sq_sum - tr * mean_diff * mean_diff) / (tr - 1.0) : 0.0;
    return {batch_sum / tr, rest_sum / tr, static_cast<double>(batch_le_rest) / tr,
            std::sqrt(std::max(var_diff, 0.0) / tr)};
}

std::vector<SampleId> flag_hard_examples(const Dataset& dataset, std::size_t n_folds, const ModelConfig& model_config,
                                         std::uint64_t base_seed) {
    if (n_folds < 2) throw InvalidArgument("hard-example flagging needs at least 2 folds");
    if (dataset.n_samples() < n_folds) throw InvalidArgument("dataset is smaller than the number of folds");
    if (!dataset.is_classification()) throw PolicyMismatch("hard-example flagging needs a classification dataset");

    const auto n = dataset.n_samples();
    std::vector<SampleId> perm = all_ids(n);
    std::mt19937_64 rng(base_seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % n_folds;

    std::vector<std::vector<int>> predicted(n_folds);
    parallel_for(n_folds, [&](std::size_t m) {
        std::vector<SampleId> train_ids, held_out;
        for (SampleId id = 0; id < n; ++id) (fold_of[id] == m ? held_out : train_ids).push_back(id);
        // The held-out fold doubles as the early-stopping set.
        const Model model = train(model_config, dataset.subset(train_ids), dataset.subset(held_out), base_seed + m);
        const auto preds = predict_proba(model, dataset.features);
        predicted[m].reserve(n);
        for (const auto& p : preds) predicted[m].push_back(p.top_class());
    });

    std::vector<SampleId> hard;
    for (SampleId id = 0; id < n; ++id) {
        std::size_t mistakes = 0;
        for (std::size_t m = 0; m < n_folds; ++m)
            if (predicted[m][id] != dataset.classes[id]) ++mistakes;
        if (mistakes >= n_folds - 1) hard.push_back(id);
    }
    return hard;
}

double hard_set_fraction_acquired(std::span<const SampleId> obs_ids, std::span<const SampleId> hard_ids) {
    if (hard_ids.empty()) return 0.0;
    const std::unordered_set<SampleId> obs(obs_ids.begin(), obs_ids.end());
    std::size_t hit = 0;
    for (auto id : hard_ids)
        if (obs.contains(id)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(hard_ids.size());
}

double hard_set_fraction_acquired(const PartitionState& state, std::span<const SampleId> hard_ids) {
    return hard_set_fraction_acquired(state.obs_ids(), hard_ids);
}

}  // namespace screenloop
