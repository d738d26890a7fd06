#include "screenloop/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "screenloop/error.hpp"

namespace screenloop {
namespace {

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace

std::vector<double> score_least_confidence(std::span<const Prediction> predictions) {
    std::vector<double> scores;
    scores.reserve(predictions.size());
    for (const auto& p : predictions) {
        if (!p.is_classification()) throw PolicyMismatch("least-confidence needs class probabilities");
        scores.push_back(1.0 - p.confidence());
    }
    return scores;
}

std::vector<double> score_random(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(n);
    for (auto& s : scores) s = u(rng);
    return scores;
}

std::vector<double> score_bald(std::span<const std::vector<Prediction>> member_predictions) {
    const auto m = member_predictions.size();
    if (m < 2) throw InvalidArgument("BALD needs at least 2 ensemble members");
    const auto n = member_predictions.front().size();
    for (const auto& member : member_predictions)
        if (member.size() != n) throw InvalidArgument("ensemble members predicted different sample counts");

    std::vector<double> scores(n);
    std::vector<double> mean;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& first = member_predictions.front()[i];
        if (!first.is_classification()) throw PolicyMismatch("BALD needs class probabilities");
        mean.assign(first.probs().size(), 0.0);
        double mean_entropy = 0.0;
        for (const auto& member : member_predictions) {
            const auto& probs = member[i].probs();
            if (probs.size() != mean.size()) throw InvalidArgument("ensemble members disagree on class count");
            for (std::size_t k = 0; k < probs.size(); ++k) mean[k] += probs[k];
            mean_entropy += entropy(probs);
        }
        for (auto& v : mean) v /= static_cast<double>(m);
        scores[i] = entropy(mean) - mean_entropy / static_cast<double>(m);
    }
    return scores;
}

std::vector<double> score_qbc_variance(std::span<const double> variance) {
    return {variance.begin(), variance.end()};
}

std::vector<double> score_qbc_variance(std::span<const Prediction> ensemble_predictions) {
    std::vector<double> scores;
    scores.reserve(ensemble_predictions.size());
    for (const auto& p : ensemble_predictions) {
        if (p.is_classification()) throw PolicyMismatch("QBC variance needs regression ensemble outputs");
        scores.push_back(p.variance());
    }
    return scores;
}

std::vector<double> score_fixed_order(const Dataset& dataset, std::string_view key_column,
                                      OrderDirection direction) {
    const auto n = dataset.n_samples();
    std::vector<double> keys(n);
    if (key_column == "sample_id") {
        std::iota(keys.begin(), keys.end(), 0.0);
    } else {
        const auto& column = dataset.real_column(key_column);
        std::copy(column.begin(), column.end(), keys.begin());
    }
    // Ascending order acquires small keys first, so negate them.
    if (direction == OrderDirection::ascending)
        for (auto& k : keys) k = -k;
    return keys;
}

double tanimoto_distance(const BitVector& a, const BitVector& b) {
    const auto uni = a.count_or(b);
    if (uni == 0) return 0.0;
    return 1.0 - static_cast<double>(a.count_and(b)) / static_cast<double>(uni);
}

std::vector<double> score_tanimoto_diversity(const BitColumn& fingerprints, std::span<const SampleId> acquired_ids,
                                             std::span<const SampleId> candidate_ids) {
    std::vector<double> scores(candidate_ids.size(), 1.0);
    for (std::size_t c = 0; c < candidate_ids.size(); ++c) {
        if (candidate_ids[c] >= fingerprints.size()) throw InvalidArgument("candidate id has no fingerprint");
        for (auto a : acquired_ids) {
            if (a >= fingerprints.size()) throw InvalidArgument("acquired id has no fingerprint");
            scores[c] = std::min(scores[c], tanimoto_distance(fingerprints[candidate_ids[c]], fingerprints[a]));
        }
    }
    return scores;
}

std::vector<SampleId> select_batch(const ScoredCandidates& scored, std::size_t n_b, const BitColumn* fingerprints) {
    if (n_b == 0) throw InvalidArgument("batch size must be at least 1");
    if (scored.ids.empty()) throw InvalidArgument("no candidates to select from");
    if (scored.ids.size() != scored.scores.size()) throw InvalidArgument("ids and scores differ in length");
    for (double s : scored.scores)
        if (!std::isfinite(s)) throw InvalidArgument("acquisition score is not finite");

    const auto n = scored.ids.size();
    const auto take = std::min(n_b, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
        if (scored.scores[a] != scored.scores[b]) return scored.scores[a] > scored.scores[b];
        return scored.ids[a] < scored.ids[b];
    };

    std::vector<SampleId> batch;
    batch.reserve(take);
    if (scored.policy != PolicyKind::tanimoto_diversity) {
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);
        for (std::size_t i = 0; i < take; ++i) batch.push_back(scored.ids[order[i]]);
        return batch;
    }

    if (fingerprints == nullptr) throw InvalidArgument("diversity selection needs fingerprints");
    std::vector<double> current = scored.scores;
    std::vector<bool> taken(n, false);
    for (std::size_t round = 0; round < take; ++round) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            if (best == n || current[i] > current[best] ||
                (current[i] == current[best] && scored.ids[i] < scored.ids[best]))
                best = i;
        }
        taken[best] = true;
        batch.push_back(scored.ids[best]);
        const auto& picked = (*fingerprints)[scored.ids[best]];
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i])
                current[i] = std::min(current[i], tanimoto_distance((*fingerprints)[scored.ids[i]], picked));
    }
    return batch;
}

}  // namespace screenloop
