#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "screenloop/core.hpp"

namespace screenloop {

/// Candidate ids with their acquisition scores; higher is acquired sooner.
struct ScoredCandidates {
    std::vector<SampleId> ids;
    std::vector<double> scores;
    PolicyKind policy = PolicyKind::least_confidence;
};

/// 1 - max_k p_k per prediction.
std::vector<double> score_least_confidence(std::span<const Prediction> predictions);

std::vector<double> score_random(std::size_t n, std::mt19937_64& rng);

/// Mutual information between prediction and ensemble member, in nats.
/// `member_predictions[m][i]` is member m's prediction for sample i.
std::vector<double> score_bald(std::span<const std::vector<Prediction>> member_predictions);

std::vector<double> score_qbc_variance(std::span<const double> variance);
std::vector<double> score_qbc_variance(std::span<const Prediction> ensemble_predictions);

/// Static ranking of every sample in `dataset` by an aux column (or by
/// sample id when `key_column` is "sample_id").
std::vector<double> score_fixed_order(const Dataset& dataset, std::string_view key_column,
                                      OrderDirection direction);

/// 1 - |a & b| / |a | b|; two empty fingerprints are at distance 0.
double tanimoto_distance(const BitVector& a, const BitVector& b);

/// Distance of each candidate to its nearest acquired fingerprint (1 when
/// nothing has been acquired).
std::vector<double> score_tanimoto_diversity(const BitColumn& fingerprints, std::span<const SampleId> acquired_ids,
                                             std::span<const SampleId> candidate_ids);

/// Top-n_b by score with ties broken by ascending id. For
/// tanimoto_diversity, greedy farthest-point selection using `fingerprints`.
std::vector<SampleId> select_batch(const ScoredCandidates& scored, std::size_t n_b,
                                   const BitColumn* fingerprints = nullptr);

}  // namespace screenloop
