#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "screenloop/acquisition.hpp"
#include "screenloop/error.hpp"

using namespace screenloop;

namespace {

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

ScoredCandidates scored(std::vector<SampleId> ids, std::vector<double> scores,
                        PolicyKind kind = PolicyKind::least_confidence) {
    return {std::move(ids), std::move(scores), kind};
}

}  // namespace

TEST_CASE("least confidence is one minus the top probability") {
    const std::vector<Prediction> p{Prediction::from_probs({0.7, 0.2, 0.1}), Prediction::from_probs({0.5, 0.5}),
                                    Prediction::from_probs({1.0, 0.0})};
    const auto s = score_least_confidence(p);
    CHECK(s[0] == doctest::Approx(0.3));
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(s[2] == 0.0);
}

TEST_CASE("bald of two confident, opposed members is ln 2") {
    const std::vector<std::vector<Prediction>> members{{Prediction::from_probs({1.0, 0.0})},
                                                       {Prediction::from_probs({0.0, 1.0})}};
    CHECK(score_bald(members)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bald matches the entropy decomposition and vanishes on agreement") {
    std::mt19937_64 rng(2);
    std::gamma_distribution<double> g(1.0, 1.0);
    const std::size_t m = 4, n = 20, k = 5;
    std::vector<std::vector<Prediction>> members(m);
    std::vector<std::vector<std::vector<double>>> raw(m, std::vector<std::vector<double>>(n));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> p(k);
            for (auto& v : p) v = g(rng);
            const double s = std::accumulate(p.begin(), p.end(), 0.0);
            for (auto& v : p) v /= s;
            raw[a][i] = p;
            members[a].push_back(Prediction::from_probs(p));
        }
    const auto s = score_bald(members);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> mean(k, 0.0);
        double mean_h = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t c = 0; c < k; ++c) mean[c] += raw[a][i][c] / static_cast<double>(m);
            mean_h += entropy(raw[a][i]) / static_cast<double>(m);
        }
        CHECK(s[i] == doctest::Approx(entropy(mean) - mean_h).epsilon(1e-10));
        CHECK(s[i] >= -1e-12);
    }

    const std::vector<std::vector<Prediction>> same{members[0], members[0]};
    for (double v : score_bald(same)) CHECK(std::abs(v) < 1e-12);
    const std::vector<std::vector<Prediction>> single{members[0]};
    CHECK_THROWS(score_bald(single));
}

TEST_CASE("qbc score is the ensemble variance") {
    const std::vector<Prediction> p{Prediction::from_members({1.0, 3.0}), Prediction::from_members({2.0, 2.0})};
    const auto s = score_qbc_variance(p);
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == 0.0);
    const std::vector<double> v{0.5, 0.1};
    CHECK(score_qbc_variance(v) == v);
}

TEST_CASE("random scores are seeded") {
    std::mt19937_64 a(4), b(4);
    const auto x = score_random(100, a);
    CHECK(x == score_random(100, b));
    for (double v : x) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("top-n selection breaks ties by ascending id") {
    const auto s = scored({9, 3, 7, 1, 5}, {0.5, 0.9, 0.5, 0.5, 0.1});
    CHECK(select_batch(s, 1) == std::vector<SampleId>{3});
    CHECK(select_batch(s, 3) == std::vector<SampleId>{3, 1, 7});
    CHECK(select_batch(s, 10) == std::vector<SampleId>{3, 1, 7, 9, 5});
    CHECK_THROWS_AS(select_batch(s, 0), InvalidArgument);
    CHECK_THROWS_AS(select_batch(scored({}, {}), 1), InvalidArgument);
    CHECK_THROWS_AS(select_batch(scored({1, 2}, {0.1, NAN}), 1), InvalidArgument);
}

TEST_CASE("all-equal scores pick the lowest ids") {
    const auto s = scored({4, 0, 2, 1, 3}, std::vector<double>(5, 0.9));
    CHECK(select_batch(s, 2) == std::vector<SampleId>{0, 1});
}

TEST_CASE("fixed order ranks by an aux column or by id") {
    FeatureMatrix x = FeatureMatrix::Zero(4, 1);
    auto d = make_regression_dataset(x, {0, 0, 0, 0});
    d.aux.emplace("sa_score", RealColumn{3.0, 1.0, 4.0, 1.5});
    auto top = [&](std::string_view key, OrderDirection dir) {
        return select_batch(scored({0, 1, 2, 3}, score_fixed_order(d, key, dir), PolicyKind::fixed_order), 4);
    };
    CHECK(top("sa_score", OrderDirection::ascending) == std::vector<SampleId>{1, 3, 0, 2});
    CHECK(top("sa_score", OrderDirection::descending) == std::vector<SampleId>{2, 0, 3, 1});
    CHECK(top("sample_id", OrderDirection::ascending) == std::vector<SampleId>{0, 1, 2, 3});
    CHECK_THROWS(score_fixed_order(d, "missing", OrderDirection::ascending));
}

TEST_CASE("tanimoto distance") {
    const auto a = BitVector::from_string("1100");
    const auto b = BitVector::from_string("1110");
    CHECK(tanimoto_distance(a, b) == doctest::Approx(1.0 - 2.0 / 3.0));
    CHECK(tanimoto_distance(a, a) == 0.0);
    CHECK(tanimoto_distance(a, BitVector::from_string("0011")) == 1.0);
    CHECK(tanimoto_distance(BitVector(4), BitVector(4)) == 0.0);
    CHECK(tanimoto_distance(a, BitVector(4)) == 1.0);
}

TEST_CASE("diversity picks the farthest fingerprints greedily") {
    const BitColumn fps{BitVector::from_string("1100"), BitVector::from_string("1110"),
                        BitVector::from_string("0011")};
    const std::vector<SampleId> none, all{0, 1, 2};
    const auto s0 = score_tanimoto_diversity(fps, none, all);
    CHECK(s0 == std::vector<double>{1.0, 1.0, 1.0});
    const ScoredCandidates c{all, s0, PolicyKind::tanimoto_diversity};
    CHECK(select_batch(c, 2, &fps) == std::vector<SampleId>{0, 2});

    // once 0 is observed, 2 is farther from it than 1
    const std::vector<SampleId> acquired{0}, rest{1, 2};
    const auto s1 = score_tanimoto_diversity(fps, acquired, rest);
    CHECK(s1[0] == doctest::Approx(1.0 / 3.0));
    CHECK(s1[1] == 1.0);
    const ScoredCandidates c1{rest, s1, PolicyKind::tanimoto_diversity};
    CHECK(select_batch(c1, 1, &fps) == std::vector<SampleId>{2});
    CHECK_THROWS(select_batch(c1, 1, nullptr));
}

TEST_CASE("diversity selection property: each pick maximizes distance to the chosen set") {
    std::mt19937_64 rng(8);
    BitColumn fps;
    for (int i = 0; i < 40; ++i) {
        BitVector v(32);
        for (std::size_t b = 0; b < 32; ++b) v.set(b, rng() % 3 == 0);
        fps.push_back(v);
    }
    std::vector<SampleId> ids(40);
    std::iota(ids.begin(), ids.end(), SampleId{0});
    const std::vector<SampleId> none;
    const ScoredCandidates c{ids, score_tanimoto_diversity(fps, none, ids), PolicyKind::tanimoto_diversity};
    const auto batch = select_batch(c, 6, &fps);
    REQUIRE(batch.size() == 6);
    CHECK(batch[0] == 0);
    for (std::size_t k = 1; k < batch.size(); ++k) {
        auto min_dist = [&](SampleId i) {
            double d = 1.0;
            for (std::size_t j = 0; j < k; ++j) d = std::min(d, tanimoto_distance(fps[i], fps[batch[j]]));
            return d;
        };
        const double chosen = min_dist(batch[k]);
        for (auto i : ids) {
            if (std::find(batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(k), i) !=
                batch.begin() + static_cast<std::ptrdiff_t>(k))
                continue;
            CHECK(min_dist(i) <= chosen);
        }
    }
}
