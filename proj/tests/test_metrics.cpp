#include "doctest.h"

#include <memory>
#include <random>

#include "screenloop/error.hpp"
#include "screenloop/metrics.hpp"

using namespace screenloop;

namespace {

std::unique_ptr<bool[]> flags(std::initializer_list<int> v) {
    auto out = std::make_unique<bool[]>(v.size());
    std::size_t i = 0;
    for (int x : v) out[i++] = x != 0;
    return out;
}

}  // namespace

TEST_CASE("system accuracy counts observed samples as correct") {
    auto s = partition_init(10);
    const std::vector<SampleId> batch{0, 1, 2, 3};
    s = transfer_batch(s, batch);
    std::vector<Prediction> p;
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) {
        p.push_back(Prediction::from_probs({0.6, 0.4}));
        labels.push_back(i < 4 ? 0 : 1);  // 4 of 6 right
    }
    CHECK(system_accuracy(s, p, labels) == (4.0 + 4.0) / 10.0);
    CHECK(batch_accuracy(p, labels) == doctest::Approx(4.0 / 6.0));
    labels.pop_back();
    CHECK_THROWS_AS(system_accuracy(s, p, labels), InvalidArgument);
}

TEST_CASE("system accuracy decomposition holds on random partitions") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng() % 100;
        auto s = partition_init(n);
        std::vector<SampleId> batch;
        for (SampleId i = 0; i < n; ++i)
            if (rng() % 3 == 0) batch.push_back(i);
        s = transfer_batch(s, batch);
        std::vector<Prediction> p;
        std::vector<int> labels;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < s.n_inf(); ++i) {
            const bool right = rng() % 2 == 0;
            p.push_back(Prediction::from_probs({0.8, 0.2}));
            labels.push_back(right ? 0 : 1);
            correct += right ? 1 : 0;
        }
        const double inf_acc = s.n_inf() ? static_cast<double>(correct) / static_cast<double>(s.n_inf()) : 0.0;
        const double n_d = static_cast<double>(n);
        CHECK(system_accuracy(s, p, labels) ==
              doctest::Approx(static_cast<double>(s.n_obs()) / n_d + inf_acc * static_cast<double>(s.n_inf()) / n_d));
    }
}

TEST_CASE("mean squared error") {
    const std::vector<double> a{1.0, 2.0, 4.0}, b{1.0, 0.0, 1.0};
    CHECK(mean_squared_error(a, b) == doctest::Approx(13.0 / 3.0));
    CHECK_THROWS_AS(mean_squared_error(std::span<const double>{}, std::span<const double>{}), InvalidArgument);
}

TEST_CASE("calibration bins are right-closed") {
    const std::vector<double> conf{0.0, 0.1, 0.15, 0.2, 0.95, 1.0, 0.55};
    const auto ok = flags({1, 0, 1, 1, 1, 1, 0});
    const auto r = calibration_bins(conf, std::span<const bool>(ok.get(), conf.size()), 10);
    REQUIRE(r.bin_edges.size() == 11);
    CHECK(r.bins[0].count == 2);  // 0.0 and 0.1
    CHECK(r.bins[1].count == 2);  // 0.15 and 0.2
    CHECK(r.bins[5].count == 1);
    CHECK(r.bins[9].count == 2);
    CHECK(*r.bins[0].accuracy == 0.5);
    CHECK(*r.bins[1].mean_confidence == doctest::Approx(0.175));
    CHECK_FALSE(r.bins[3].accuracy.has_value());
}

TEST_CASE("weak calibration violation is the largest accuracy drop") {
    CalibrationReport r;
    r.bin_edges = {0.0, 0.25, 0.5, 0.75, 1.0};
    r.bins = {{100, 0.2, 0.3}, {100, 0.4, 0.5}, {10, 0.6, 0.1}, {100, 0.9, 0.45}};
    CHECK(*weak_calibration_violation(r, 1) == doctest::Approx(0.4));
    // the sparse bin is skipped, leaving a drop of 0.05
    CHECK(*weak_calibration_violation(r, 50) == doctest::Approx(0.05));
    r.bins = {{100, 0.2, 0.3}, {0, {}, {}}, {100, 0.6, 0.7}, {100, 0.9, 0.9}};
    CHECK(*weak_calibration_violation(r, 50) == 0.0);
    CHECK_FALSE(weak_calibration_violation(r, 1000).has_value());
}

TEST_CASE("lemma1 simulation matches the uniform-confidence analysis") {
    // v ~ U(0.5, 1), g(v) = v: the 100 least confident of 1000 sit near
    // [0.5, 0.55] and the rest on [0.55, 1]
    Lemma1Setup setup;
    setup.g = [](double v) { return v; };
    std::mt19937_64 rng(0);
    const auto r = validate_lemma1(setup, 100, 300, rng);
    CHECK(r.mean_batch_accuracy == doctest::Approx(0.525).epsilon(0.02));
    CHECK(r.mean_remaining_accuracy == doctest::Approx(0.775).epsilon(0.01));
    CHECK(r.fraction_batch_le_remaining > 0.99);
    CHECK(r.se_difference > 0.0);

    setup.g = [](double v) { return 1.5 - v; };
    const auto flipped = validate_lemma1(setup, 100, 300, rng);
    CHECK(flipped.mean_batch_accuracy > flipped.mean_remaining_accuracy);
    CHECK_THROWS_AS(validate_lemma1(setup, 1000, 10, rng), InvalidArgument);
}

TEST_CASE("hard-example flagging finds flipped labels") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.3);
    const std::size_t n = 300;
    FeatureMatrix x(static_cast<Eigen::Index>(n), 2);
    std::vector<int> y(n);
    std::vector<SampleId> flipped;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % 2);
        x(static_cast<Eigen::Index>(i), 0) = (c ? 2.0 : -2.0) + noise(rng);
        x(static_cast<Eigen::Index>(i), 1) = noise(rng);
        y[i] = c;
        if (i % 50 == 7) {
            y[i] = 1 - c;
            flipped.push_back(i);
        }
    }
    const auto d = make_classification_dataset(x, y, 2);
    ModelConfig cfg;
    cfg.n_hidden_layers = 1;
    cfg.hidden_size = 8;
    cfg.learning_rate = 0.01;
    cfg.optimizer = Optimizer::adam;
    cfg.max_epochs = 40;
    cfg.train_batch_size = 32;
    cfg.early_stop_patience = 5;
    cfg.dropout = 0.0;
    const auto hard = flag_hard_examples(d, 5, cfg, 3);
    CHECK(hard == flipped);
    CHECK(hard_set_fraction_acquired(std::span<const SampleId>(flipped).first(3), hard) == doctest::Approx(0.5));
    CHECK_THROWS_AS(flag_hard_examples(d, 1, cfg, 3), InvalidArgument);
}
