#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "screenloop/error.hpp"
#include "screenloop/stopping.hpp"

using namespace screenloop;

namespace {

double kl_ref(double p, double q) {
    double v = 0.0;
    if (p > 0.0) v += p * std::log(p / q);
    if (p < 1.0) v += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return v;
}

// Newton iteration on KL(p || a) = c from the left of the root; the KL is
// convex and decreasing there so the iterates increase monotonically.
double newton_root(double p, double c) {
    double a = 1e-12;
    for (int i = 0; i < 200; ++i) {
        const double f = kl_ref(p, a) - c;
        const double df = -p / a + (1.0 - p) / (1.0 - a);
        const double next = a - f / df;
        if (!(next > a)) break;
        a = std::min(next, p);
    }
    return a;
}

PartitionState state_with(std::size_t n, std::size_t n_obs) {
    auto s = partition_init(n);
    std::vector<SampleId> ids(n_obs);
    for (std::size_t i = 0; i < n_obs; ++i) ids[i] = i;
    return transfer_batch(s, ids);
}

}  // namespace

TEST_CASE("bernoulli kl values") {
    CHECK(kl_bernoulli(0.9, 0.81) == doctest::Approx(0.9 * std::log(0.9 / 0.81) + 0.1 * std::log(0.1 / 0.19)));
    CHECK(kl_bernoulli(0.9, 0.81) == doctest::Approx(0.030639).epsilon(1e-4));
    CHECK(kl_bernoulli(0.3, 0.3) == 0.0);
    CHECK(kl_bernoulli(1.0, 0.5) == doctest::Approx(std::log(2.0)));
    CHECK(kl_bernoulli(0.0, 0.25) == doctest::Approx(-std::log(0.75)));
    CHECK(std::isinf(kl_bernoulli(0.5, 0.0)));
    CHECK_THROWS_AS(kl_bernoulli(1.2, 0.5), InvalidArgument);
}

TEST_CASE("bound has the closed form at a perfect batch") {
    // KL(1 || a) = -ln a, so the root is delta^(1/n)
    CHECK(std::abs(chernoff_lower_bound(1.0, 1000, 0.05) - std::pow(0.05, 1.0 / 1000.0)) < 1e-6);
    CHECK(std::abs(chernoff_lower_bound(1.0, 100, 0.05) - std::pow(0.05, 1.0 / 100.0)) < 1e-6);
    CHECK(chernoff_lower_bound(0.0, 100, 0.05) == 0.0);
}

TEST_CASE("bound agrees with a newton root and never exceeds it") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.01, 0.999);
    std::uniform_int_distribution<std::size_t> un(10, 5000);
    std::uniform_real_distribution<double> ud(0.001, 0.3);
    for (int i = 0; i < 300; ++i) {
        const double mu = u(rng);
        const auto n = un(rng);
        const double delta = ud(rng);
        const double c = std::log(1.0 / delta) / static_cast<double>(n);
        const double a = chernoff_lower_bound(mu, n, delta);
        const double ref = kl_ref(mu, 1e-300) <= c ? 0.0 : newton_root(mu, c);
        CHECK(a == doctest::Approx(ref).epsilon(1e-9));
        CHECK(a <= mu);
        CHECK(a >= 0.0);
        if (a > 0.0) CHECK(kl_ref(mu, a) >= c - 1e-12);  // rounded down: still outside the KL ball
    }
}

TEST_CASE("bound example value") {
    // 100 samples at 90%: the root of KL(0.9 || a) = ln(20) / 100
    const double a = chernoff_lower_bound(0.9, 100, 0.05);
    CHECK(a == doctest::Approx(newton_root(0.9, std::log(20.0) / 100.0)).epsilon(1e-10));
    CHECK(a > 0.80);
    CHECK(a < 0.82);
}

TEST_CASE("bound is monotone in the batch size, delta and the batch accuracy") {
    for (double mu : {0.5, 0.8, 0.95}) {
        double prev = 0.0;
        for (std::size_t n : {10, 50, 100, 500, 1000, 10000}) {
            const double a = chernoff_lower_bound(mu, n, 0.05);
            CHECK(a >= prev);
            prev = a;
        }
        CHECK(chernoff_lower_bound(mu, 100, 0.01) <= chernoff_lower_bound(mu, 100, 0.1));
    }
    double prev = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double a = chernoff_lower_bound(k / 100.0, 100, 0.05);
        CHECK(a >= prev);
        prev = a;
    }
}

TEST_CASE("bound argument checks") {
    CHECK_THROWS_AS(chernoff_lower_bound(0.5, 0, 0.05), InvalidArgument);
    CHECK_THROWS_AS(chernoff_lower_bound(1.5, 10, 0.05), InvalidArgument);
    CHECK_THROWS_AS(chernoff_lower_bound(0.5, 10, 0.0), InvalidArgument);
    CHECK_THROWS_AS(chernoff_lower_bound(0.5, 10, 1.0), InvalidArgument);
}

TEST_CASE("system accuracy estimate blends observed and inferred") {
    CHECK(estimate_system_accuracy(300, 700, 0.9) == doctest::Approx((300 + 630) / 1000.0));
    CHECK(estimate_system_accuracy(1000, 0, 0.0) == 1.0);
    CHECK_THROWS_AS(estimate_system_accuracy(0, 0, 0.5), InvalidArgument);
}

TEST_CASE("chernoff stop rule uses post-transfer sizes and the batch size") {
    // 900 of 1000 observed, perfect batch of 100: alpha = 0.05^(1/100)
    const auto s = state_with(1000, 900);
    const auto d = should_stop_chernoff(s, 1.0, 100, 0.99, 0.05);
    const double alpha = std::pow(0.05, 0.01);
    CHECK(*d.alpha == doctest::Approx(alpha).epsilon(1e-9));
    CHECK(*d.est_system_accuracy == doctest::Approx((900 + 100 * alpha) / 1000.0).epsilon(1e-9));
    CHECK(d.stop);
    CHECK(d.reason == StopReason::threshold_met);

    const auto early = state_with(1000, 100);
    const auto e = should_stop_chernoff(early, 1.0, 100, 0.99, 0.05);
    CHECK_FALSE(e.stop);
    CHECK(e.reason == StopReason::not_stopped);

    const auto done = state_with(10, 10);
    const auto x = should_stop_chernoff(done, 0.0, 10, 0.99, 0.05);
    CHECK(x.stop);
    CHECK(x.reason == StopReason::inference_exhausted);
}

TEST_CASE("chernoff stop rule is monotone in observed fraction") {
    bool stopped_before = false;
    for (std::size_t obs = 100; obs <= 1000; obs += 100) {
        const auto d = should_stop_chernoff(state_with(1000, obs), 0.95, 100, 0.97, 0.05);
        if (stopped_before) CHECK(d.stop);
        stopped_before = d.stop;
    }
    CHECK(stopped_before);
}

TEST_CASE("naive rule waits for patience consecutive estimates") {
    const std::vector<double> h{0.9, 0.99, 0.985, 0.97, 0.99, 0.991};
    CHECK_FALSE(should_stop_naive(std::span(h).first(1), 0.98, 1).stop);
    CHECK(should_stop_naive(std::span(h).first(2), 0.98, 1).stop);
    CHECK(should_stop_naive(std::span(h).first(3), 0.98, 2).stop);
    CHECK_FALSE(should_stop_naive(std::span(h).first(4), 0.98, 2).stop);
    CHECK_FALSE(should_stop_naive(std::span(h).first(5), 0.98, 2).stop);
    CHECK(should_stop_naive(h, 0.98, 2).stop);
    CHECK_FALSE(should_stop_naive(h, 0.98, 3).stop);
    CHECK(*should_stop_naive(h, 0.98, 3).est_system_accuracy == 0.991);
    CHECK_THROWS_AS(should_stop_naive(h, 0.98, 0), InvalidArgument);
}

TEST_CASE("regression rule needs patience values below the threshold") {
    const std::vector<double> h{0.5, 0.05, 0.04, 0.2, 0.01, 0.02, 0.03};
    CHECK_FALSE(should_stop_regression(std::span(h).first(3), 0.1, 3).stop);
    CHECK_FALSE(should_stop_regression(std::span(h).first(6), 0.1, 3).stop);
    CHECK(should_stop_regression(h, 0.1, 3).stop);
    CHECK(should_stop_regression(std::span(h).first(3), 0.1, 2).stop);
    CHECK_THROWS_AS(should_stop_regression(h, 0.0, 3), InvalidArgument);
}

TEST_CASE("bound coverage stays near delta") {
    std::mt19937_64 rng(3);
    for (double mu : {0.8, 0.95}) {
        const double rate = validate_bound_coverage(mu, 200, 0.05, 2000, rng);
        CHECK(rate <= 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 2000.0));
    }
    // a degenerate source never fails
    CHECK(validate_bound_coverage(1.0, 50, 0.05, 100, rng) == 0.0);
}
