#include "screenloop/stopping.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "screenloop/error.hpp"

namespace screenloop {

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::not_stopped: return "not_stopped";
        case StopReason::threshold_met: return "threshold_met";
        case StopReason::inference_exhausted: return "inference_exhausted";
        case StopReason::max_steps: return "max_steps";
    }
    return "unknown";
}

double kl_bernoulli(double mu_hat, double a) {
    if (!(mu_hat >= 0.0 && mu_hat <= 1.0) || !(a >= 0.0 && a <= 1.0))
        throw InvalidArgument("KL arguments must lie in [0,1]");
    constexpr double inf = std::numeric_limits<double>::infinity();
    double kl = 0.0;
    if (mu_hat > 0.0) {
        if (a == 0.0) return inf;
        kl += mu_hat * std::log(mu_hat / a);
    }
    if (mu_hat < 1.0) {
        if (a == 1.0) return inf;
        kl += (1.0 - mu_hat) * std::log((1.0 - mu_hat) / (1.0 - a));
    }
    return std::max(kl, 0.0);
}

double chernoff_lower_bound(double mu_hat, std::size_t n, double delta) {
    if (!(mu_hat >= 0.0 && mu_hat <= 1.0)) throw InvalidArgument("batch accuracy must lie in [0,1]");
    if (n == 0) throw InvalidArgument("bound needs at least one sample");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    if (mu_hat == 0.0) return 0.0;

    const double threshold = std::log(1.0 / delta) / static_cast<double>(n);
    // KL(mu_hat || a) decreases strictly on (0, mu_hat]: lo stays above the
    // threshold, hi at or below it.
    double lo = 0.0;
    double hi = mu_hat;
    for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (kl_bernoulli(mu_hat, mid) > threshold) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

double estimate_system_accuracy(std::size_t n_obs, std::size_t n_inf, double inf_accuracy_estimate) {
    if (n_obs + n_inf == 0) throw InvalidArgument("target set is empty");
    if (!(inf_accuracy_estimate >= 0.0 && inf_accuracy_estimate <= 1.0))
        throw InvalidArgument("accuracy estimate must lie in [0,1]");
    return (static_cast<double>(n_obs) + inf_accuracy_estimate * static_cast<double>(n_inf)) /
           static_cast<double>(n_obs + n_inf);
}

StopDecision should_stop_chernoff(const PartitionState& state, double batch_accuracy, std::size_t n_b, double gamma,
                                  double delta) {
    StopDecision d;
    d.alpha = chernoff_lower_bound(batch_accuracy, n_b, delta);
    d.est_system_accuracy = estimate_system_accuracy(state.n_obs(), state.n_inf(), *d.alpha);
    if (state.n_inf() == 0) {
        d.stop = true;
        d.reason = StopReason::inference_exhausted;
    } else if (*d.est_system_accuracy > gamma) {
        d.stop = true;
        d.reason = StopReason::threshold_met;
    }
    return d;
}

StopDecision should_stop_naive(std::span<const double> history, double gamma, std::size_t patience) {
    if (patience == 0) throw InvalidArgument("patience must be at least 1");
    StopDecision d;
    if (!history.empty()) d.est_system_accuracy = history.back();
    if (history.size() < patience) return d;
    for (std::size_t i = history.size() - patience; i < history.size(); ++i)
        if (!(history[i] > gamma)) return d;
    d.stop = true;
    d.reason = StopReason::threshold_met;
    return d;
}

StopDecision should_stop_regression(std::span<const double> mse_history, double t_mse, std::size_t patience) {
    if (patience == 0) throw InvalidArgument("patience must be at least 1");
    if (!(t_mse > 0.0)) throw InvalidArgument("MSE threshold must be positive");
    StopDecision d;
    if (mse_history.size() < patience) return d;
    for (std::size_t i = mse_history.size() - patience; i < mse_history.size(); ++i)
        if (!(mse_history[i] < t_mse)) return d;
    d.stop = true;
    d.reason = StopReason::threshold_met;
    return d;
}

double validate_bound_coverage(double mu_true, std::size_t n, double delta, std::size_t trials,
                               std::mt19937_64& rng) {
    if (!(mu_true >= 0.0 && mu_true <= 1.0)) throw InvalidArgument("mu_true must lie in [0,1]");
    if (trials == 0) throw InvalidArgument("trials must be positive");
    // The bound depends on the draws only through the success count.
    std::vector<double> alpha_by_count(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        alpha_by_count[k] = chernoff_lower_bound(static_cast<double>(k) / static_cast<double>(n), n, delta);
    std::bernoulli_distribution draw(mu_true);
    std::size_t failures = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t successes = 0;
        for (std::size_t i = 0; i < n; ++i) successes += draw(rng) ? 1 : 0;
        if (mu_true < alpha_by_count[successes]) ++failures;
    }
    return static_cast<double>(failures) / static_cast<double>(trials);
}

}  // namespace screenloop
