#pragma once
// Shared MCMC plumbing: chain schedule, Robbins-Monro step adaptation,
// and a deterministic parallel-for over combinations.

#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "geosynth/errors.hpp"

namespace geosynth {

struct McmcSettings {
    int burnin = 5000;
    int thin = 10;
    int retained = 100;
    double adapt_target = 0.35; // random-walk acceptance target

    int total_iterations() const { return burnin + thin * retained; }
    void validate() const {
        if (burnin < 0 || thin < 1 || retained < 1)
            throw ValidationError("mcmc: burnin >= 0, thin >= 1, retained >= 1 required");
        if (!(adapt_target > 0.0 && adapt_target < 1.0))
            throw ValidationError("mcmc: adapt_target outside (0,1)");
    }
};

// Scalar random-walk step size adapted toward a target acceptance rate
// during burn-in and frozen afterwards. Post-freeze acceptances are
// tallied for diagnostics.
class AdaptiveStep {
public:
    explicit AdaptiveStep(double init_step = 0.1, double target = 0.35)
        : log_step_(std::log(init_step)), target_(target) {}

    double step() const { return std::exp(log_step_); }

    void adapt(double accept_prob) {
        ++t_;
        log_step_ += (accept_prob - target_) / std::pow(static_cast<double>(t_), 0.66);
        log_step_ = std::clamp(log_step_, std::log(1e-8), std::log(1e4));
    }

    void tally(bool accepted) {
        ++attempts_;
        if (accepted) ++accepts_;
    }

    double acceptance_rate() const {
        return attempts_ > 0 ? static_cast<double>(accepts_) / static_cast<double>(attempts_)
                             : 0.0;
    }

private:
    double log_step_;
    double target_;
    long t_ = 0;
    long accepts_ = 0;
    long attempts_ = 0;
};

struct ChainDiagnostics {
    std::vector<double> accept_beta; // per combination, post-adaptation
    std::vector<double> accept_w;
    double accept_psi = 1.0;         // 1.0 when the Psi update is conjugate
    std::vector<double> logpost;     // recorded at each retained draw
};

// Runs fn(k) for k in [0, n). Work is split statically so results do not
// depend on the thread count; fn must only touch state owned by k.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (int k = w; k < n; k += workers) fn(k);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace geosynth
