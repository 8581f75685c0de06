#pragma once
// Conjugate multinomial-Dirichlet model for the K categorical mark
// combinations.

#include <Eigen/Dense>
#include <vector>

#include "geosynth/data.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

struct CategoricalPosterior {
    Eigen::VectorXd alpha_prior;
    Eigen::VectorXd alpha_post; // alpha_prior + counts

    Eigen::VectorXd posterior_mean() const { return alpha_post / alpha_post.sum(); }
};

// Default prior weight 1/K on every combination.
Eigen::VectorXd default_alpha(int K);

CategoricalPosterior fit_categorical(const Dataset& ds, const Eigen::VectorXd& alpha_prior);

// One draw of theta from the Dirichlet posterior; entries positive and
// summing to one.
Eigen::VectorXd draw_theta(const CategoricalPosterior& post, Rng& rng);

// n_dagger ~ Mult(N, theta); totals are exactly N.
std::vector<long> draw_counts(const Eigen::VectorXd& theta, long n, Rng& rng);

// Retained theta draws indexed 1..retained so that replicate l uses
// parameter draw l consistently across all three sub-models.
struct CategoricalChain {
    CategoricalPosterior posterior;
    std::vector<Eigen::VectorXd> theta_draws;
};

CategoricalChain fit_categorical_chain(const Dataset& ds, const Eigen::VectorXd& alpha_prior,
                                       int retained, Rng& rng);

} // namespace geosynth
