#include "geosynth/categorical.hpp"

#include "geosynth/errors.hpp"

namespace geosynth {

Eigen::VectorXd default_alpha(int K) {
    if (K < 1) throw ValidationError("default_alpha: K must be at least 1");
    return Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
}

CategoricalPosterior fit_categorical(const Dataset& ds, const Eigen::VectorXd& alpha_prior) {
    if (alpha_prior.size() != ds.K)
        throw ValidationError("fit_categorical: alpha length differs from K");
    if ((alpha_prior.array() <= 0.0).any())
        throw ValidationError("fit_categorical: prior weights must be positive");
    CategoricalPosterior post;
    post.alpha_prior = alpha_prior;
    post.alpha_post = alpha_prior;
    for (int k = 0; k < ds.K; ++k)
        post.alpha_post[k] += static_cast<double>(ds.counts[static_cast<std::size_t>(k)]);
    return post;
}

Eigen::VectorXd draw_theta(const CategoricalPosterior& post, Rng& rng) {
    const auto n = post.alpha_post.size();
    std::vector<double> alpha(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) alpha[static_cast<std::size_t>(i)] = post.alpha_post[i];
    const auto draw = rng.dirichlet(alpha);
    Eigen::VectorXd theta(n);
    for (Eigen::Index i = 0; i < n; ++i) theta[i] = draw[static_cast<std::size_t>(i)];
    return theta;
}

std::vector<long> draw_counts(const Eigen::VectorXd& theta, long n, Rng& rng) {
    if (n < 0) throw ValidationError("draw_counts: N must be nonnegative");
    std::vector<double> probs(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        probs[static_cast<std::size_t>(i)] = theta[i];
    return rng.multinomial(n, probs);
}

CategoricalChain fit_categorical_chain(const Dataset& ds, const Eigen::VectorXd& alpha_prior,
                                       int retained, Rng& rng) {
    if (retained < 1) throw ValidationError("fit_categorical_chain: retained must be positive");
    CategoricalChain chain;
    chain.posterior = fit_categorical(ds, alpha_prior);
    chain.theta_draws.reserve(static_cast<std::size_t>(retained));
    for (int l = 0; l < retained; ++l) chain.theta_draws.push_back(draw_theta(chain.posterior, rng));
    return chain;
}

} // namespace geosynth
