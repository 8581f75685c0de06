#include "geosynth/lgcp.hpp"

#include <cmath>
#include <string>

namespace geosynth {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Integral term uses exp(min(log-intensity, cap)); the data term is
// already on the log scale and needs no guard.
double data_loglik(const Eigen::VectorXd& g, const Eigen::VectorXd& d, double weight,
                   double cap, bool prior_only) {
    if (prior_only) return 0.0;
    double mass = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) mass += std::exp(std::min(g[i], cap));
    return -weight * mass + d.sum();
}

struct ComboState {
    Rng rng;
    Eigen::VectorXd beta;      // p (intercept-only enforced at fit entry)
    Eigen::VectorXd w;         // n*
    Eigen::VectorXd m;         // (C*)^{-1} w
    Eigen::VectorXd g;         // log-intensity on the integration grid
    Eigen::VectorXd d;         // log-intensity at the combination's points
    Eigen::MatrixXd proj_data; // n_k x n*
    double loglik = 0.0;
    AdaptiveStep beta_step;
    AdaptiveStep w_step;

    explicit ComboState(Rng r) : rng(std::move(r)) {}
};

} // namespace

IntegrationGrid IntegrationGrid::build(const SpatialDomain& domain, int n_ni) {
    if (n_ni < 1) throw ValidationError("IntegrationGrid: n_ni must be positive");
    IntegrationGrid grid;
    grid.points = lattice_points(domain, n_ni);
    grid.weight = domain.area() / static_cast<double>(n_ni);
    return grid;
}

double log_intensity(const IntensityChain& chain, const IntensityDraw& draw, int k,
                     const Point& s, std::span<const double> x_lambda) {
    if (k < 0 || k >= chain.K) throw ValidationError("log_intensity: combination out of range");
    if (static_cast<Eigen::Index>(x_lambda.size()) != draw.beta.cols())
        throw ValidationError("log_intensity: covariate length mismatch");
    double lin = 0.0;
    for (Eigen::Index j = 0; j < draw.beta.cols(); ++j)
        lin += draw.beta(k, j) * x_lambda[static_cast<std::size_t>(j)];
    const Eigen::VectorXd c = cross_corr(chain.kernel, s, std::span<const Point>(chain.km.knots));
    return lin + pp_project(c, chain.km, draw.w_star.row(k).transpose());
}

double log_intensity(const IntensityChain& chain, const IntensityDraw& draw, int k,
                     const Point& s) {
    const double one = 1.0;
    return log_intensity(chain, draw, k, s, std::span<const double>(&one, 1));
}

std::vector<double> intensity_surface(const IntensityChain& chain, const IntensityDraw& draw,
                                      int k, std::span<const Point> locs) {
    std::vector<double> out;
    out.reserve(locs.size());
    for (const auto& s : locs)
        out.push_back(std::exp(std::min(log_intensity(chain, draw, k, s), chain.config.log_cap)));
    return out;
}

double lgcp_loglik(const IntensityChain& chain, const IntensityDraw& draw, int k,
                   std::span<const Point> data_points) {
    if (data_points.empty()) throw ValidationError("lgcp_loglik: empty point set");
    double mass = 0.0;
    for (const auto& s : chain.grid.points)
        mass += std::exp(std::min(log_intensity(chain, draw, k, s), chain.config.log_cap));
    double lp = 0.0;
    for (const auto& s : data_points) lp += log_intensity(chain, draw, k, s);
    return -chain.grid.weight * mass + lp;
}

IntensityChain fit_intensity(const Dataset& ds, const KnotSet& knots, const Kernel& kernel,
                             const LgcpConfig& config, std::uint64_t seed) {
    config.mcmc.validate();
    const int K = ds.K;
    const int n_star = knots.size();
    if (n_star < 1) throw ValidationError("fit_intensity: empty knot set");
    if (!config.prior_only) {
        for (int k = 0; k < K; ++k)
            if (ds.counts[static_cast<std::size_t>(k)] < 1)
                throw ValidationError("fit_intensity: combination " + std::to_string(k + 1) +
                                      " has no observations");
        for (const auto& rec : ds.records)
            if (rec.cov_lambda.size() != 1)
                throw ValidationError(
                    "fit_intensity: intensity covariates beyond the intercept are not "
                    "supported (no covariate surface on the integration grid)");
    }
    if (config.fix_psi &&
        (config.psi_fixed.rows() != K || config.psi_fixed.cols() != K))
        throw ValidationError("fit_intensity: psi_fixed has wrong dimensions");

    IntensityChain chain;
    chain.K = K;
    chain.kernel = kernel;
    chain.km = KnotMatrix::build(knots.all(), kernel, config.jitter);
    chain.grid = IntegrationGrid::build(ds.domain, config.n_ni);
    chain.config = config;

    const double nu = config.iw_df > 0.0 ? config.iw_df : static_cast<double>(K) + 2.0;
    const Eigen::MatrixXd gamma_scale =
        config.iw_scale * Eigen::MatrixXd::Identity(K, K);
    const double cap = config.log_cap;
    const double weight = chain.grid.weight;
    const bool prior_only = config.prior_only;

    const Eigen::MatrixXd proj_grid =
        PPProjection::build(std::span<const Point>(chain.grid.points), chain.km).proj;

    // per-combination data projections and states
    std::vector<std::vector<Point>> pts_by_combo(static_cast<std::size_t>(K));
    for (const auto& rec : ds.records)
        pts_by_combo[static_cast<std::size_t>(rec.combo - 1)].push_back(rec.loc);

    std::vector<ComboState> combos;
    combos.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        ComboState st(Rng::stream(seed, "lgcp/combo/" + std::to_string(k)));
        const auto& pts = pts_by_combo[static_cast<std::size_t>(k)];
        st.beta = Eigen::VectorXd::Zero(1);
        if (!prior_only && !pts.empty())
            st.beta[0] = std::log(static_cast<double>(pts.size()) / ds.domain.area());
        st.w = Eigen::VectorXd::Zero(n_star);
        st.m = Eigen::VectorXd::Zero(n_star);
        st.proj_data = pts.empty()
                           ? Eigen::MatrixXd(0, n_star)
                           : PPProjection::build(std::span<const Point>(pts), chain.km).proj;
        st.g = Eigen::VectorXd::Constant(chain.grid.points.size(), st.beta[0]);
        st.d = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(pts.size()), st.beta[0]);
        st.loglik = data_loglik(st.g, st.d, weight, cap, prior_only);
        st.beta_step = AdaptiveStep(0.1, config.mcmc.adapt_target);
        st.w_step = AdaptiveStep(0.1, config.mcmc.adapt_target);
        combos.push_back(std::move(st));
    }

    Eigen::MatrixXd psi;
    if (config.fix_psi)
        psi = config.psi_fixed;
    else if (nu > static_cast<double>(K) + 1.0)
        psi = gamma_scale / (nu - static_cast<double>(K) - 1.0);
    else
        psi = config.iw_scale * Eigen::MatrixXd::Identity(K, K);
    Eigen::MatrixXd omega = psi.llt().solve(Eigen::MatrixXd::Identity(K, K));

    Rng psi_rng = Rng::stream(seed, "lgcp/psi");
    const auto& mcmc = chain.config.mcmc;
    const int total = mcmc.total_iterations();
    const int threads = config.psi_diagonal ? config.threads : 1;
    const double sigma_beta = config.sigma_beta;

    chain.draws.reserve(static_cast<std::size_t>(mcmc.retained));

    const auto update_combo = [&](int k, bool adapting) {
        ComboState& st = combos[static_cast<std::size_t>(k)];
        // beta block (scalar intercept)
        {
            const double db = st.beta_step.step() * st.rng.normal();
            const Eigen::VectorXd g_new = st.g.array() + db;
            const Eigen::VectorXd d_new = st.d.array() + db;
            const double ll_new = data_loglik(g_new, d_new, weight, cap, prior_only);
            const double b0 = st.beta[0];
            const double dprior =
                -((b0 + db) * (b0 + db) - b0 * b0) / (2.0 * sigma_beta);
            const double lr = ll_new - st.loglik + dprior;
            const double alpha = std::min(1.0, std::exp(lr));
            const bool acc = st.rng.uniform() < alpha;
            if (acc) {
                st.beta[0] += db;
                st.g = g_new;
                st.d = d_new;
                st.loglik = ll_new;
            }
            if (adapting)
                st.beta_step.adapt(alpha);
            else
                st.beta_step.tally(acc);
        }
        // w* block, proposal shaped by chol(C*)
        {
            const double step = st.w_step.step();
            Eigen::VectorXd z(n_star);
            for (int j = 0; j < n_star; ++j) z[j] = st.rng.normal();
            const Eigen::VectorXd delta = step * (chain.km.chol_lower * z);
            const Eigen::VectorXd g_new = st.g + proj_grid * delta;
            const Eigen::VectorXd d_new =
                st.d.size() > 0 ? (st.d + st.proj_data * delta).eval() : st.d;
            const double ll_new = data_loglik(g_new, d_new, weight, cap, prior_only);
            double cross = 0.0;
            for (int l = 0; l < K; ++l)
                cross += omega(k, l) * delta.dot(combos[static_cast<std::size_t>(l)].m);
            const double dquad = 2.0 * cross + omega(k, k) * step * step * z.squaredNorm();
            const double lr = ll_new - st.loglik - 0.5 * dquad;
            const double alpha = std::min(1.0, std::exp(lr));
            const bool acc = st.rng.uniform() < alpha;
            if (acc) {
                st.w += delta;
                const Eigen::VectorXd cinv_delta =
                    chain.km.chol_lower.transpose().triangularView<Eigen::Upper>().solve(z);
                st.m += step * cinv_delta;
                st.g = g_new;
                st.d = d_new;
                st.loglik = ll_new;
            }
            if (adapting)
                st.w_step.adapt(alpha);
            else
                st.w_step.tally(acc);
        }
        // decoupled surface variance: scalar inverse-gamma, own stream
        if (config.psi_diagonal && !config.fix_psi) {
            const double shape = 0.5 * nu + 0.5 * static_cast<double>(n_star);
            const double rate = 0.5 * config.iw_scale + 0.5 * st.w.dot(st.m);
            const double draw = 1.0 / st.rng.gamma(shape, 1.0 / rate);
            psi(k, k) = draw;
            omega(k, k) = 1.0 / draw;
        }
    };

    for (int t = 1; t <= total; ++t) {
        const bool adapting = t <= mcmc.burnin;
        if (config.psi_diagonal)
            parallel_for(K, threads, [&](int k) { update_combo(k, adapting); });
        else
            for (int k = 0; k < K; ++k) update_combo(k, adapting);

        if (!config.psi_diagonal && !config.fix_psi) {
            Eigen::MatrixXd a_mat(K, K);
            for (int k = 0; k < K; ++k)
                for (int l = 0; l <= k; ++l) {
                    const double v = combos[static_cast<std::size_t>(k)].w.dot(
                        combos[static_cast<std::size_t>(l)].m);
                    a_mat(k, l) = v;
                    a_mat(l, k) = v;
                }
            psi = draw_inverse_wishart(gamma_scale + a_mat,
                                       nu + static_cast<double>(n_star), psi_rng);
            omega = psi.llt().solve(Eigen::MatrixXd::Identity(K, K));
        }

        if (t > mcmc.burnin && (t - mcmc.burnin) % mcmc.thin == 0) {
            IntensityDraw draw;
            draw.beta.resize(K, 1);
            draw.w_star.resize(K, n_star);
            double lp = 0.0;
            for (int k = 0; k < K; ++k) {
                const ComboState& st = combos[static_cast<std::size_t>(k)];
                draw.beta(k, 0) = st.beta[0];
                draw.w_star.row(k) = st.w.transpose();
                lp += st.loglik - st.beta[0] * st.beta[0] / (2.0 * sigma_beta);
            }
            double quad = 0.0;
            for (int k = 0; k < K; ++k)
                for (int l = 0; l < K; ++l)
                    quad += omega(k, l) * combos[static_cast<std::size_t>(k)].w.dot(
                                              combos[static_cast<std::size_t>(l)].m);
            lp -= 0.5 * quad;
            if (!std::isfinite(lp) || lp == kNegInf)
                throw NumericalError("fit_intensity: non-finite log-posterior");
            draw.psi = psi;
            chain.draws.push_back(std::move(draw));
            chain.diag.logpost.push_back(lp);
        }
    }

    chain.diag.accept_beta.resize(static_cast<std::size_t>(K));
    chain.diag.accept_w.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        chain.diag.accept_beta[static_cast<std::size_t>(k)] =
            combos[static_cast<std::size_t>(k)].beta_step.acceptance_rate();
        chain.diag.accept_w[static_cast<std::size_t>(k)] =
            combos[static_cast<std::size_t>(k)].w_step.acceptance_rate();
    }
    return chain;
}

} // namespace geosynth
