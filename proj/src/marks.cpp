#include "geosynth/marks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace geosynth {

MarkFamily mark_family_from_string(const std::string& s) {
    if (s == "normal") return MarkFamily::Normal;
    if (s == "truncated-poisson" || s == "trunc-pois") return MarkFamily::TruncatedPoisson;
    throw ValidationError("unknown mark family: " + s);
}

std::string to_string(MarkFamily f) {
    return f == MarkFamily::Normal ? "normal" : "truncated-poisson";
}

namespace {

// log Poisson kernel y*log(r) - r - lgamma(y+1)
inline double pois_term(double log_rate, double rate, long y) {
    return static_cast<double>(y) * log_rate - rate - std::lgamma(static_cast<double>(y) + 1.0);
}

// log normalizing constant over [lo, hi]; hi < 0 sums until the terms
// are negligible past the mode.
double trunc_pois_logz(double rate, int lo, int hi) {
    const double log_rate = std::log(rate);
    const long mode = std::max<long>(lo, static_cast<long>(std::floor(rate)));
    long last = hi >= 0 ? hi : std::max<long>(mode + 60,
                                              mode + static_cast<long>(12.0 * std::sqrt(rate)));
    double tmax = -std::numeric_limits<double>::infinity();
    for (long y = lo; y <= last; ++y) tmax = std::max(tmax, pois_term(log_rate, rate, y));
    double z = 0.0;
    for (long y = lo; y <= last; ++y) {
        const double t = pois_term(log_rate, rate, y);
        z += std::exp(t - tmax);
        if (hi < 0 && y > mode && t - tmax < -46.0) break;
    }
    return tmax + std::log(z);
}

void check_trunc_args(double rate, long y, int lo, int hi) {
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw ValidationError("truncated Poisson: rate must be positive and finite");
    if (lo < 0 || (hi >= 0 && hi < lo))
        throw ValidationError("truncated Poisson: bad support bounds");
    if (y < lo || (hi >= 0 && y > hi))
        throw ValidationError("truncated Poisson: value outside support bounds");
}

} // namespace

double trunc_pois_logpmf(double rate, long y, int lo, int hi) {
    check_trunc_args(rate, y, lo, hi);
    return pois_term(std::log(rate), rate, y) - trunc_pois_logz(rate, lo, hi);
}

double trunc_pois_pmf(double rate, long y, int lo, int hi) {
    return std::exp(trunc_pois_logpmf(rate, y, lo, hi));
}

long draw_trunc_pois(double rate, int lo, int hi, Rng& rng) {
    check_trunc_args(rate, lo, lo, hi);
    const double log_rate = std::log(rate);
    const double logz = trunc_pois_logz(rate, lo, hi);
    const double u = rng.uniform_pos();
    const long mode = std::max<long>(lo, static_cast<long>(std::floor(rate)));
    const long last = hi >= 0 ? hi : std::max<long>(mode + 60,
                                                    mode + static_cast<long>(12.0 * std::sqrt(rate)));
    double cum = 0.0;
    long y = lo;
    for (; y <= last; ++y) {
        cum += std::exp(pois_term(log_rate, rate, y) - logz);
        if (cum >= u) return y;
    }
    return last;
}

double draw_w_tilde_at(double proj_mean, double resid_var, double psi_kk, Rng& rng) {
    const double var = psi_kk * resid_var;
    if (var <= 0.0) return proj_mean;
    return proj_mean + std::sqrt(var) * rng.normal();
}

double draw_w_tilde(const MarkChain& chain, const MarkDraw& draw, int k, const Point& s,
                    Rng& rng) {
    if (k < 0 || k >= chain.K) throw ValidationError("draw_w_tilde: combination out of range");
    const Eigen::VectorXd c = cross_corr(chain.kernel, s, std::span<const Point>(chain.km.knots));
    const double proj = pp_project(c, chain.km, draw.w_star.row(k).transpose());
    const double v = pp_residual_var(c, chain.km, chain.config.resid_floor);
    return draw_w_tilde_at(proj, v, draw.psi(k, k), rng);
}

double mark_mean(const Eigen::VectorXd& beta_k, std::span<const double> x, double w_tilde) {
    if (static_cast<Eigen::Index>(x.size()) != beta_k.size())
        throw ValidationError("mark_mean: covariate length mismatch");
    double lin = w_tilde;
    for (Eigen::Index j = 0; j < beta_k.size(); ++j)
        lin += beta_k[j] * x[static_cast<std::size_t>(j)];
    return lin;
}

double draw_mark_at(const MarkChain& chain, const MarkDraw& draw, int k, double proj_mean,
                    double resid_var, std::span<const double> x_mark, Rng& rng) {
    const Eigen::VectorXd beta_k = draw.beta.row(k).transpose();
    if (chain.family == MarkFamily::Normal) {
        const double w_tilde = draw_w_tilde_at(proj_mean, resid_var, draw.psi(k, k), rng);
        const double mu = mark_mean(beta_k, x_mark, w_tilde);
        const double s2 = draw.sigma2[k];
        return s2 > 0.0 ? rng.normal(mu, std::sqrt(s2)) : mu;
    }
    const double eta = std::clamp(mark_mean(beta_k, x_mark, proj_mean),
                                  -chain.config.log_cap, chain.config.log_cap);
    return static_cast<double>(draw_trunc_pois(std::exp(eta), chain.lo, chain.hi, rng));
}

double draw_mark(const MarkChain& chain, const MarkDraw& draw, int k, const Point& s,
                 std::span<const double> x_mark, Rng& rng) {
    if (k < 0 || k >= chain.K) throw ValidationError("draw_mark: combination out of range");
    const Eigen::VectorXd c = cross_corr(chain.kernel, s, std::span<const Point>(chain.km.knots));
    const double proj = pp_project(c, chain.km, draw.w_star.row(k).transpose());
    const double v = pp_residual_var(c, chain.km, chain.config.resid_floor);
    return draw_mark_at(chain, draw, k, proj, v, x_mark, rng);
}

namespace {

struct MarkComboData {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;     // n_k x p
    Eigen::MatrixXd proj;  // n_k x n*
    Eigen::MatrixXd z;     // [x | proj], the joint design
    Eigen::VectorXd v;     // floored correlation-scale residual variances
    std::vector<long> y_int;
};

struct MarkComboState {
    Rng rng;
    Eigen::VectorXd beta;
    Eigen::VectorXd w;       // n*
    Eigen::VectorXd m;       // (C*)^{-1} w
    Eigen::VectorXd xb;      // X beta
    Eigen::VectorXd mu_pp;   // proj w
    Eigen::VectorXd w_tilde; // normal family latent effects
    double sigma2 = 1.0;
    double loglik = 0.0;     // truncated family only
    AdaptiveStep beta_step;
    AdaptiveStep w_step;

    explicit MarkComboState(Rng r) : rng(std::move(r)) {}
};

double trunc_loglik(const Eigen::VectorXd& eta, const std::vector<long>& y, int lo, int hi,
                    double cap) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double rate = std::exp(std::clamp(eta[i], -cap, cap));
        ll += trunc_pois_logpmf(rate, y[static_cast<std::size_t>(i)], lo, hi);
    }
    return ll;
}

} // namespace

MarkChain fit_marks(const Dataset& ds, const KnotSet& knots, const Kernel& kernel,
                    const MarkConfig& config, std::uint64_t seed) {
    config.mcmc.validate();
    const int K = ds.K;
    const int n_star = knots.size();
    if (n_star < 1) throw ValidationError("fit_marks: empty knot set");
    const bool normal = config.family == MarkFamily::Normal;
    for (int k = 0; k < K; ++k) {
        const long nk = ds.counts[static_cast<std::size_t>(k)];
        if (nk < 1)
            throw ValidationError("fit_marks: combination " + std::to_string(k + 1) +
                                  " has no observations");
        if (normal && nk < 2)
            throw ValidationError("fit_marks: normal family needs at least 2 observations "
                                  "per combination (improper sigma prior)");
    }
    if (!normal) {
        if (config.lo < 0 || (config.hi >= 0 && config.hi <= config.lo))
            throw ValidationError("fit_marks: truncation bounds need 0 <= lo < hi");
        for (const auto& rec : ds.records) {
            if (rec.mark != std::floor(rec.mark))
                throw ValidationError("fit_marks: truncated-Poisson marks must be integers");
            const long y = static_cast<long>(rec.mark);
            if (y < config.lo || (config.hi >= 0 && y > config.hi))
                throw ValidationError("fit_marks: mark outside the truncation bounds");
        }
    }
    if (config.fix_psi && (config.psi_fixed.rows() != K || config.psi_fixed.cols() != K))
        throw ValidationError("fit_marks: psi_fixed has wrong dimensions");

    MarkChain chain;
    chain.K = K;
    chain.family = config.family;
    chain.lo = config.lo;
    chain.hi = config.hi;
    chain.kernel = kernel;
    chain.km = KnotMatrix::build(knots.all(), kernel, config.jitter);
    chain.config = config;

    const int p = static_cast<int>(ds.records.front().cov_mark.size());
    chain.p = p;

    // gather per-combination data
    std::vector<MarkComboData> data(static_cast<std::size_t>(K));
    {
        std::vector<std::vector<const Record*>> by_combo(static_cast<std::size_t>(K));
        for (const auto& rec : ds.records)
            by_combo[static_cast<std::size_t>(rec.combo - 1)].push_back(&rec);
        for (int k = 0; k < K; ++k) {
            auto& dk = data[static_cast<std::size_t>(k)];
            const auto& recs = by_combo[static_cast<std::size_t>(k)];
            const int nk = static_cast<int>(recs.size());
            dk.y.resize(nk);
            dk.x.resize(nk, p);
            std::vector<Point> locs(recs.size());
            for (int i = 0; i < nk; ++i) {
                dk.y[i] = recs[static_cast<std::size_t>(i)]->mark;
                for (int j = 0; j < p; ++j)
                    dk.x(i, j) = recs[static_cast<std::size_t>(i)]->cov_mark[static_cast<std::size_t>(j)];
                locs[static_cast<std::size_t>(i)] = recs[static_cast<std::size_t>(i)]->loc;
                dk.y_int.push_back(static_cast<long>(dk.y[i]));
            }
            const auto pp = PPProjection::build(std::span<const Point>(locs), chain.km,
                                                config.var_floor);
            dk.proj = pp.proj;
            dk.v = pp.resid_var.cwiseMax(config.var_floor);
            dk.z.resize(nk, p + n_star);
            dk.z << dk.x, dk.proj;
        }
    }

    const double nu = config.iw_df > 0.0 ? config.iw_df : static_cast<double>(K) + 2.0;
    const Eigen::MatrixXd gamma_scale = config.iw_scale * Eigen::MatrixXd::Identity(K, K);
    const bool spatial = config.spatial;
    const bool flat_beta = config.sigma_beta <= 0.0;

    std::vector<MarkComboState> combos;
    combos.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        MarkComboState st(Rng::stream(seed, "marks/combo/" + std::to_string(k)));
        const auto& dk = data[static_cast<std::size_t>(k)];
        st.beta = Eigen::VectorXd::Zero(p);
        const double ybar = dk.y.mean();
        st.beta[0] = normal ? ybar : std::log(std::max(ybar, 1e-3));
        st.w = Eigen::VectorXd::Zero(n_star);
        st.m = Eigen::VectorXd::Zero(n_star);
        st.xb = dk.x * st.beta;
        st.mu_pp = Eigen::VectorXd::Zero(dk.y.size());
        st.w_tilde = Eigen::VectorXd::Zero(dk.y.size());
        st.sigma2 = normal ? std::max(1e-6, (dk.y.array() - ybar).square().sum() /
                                                 std::max(1.0, double(dk.y.size() - 1)))
                           : 0.0;
        if (!normal)
            st.loglik = trunc_loglik(st.xb + st.mu_pp, dk.y_int, config.lo, config.hi,
                                     config.log_cap);
        st.beta_step = AdaptiveStep(0.05, config.mcmc.adapt_target);
        st.w_step = AdaptiveStep(0.05, config.mcmc.adapt_target);
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

    Rng psi_rng = Rng::stream(seed, "marks/psi");
    const auto& mcmc = chain.config.mcmc;
    const int total = mcmc.total_iterations();
    const int threads = config.psi_diagonal ? config.threads : 1;
    long psi_accepts = 0, psi_attempts = 0;
    const Eigen::MatrixXd eye_nstar = Eigen::MatrixXd::Identity(n_star, n_star);
    const Eigen::MatrixXd cstar_inv = chain.km.solve(eye_nstar);

    const auto update_normal = [&](int k) {
        MarkComboState& st = combos[static_cast<std::size_t>(k)];
        const auto& dk = data[static_cast<std::size_t>(k)];
        const int nk = static_cast<int>(dk.y.size());
        const double psi_kk = psi(k, k);

        // (beta, w*) jointly, with w_tilde integrated out of the
        // likelihood: y_i ~ N(x_i'beta + p_i'w*, sigma2 + psi_kk v_i).
        // Keeps the intercept and the field mean from trading off
        // through a slow-mixing ridge.
        {
            const int dim = spatial ? p + n_star : p;
            Eigen::VectorXd dvec(nk);
            for (int i = 0; i < nk; ++i)
                dvec[i] = 1.0 / (st.sigma2 + (spatial ? psi_kk * dk.v[i] : 0.0));
            const Eigen::MatrixXd& design = spatial ? dk.z : dk.x;
            Eigen::MatrixXd prec =
                design.transpose() * dvec.asDiagonal() * design;
            Eigen::VectorXd rhs = design.transpose() * (dvec.asDiagonal() * dk.y);
            if (!flat_beta)
                for (int j = 0; j < p; ++j) prec(j, j) += 1.0 / config.sigma_beta;
            if (spatial) {
                prec.block(p, p, n_star, n_star) += omega(k, k) * cstar_inv;
                for (int l = 0; l < K; ++l)
                    if (l != k)
                        rhs.segment(p, n_star) -=
                            omega(k, l) * combos[static_cast<std::size_t>(l)].m;
            }
            Eigen::LLT<Eigen::MatrixXd> llt(prec);
            if (llt.info() != Eigen::Success)
                throw NumericalError("fit_marks: joint coefficient update failed");
            Eigen::VectorXd z(dim);
            for (int j = 0; j < dim; ++j) z[j] = st.rng.normal();
            const Eigen::VectorXd mean = llt.solve(rhs);
            const Eigen::VectorXd draw =
                mean + Eigen::MatrixXd(llt.matrixL())
                           .transpose()
                           .triangularView<Eigen::Upper>()
                           .solve(z);
            st.beta = draw.head(p);
            st.xb = dk.x * st.beta;
            if (spatial) {
                st.w = draw.tail(n_star);
                st.m = chain.km.solve(st.w);
                st.mu_pp = dk.proj * st.w;
            }
        }

        // latent modified-PP effects from their full conditional
        if (spatial) {
            for (int i = 0; i < nk; ++i) {
                const double prec_p = 1.0 / (psi_kk * dk.v[i]);
                const double prec_e = 1.0 / st.sigma2;
                const double var = 1.0 / (prec_p + prec_e);
                const double mu =
                    var * (st.mu_pp[i] * prec_p + (dk.y[i] - st.xb[i]) * prec_e);
                st.w_tilde[i] = mu + std::sqrt(var) * st.rng.normal();
            }
        }

        // sigma^2 with the improper uniform prior on sigma
        {
            const Eigen::VectorXd resid = dk.y - st.xb - st.w_tilde;
            const double ss = resid.squaredNorm();
            if (!(ss > 0.0))
                throw NumericalError("fit_marks: sigma2 update underflow");
            const double shape = 0.5 * (static_cast<double>(nk) - 1.0);
            st.sigma2 = 1.0 / st.rng.gamma(shape, 2.0 / ss);
        }

        if (config.psi_diagonal && !config.fix_psi && spatial) {
            double s_corr = 0.0;
            for (int i = 0; i < nk; ++i) {
                const double e = st.w_tilde[i] - st.mu_pp[i];
                s_corr += e * e / dk.v[i];
            }
            const double shape = 0.5 * nu + 0.5 * static_cast<double>(n_star) +
                                 0.5 * static_cast<double>(nk);
            const double rate = 0.5 * config.iw_scale + 0.5 * st.w.dot(st.m) + 0.5 * s_corr;
            const double draw = 1.0 / st.rng.gamma(shape, 1.0 / rate);
            psi(k, k) = draw;
            omega(k, k) = 1.0 / draw;
        }
    };

    const auto update_trunc = [&](int k, bool adapting) {
        MarkComboState& st = combos[static_cast<std::size_t>(k)];
        const auto& dk = data[static_cast<std::size_t>(k)];
        // beta block
        {
            const double step = st.beta_step.step();
            Eigen::VectorXd db(p);
            for (int j = 0; j < p; ++j) db[j] = step * st.rng.normal();
            const Eigen::VectorXd xb_new = st.xb + dk.x * db;
            const double ll_new = trunc_loglik(xb_new + st.mu_pp, dk.y_int, config.lo,
                                               config.hi, config.log_cap);
            double dprior = 0.0;
            if (!flat_beta)
                dprior = -((st.beta + db).squaredNorm() - st.beta.squaredNorm()) /
                         (2.0 * config.sigma_beta);
            const double lr = ll_new - st.loglik + dprior;
            const double alpha = std::min(1.0, std::exp(lr));
            const bool acc = st.rng.uniform() < alpha;
            if (acc) {
                st.beta += db;
                st.xb = xb_new;
                st.loglik = ll_new;
            }
            if (adapting)
                st.beta_step.adapt(alpha);
            else
                st.beta_step.tally(acc);
        }
        // w* block
        if (spatial) {
            const double step = st.w_step.step();
            Eigen::VectorXd z(n_star);
            for (int j = 0; j < n_star; ++j) z[j] = st.rng.normal();
            const Eigen::VectorXd delta = step * (chain.km.chol_lower * z);
            const Eigen::VectorXd mu_new = st.mu_pp + dk.proj * delta;
            const double ll_new =
                trunc_loglik(st.xb + mu_new, dk.y_int, config.lo, config.hi, config.log_cap);
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
                st.mu_pp = mu_new;
                st.loglik = ll_new;
            }
            if (adapting)
                st.w_step.adapt(alpha);
            else
                st.w_step.tally(acc);
        }
        if (config.psi_diagonal && !config.fix_psi && spatial) {
            const double shape = 0.5 * nu + 0.5 * static_cast<double>(n_star);
            const double rate = 0.5 * config.iw_scale + 0.5 * st.w.dot(st.m);
            const double draw = 1.0 / st.rng.gamma(shape, 1.0 / rate);
            psi(k, k) = draw;
            omega(k, k) = 1.0 / draw;
        }
    };

    chain.draws.reserve(static_cast<std::size_t>(mcmc.retained));
    for (int t = 1; t <= total; ++t) {
        const bool adapting = t <= mcmc.burnin;
        const auto sweep = [&](int k) {
            if (normal)
                update_normal(k);
            else
                update_trunc(k, adapting);
        };
        if (config.psi_diagonal)
            parallel_for(K, threads, sweep);
        else
            for (int k = 0; k < K; ++k) sweep(k);

        if (!config.psi_diagonal && !config.fix_psi && spatial) {
            Eigen::MatrixXd a_mat(K, K);
            for (int k = 0; k < K; ++k)
                for (int l = 0; l <= k; ++l) {
                    const double v = combos[static_cast<std::size_t>(k)].w.dot(
                        combos[static_cast<std::size_t>(l)].m);
                    a_mat(k, l) = v;
                    a_mat(l, k) = v;
                }
            const Eigen::MatrixXd proposal = draw_inverse_wishart(
                gamma_scale + a_mat, nu + static_cast<double>(n_star), psi_rng);
            if (normal) {
                // the modified-PP term depends on the diagonal of Psi and
                // breaks exact conjugacy; metropolize the conjugate proposal
                double lr = 0.0;
                for (int k = 0; k < K; ++k) {
                    const MarkComboState& st = combos[static_cast<std::size_t>(k)];
                    const auto& dk = data[static_cast<std::size_t>(k)];
                    double s_corr = 0.0;
                    for (Eigen::Index i = 0; i < dk.y.size(); ++i) {
                        const double e = st.w_tilde[i] - st.mu_pp[i];
                        s_corr += e * e / dk.v[i];
                    }
                    const double nk = static_cast<double>(dk.y.size());
                    lr += -0.5 * nk * std::log(proposal(k, k)) - 0.5 * s_corr / proposal(k, k);
                    lr -= -0.5 * nk * std::log(psi(k, k)) - 0.5 * s_corr / psi(k, k);
                }
                ++psi_attempts;
                if (psi_rng.uniform() < std::min(1.0, std::exp(lr))) {
                    psi = proposal;
                    ++psi_accepts;
                }
            } else {
                psi = proposal;
            }
            omega = psi.llt().solve(Eigen::MatrixXd::Identity(K, K));
        }

        if (t > mcmc.burnin && (t - mcmc.burnin) % mcmc.thin == 0) {
            MarkDraw draw;
            draw.beta.resize(K, p);
            draw.w_star.resize(K, n_star);
            draw.sigma2 = Eigen::VectorXd::Zero(K);
            double lp = 0.0;
            for (int k = 0; k < K; ++k) {
                const MarkComboState& st = combos[static_cast<std::size_t>(k)];
                draw.beta.row(k) = st.beta.transpose();
                draw.w_star.row(k) = st.w.transpose();
                if (normal) {
                    draw.sigma2[k] = st.sigma2;
                    draw.w_tilde.push_back(st.w_tilde);
                }
                lp += normal ? -0.5 * (data[static_cast<std::size_t>(k)].y -
                                       st.xb - st.w_tilde)
                                          .squaredNorm() /
                                   st.sigma2
                             : st.loglik;
            }
            if (!std::isfinite(lp))
                throw NumericalError("fit_marks: non-finite log-posterior");
            draw.psi = psi;
            chain.draws.push_back(std::move(draw));
            chain.diag.logpost.push_back(lp);
        }
    }

    chain.diag.accept_beta.assign(static_cast<std::size_t>(K), 1.0);
    chain.diag.accept_w.assign(static_cast<std::size_t>(K), 1.0);
    if (!normal) {
        for (int k = 0; k < K; ++k) {
            chain.diag.accept_beta[static_cast<std::size_t>(k)] =
                combos[static_cast<std::size_t>(k)].beta_step.acceptance_rate();
            chain.diag.accept_w[static_cast<std::size_t>(k)] =
                combos[static_cast<std::size_t>(k)].w_step.acceptance_rate();
        }
    }
    chain.diag.accept_psi =
        psi_attempts > 0 ? static_cast<double>(psi_accepts) / static_cast<double>(psi_attempts)
                         : 1.0;
    return chain;
}

} // namespace geosynth
