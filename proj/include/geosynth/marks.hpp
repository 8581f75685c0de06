#pragma once
// Per-combination non-categorical mark regression with the modified
// predictive process: normal family and truncated-Poisson family.
//
// Combination indices are 0-based here; Record.combo stays 1-based.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "geosynth/covariance.hpp"
#include "geosynth/data.hpp"
#include "geosynth/knots_types.hpp"
#include "geosynth/mcmc.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

enum class MarkFamily { Normal, TruncatedPoisson };

MarkFamily mark_family_from_string(const std::string& s);
std::string to_string(MarkFamily f);

// Poisson pmf renormalized over integer support [lo, hi]; hi < 0 means
// unbounded above. Exact to double precision for rates in (0, ~e^300).
double trunc_pois_logpmf(double rate, long y, int lo, int hi);
double trunc_pois_pmf(double rate, long y, int lo, int hi);

// Inverse-CDF draw over the integer support (exact, no rejection).
long draw_trunc_pois(double rate, int lo, int hi, Rng& rng);

struct MarkConfig {
    MarkFamily family = MarkFamily::TruncatedPoisson;
    int lo = 16;
    int hi = 98;               // hi < 0: unbounded above
    bool psi_diagonal = false;
    double sigma_beta = 100.0; // <= 0: flat prior on beta
    double iw_scale = 1.0;
    double iw_df = 0.0;        // <= 0 resolves to K + 2
    double phi_lo = 0.0;       // decay prior bounds, kept for a future
    double phi_hi = -1.0;      // non-fixed-decay option (unused while fixed)
    double jitter = 1e-8;
    double log_cap = 30.0;     // cap on the truncated-Poisson log rate
    double resid_floor = 0.0;  // clamp for pp_residual_var at draw time
    double var_floor = 1e-10;  // clamp on the correlation-scale residual in the Gibbs
    bool spatial = true;       // false: w* and w_tilde identically zero
    bool fix_psi = false;
    Eigen::MatrixXd psi_fixed;
    int threads = 1;           // per-combination workers; > 1 needs psi_diagonal
    McmcSettings mcmc;
};

struct MarkDraw {
    Eigen::MatrixXd beta;   // K x p
    Eigen::MatrixXd w_star; // K x n*
    Eigen::VectorXd sigma2; // K, zero for the truncated family
    Eigen::MatrixXd psi;
    // per-record realized modified-PP effects, one vector per
    // combination; empty for the truncated family (plain projection)
    std::vector<Eigen::VectorXd> w_tilde;
};

struct MarkChain {
    int K = 0;
    int p = 1;
    MarkFamily family = MarkFamily::TruncatedPoisson;
    int lo = 16;
    int hi = 98;
    Kernel kernel;
    KnotMatrix km;
    MarkConfig config;
    std::vector<MarkDraw> draws;
    ChainDiagnostics diag;
};

// Modified-predictive-process draw at s:
// N(C(s)'(C*)^{-1} w*_k, psi_kk * (C(s,s) - C(s)'(C*)^{-1}C(s))).
double draw_w_tilde(const MarkChain& chain, const MarkDraw& draw, int k, const Point& s,
                    Rng& rng);
double draw_w_tilde_at(double proj_mean, double resid_var, double psi_kk, Rng& rng);

// Linear predictor x'beta + w_tilde; the truncated family exponentiates it.
double mark_mean(const Eigen::VectorXd& beta_k, std::span<const double> x, double w_tilde);

// Posterior-predictive draw of one mark at location s with draw-l parameters.
// Normal family redraws w_tilde from the modified predictive process;
// the truncated family uses the plain projection, matching its fit.
double draw_mark(const MarkChain& chain, const MarkDraw& draw, int k, const Point& s,
                 std::span<const double> x_mark, Rng& rng);
double draw_mark_at(const MarkChain& chain, const MarkDraw& draw, int k, double proj_mean,
                    double resid_var, std::span<const double> x_mark, Rng& rng);

MarkChain fit_marks(const Dataset& ds, const KnotSet& knots, const Kernel& kernel,
                    const MarkConfig& config, std::uint64_t seed);

} // namespace geosynth
