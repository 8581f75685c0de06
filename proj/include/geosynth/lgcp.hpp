#pragma once
// Per-combination log-Gaussian Cox process with a numerically
// integrated likelihood and predictive-process random effects.
//
// Combination indices are 0-based at this level; Record.combo stays
// 1-based in the data layer.

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

// Regular lattice covering the domain; weight = |D| / n_ni.
struct IntegrationGrid {
    std::vector<Point> points;
    double weight = 0.0;

    static IntegrationGrid build(const SpatialDomain& domain, int n_ni);
};

struct LgcpConfig {
    int n_ni = 2500;          // integration grid size
    double log_cap = 30.0;    // cap on log-intensity inside exp()
    bool psi_diagonal = false;
    double sigma_beta = 100.0; // prior variance of each regression coefficient
    double iw_scale = 1.0;     // Gamma = iw_scale * I
    double iw_df = 0.0;        // <= 0 resolves to K + 2
    double phi_lo = 0.0;       // decay prior bounds, kept for a future
    double phi_hi = -1.0;      // non-fixed-decay option (unused while fixed)
    double jitter = 1e-8;
    bool fix_psi = false;      // hold Psi at psi_fixed (no update)
    Eigen::MatrixXd psi_fixed;
    bool prior_only = false;   // drop the data term (prior-recovery checks)
    int threads = 1;           // per-combination workers; > 1 needs psi_diagonal
    McmcSettings mcmc;
};

struct IntensityDraw {
    Eigen::MatrixXd beta;   // K x p
    Eigen::MatrixXd w_star; // K x n*
    Eigen::MatrixXd psi;    // K x K
};

struct IntensityChain {
    int K = 0;
    Kernel kernel;
    KnotMatrix km;
    IntegrationGrid grid;
    LgcpConfig config;
    std::vector<IntensityDraw> draws;
    ChainDiagnostics diag;
};

// x(s)' beta_k + C(s)'(C*)^{-1} w*_k for one location.
double log_intensity(const IntensityChain& chain, const IntensityDraw& draw, int k,
                     const Point& s, std::span<const double> x_lambda);

// Convenience for intercept-only surfaces.
double log_intensity(const IntensityChain& chain, const IntensityDraw& draw, int k,
                     const Point& s);

// elementwise exp(log_intensity); strictly positive
std::vector<double> intensity_surface(const IntensityChain& chain, const IntensityDraw& draw,
                                      int k, std::span<const Point> locs);

// -(|D|/n_ni) sum_grid lambda + sum_data log lambda for combination k.
double lgcp_loglik(const IntensityChain& chain, const IntensityDraw& draw, int k,
                   std::span<const Point> data_points);

// Metropolis-within-Gibbs chain over (beta, w*, Psi) with fixed decay.
IntensityChain fit_intensity(const Dataset& ds, const KnotSet& knots, const Kernel& kernel,
                             const LgcpConfig& config, std::uint64_t seed);

} // namespace geosynth
