#pragma once
// Correlation kernels, knot cross-correlation matrices, and the
// predictive-process projector shared by the intensity and mark models.

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "geosynth/data.hpp"
#include "geosynth/errors.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

enum class KernelFamily { Exponential, Matern32 };

KernelFamily kernel_family_from_string(const std::string& s);
std::string to_string(KernelFamily f);

struct Kernel {
    KernelFamily family = KernelFamily::Exponential;
    double decay = 1.0; // phi > 0

    // Correlation at distance d; 1 at d == 0, non-increasing in d.
    double operator()(double d) const;
};

double corr(const Kernel& k, double d); // throws on negative distance

// Decay value such that corr(range) == level (default: effective range
// at the conventional 0.05 correlation).
double decay_for_effective_range(KernelFamily family, double range, double level = 0.05);

// Knot correlation matrix C* with its cached Cholesky factor. The
// configured jitter is added to the diagonal before factorization;
// failure after jitter is a hard error.
struct KnotMatrix {
    Kernel kernel;
    std::vector<Point> knots;
    Eigen::MatrixXd corr;       // n* x n*, unit diagonal before jitter
    Eigen::MatrixXd chol_lower; // L with L L' = corr + jitter I
    double jitter = 1e-8;

    int size() const { return static_cast<int>(knots.size()); }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const; // (C*)^{-1} b
    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

    static KnotMatrix build(std::vector<Point> knots, const Kernel& kernel,
                            double jitter = 1e-8);
};

// Correlations between a location and every knot.
Eigen::VectorXd cross_corr(const Kernel& kernel, const Point& s, std::span<const Point> knots);

// Scalar predictive-process projection C(s)'(C*)^{-1} w*.
double pp_project(const Eigen::VectorXd& c_s, const KnotMatrix& km, const Eigen::VectorXd& w_star);

// Bias-correction variance C(s,s) - C(s)'(C*)^{-1}C(s), clamped at
// `floor` (>= 0). Zero when s coincides with a knot.
double pp_residual_var(const Eigen::VectorXd& c_s, const KnotMatrix& km, double floor = 0.0);

// Projection rows and residual variances precomputed for a fixed set of
// locations: w_tilde = proj * w*, resid_var[i] on the correlation scale.
struct PPProjection {
    Eigen::MatrixXd proj;      // n_loc x n*
    Eigen::VectorXd resid_var; // n_loc

    static PPProjection build(std::span<const Point> locs, const KnotMatrix& km,
                              double floor = 0.0);
};

// Draw from IW(scale, df): density |X|^{-(df+K+1)/2} exp(-tr(scale X^{-1})/2),
// mean scale/(df-K-1) for df > K+1. df may be non-integer.
Eigen::MatrixXd draw_inverse_wishart(const Eigen::MatrixXd& scale, double df, Rng& rng);

// Lower Cholesky factor of an SPD matrix; throws NumericalError.
Eigen::MatrixXd chol_lower_spd(const Eigen::MatrixXd& a, const std::string& what);

} // namespace geosynth
