#include "geosynth/covariance.hpp"

#include <cmath>

namespace geosynth {

KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "exponential") return KernelFamily::Exponential;
    if (s == "matern-3/2" || s == "matern32") return KernelFamily::Matern32;
    throw ValidationError("unknown kernel family: " + s);
}

std::string to_string(KernelFamily f) {
    return f == KernelFamily::Exponential ? "exponential" : "matern-3/2";
}

double Kernel::operator()(double d) const {
    switch (family) {
        case KernelFamily::Exponential:
            return std::exp(-decay * d);
        case KernelFamily::Matern32: {
            const double t = std::sqrt(3.0) * decay * d;
            return (1.0 + t) * std::exp(-t);
        }
    }
    return 0.0;
}

double corr(const Kernel& k, double d) {
    if (d < 0.0) throw ValidationError("corr: negative distance");
    if (!(k.decay > 0.0)) throw ValidationError("corr: decay must be positive");
    return k(d);
}

double decay_for_effective_range(KernelFamily family, double range, double level) {
    if (!(range > 0.0) || !(level > 0.0 && level < 1.0))
        throw ValidationError("decay_for_effective_range: bad arguments");
    if (family == KernelFamily::Exponential) return -std::log(level) / range;
    // matern-3/2: solve (1+t)exp(-t) = level for t = sqrt(3) phi range
    double lo = 0.0, hi = 1.0;
    const auto f = [](double t) { return (1.0 + t) * std::exp(-t); };
    while (f(hi) > level) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > level)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi) / (std::sqrt(3.0) * range);
}

Eigen::MatrixXd chol_lower_spd(const Eigen::MatrixXd& a, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError(what + ": Cholesky factorization failed");
    return llt.matrixL();
}

KnotMatrix KnotMatrix::build(std::vector<Point> knots, const Kernel& kernel, double jitter) {
    if (knots.empty()) throw ValidationError("KnotMatrix: empty knot set");
    if (jitter < 0.0) throw ValidationError("KnotMatrix: negative jitter");
    KnotMatrix km;
    km.kernel = kernel;
    km.knots = std::move(knots);
    const int n = km.size();
    km.corr.resize(n, n);
    for (int i = 0; i < n; ++i) {
        km.corr(i, i) = 1.0;
        for (int j = 0; j < i; ++j) {
            const double c = geosynth::corr(kernel, distance(km.knots[i], km.knots[j]));
            km.corr(i, j) = c;
            km.corr(j, i) = c;
        }
    }
    km.jitter = jitter;
    Eigen::MatrixXd a = km.corr;
    a.diagonal().array() += jitter;
    km.chol_lower = chol_lower_spd(a, "knot correlation matrix C*");
    return km;
}

Eigen::VectorXd KnotMatrix::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd y = chol_lower.triangularView<Eigen::Lower>().solve(b);
    return chol_lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd KnotMatrix::solve(const Eigen::MatrixXd& B) const {
    Eigen::MatrixXd y = chol_lower.triangularView<Eigen::Lower>().solve(B);
    return chol_lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::VectorXd cross_corr(const Kernel& kernel, const Point& s, std::span<const Point> knots) {
    if (knots.empty()) throw ValidationError("cross_corr: empty knot set");
    Eigen::VectorXd c(static_cast<Eigen::Index>(knots.size()));
    for (std::size_t j = 0; j < knots.size(); ++j)
        c[static_cast<Eigen::Index>(j)] = corr(kernel, distance(s, knots[j]));
    return c;
}

double pp_project(const Eigen::VectorXd& c_s, const KnotMatrix& km, const Eigen::VectorXd& w_star) {
    if (c_s.size() != km.size() || w_star.size() != km.size())
        throw ValidationError("pp_project: dimension mismatch");
    return km.solve(c_s).dot(w_star);
}

double pp_residual_var(const Eigen::VectorXd& c_s, const KnotMatrix& km, double floor) {
    if (c_s.size() != km.size()) throw ValidationError("pp_residual_var: dimension mismatch");
    if (floor < 0.0) throw ValidationError("pp_residual_var: negative floor");
    const double v = 1.0 - km.solve(c_s).dot(c_s);
    return std::max(v, floor);
}

PPProjection PPProjection::build(std::span<const Point> locs, const KnotMatrix& km,
                                 double floor) {
    PPProjection pp;
    const int n = static_cast<int>(locs.size());
    const int m = km.size();
    Eigen::MatrixXd cross(m, n);
    for (int i = 0; i < n; ++i)
        cross.col(i) = cross_corr(km.kernel, locs[static_cast<std::size_t>(i)],
                                  std::span<const Point>(km.knots));
    const Eigen::MatrixXd solved = km.solve(cross); // m x n, columns (C*)^{-1} c(s_i)
    pp.proj = solved.transpose();
    pp.resid_var.resize(n);
    for (int i = 0; i < n; ++i)
        pp.resid_var[i] = std::max(1.0 - solved.col(i).dot(cross.col(i)), floor);
    return pp;
}

Eigen::MatrixXd draw_inverse_wishart(const Eigen::MatrixXd& scale, double df, Rng& rng) {
    const int k = static_cast<int>(scale.rows());
    if (scale.cols() != k) throw ValidationError("draw_inverse_wishart: scale must be square");
    if (!(df > static_cast<double>(k) - 1.0))
        throw ValidationError("draw_inverse_wishart: df must exceed K-1");

    // X^{-1} ~ Wishart(df, scale^{-1}); Bartlett construction.
    const Eigen::MatrixXd ls = chol_lower_spd(scale, "inverse-Wishart scale");
    Eigen::MatrixXd scale_inv = Eigen::MatrixXd::Identity(k, k);
    ls.triangularView<Eigen::Lower>().solveInPlace(scale_inv);
    ls.transpose().triangularView<Eigen::Upper>().solveInPlace(scale_inv);
    scale_inv = 0.5 * (scale_inv + scale_inv.transpose()).eval();
    const Eigen::MatrixXd lv = chol_lower_spd(scale_inv, "inverse-Wishart scale inverse");

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        a(i, i) = std::sqrt(rng.chisq(df - static_cast<double>(i)));
        for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    const Eigen::MatrixXd t = lv * a;       // chol factor of the Wishart draw
    Eigen::MatrixXd w_inv_chol = t;         // W = t t'
    // X = W^{-1} = t'^{-1} t^{-1}
    Eigen::MatrixXd tinv = Eigen::MatrixXd::Identity(k, k);
    w_inv_chol.triangularView<Eigen::Lower>().solveInPlace(tinv);
    Eigen::MatrixXd x = tinv.transpose() * tinv;
    return 0.5 * (x + x.transpose()).eval();
}

} // namespace geosynth
