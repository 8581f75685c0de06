#include <doctest.h>

#include <cmath>

#include "geosynth/covariance.hpp"
#include "geosynth/rng.hpp"

using namespace geosynth;

namespace {

// two knots far enough apart that C* is the identity for practical purposes
KnotMatrix far_apart_knots() {
    Kernel k{KernelFamily::Exponential, 40.0};
    return KnotMatrix::build({{0.0, 0.0}, {1.0, 1.0}}, k, 0.0);
}

} // namespace

TEST_CASE("kernel values at zero and at frozen points") {
    Kernel exp1{KernelFamily::Exponential, 1.0};
    Kernel exp2{KernelFamily::Exponential, 2.0};
    Kernel mat{KernelFamily::Matern32, 1.0};
    CHECK(corr(exp1, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(corr(exp2, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(corr(exp2, 0.5) == doctest::Approx(0.367879441171442).epsilon(1e-12));
    CHECK(corr(mat, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(corr(exp1, -0.1), ValidationError);
}

TEST_CASE("kernels are non-increasing in distance") {
    for (auto family : {KernelFamily::Exponential, KernelFamily::Matern32}) {
        Kernel k{family, 3.0};
        double prev = 1.0;
        for (double d = 0.0; d <= 2.0; d += 0.01) {
            const double c = corr(k, d);
            CHECK(c <= prev + 1e-15);
            CHECK(c > 0.0);
            prev = c;
        }
    }
}

TEST_CASE("decay_for_effective_range hits the 0.05 level") {
    for (auto family : {KernelFamily::Exponential, KernelFamily::Matern32}) {
        const double range = 0.7;
        const double phi = decay_for_effective_range(family, range);
        Kernel k{family, phi};
        CHECK(corr(k, range) == doctest::Approx(0.05).epsilon(1e-6));
    }
}

TEST_CASE("cross_corr evaluates the kernel against each knot") {
    Kernel k{KernelFamily::Exponential, 1.0};
    std::vector<Point> knots{{1.0, 0.0}, {2.0, 0.0}};
    const Point s{0.0, 0.0};
    const auto c = cross_corr(k, s, knots);
    CHECK(c[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(c[1] == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));

    // zero distance gives exactly 1 at that knot
    const auto c2 = cross_corr(k, knots[1], knots);
    CHECK(c2[1] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(cross_corr(k, s, std::vector<Point>{}), ValidationError);
}

TEST_CASE("pp_project hand case: C* = I, C(s) = (0.5, 0.25), w* = (2, 4)") {
    const auto km = far_apart_knots();
    Eigen::VectorXd c(2), w(2);
    c << 0.5, 0.25;
    w << 2.0, 4.0;
    CHECK(pp_project(c, km, w) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("pp_project interpolates knot values and is linear in w*") {
    Kernel k{KernelFamily::Exponential, 2.0};
    std::vector<Point> knots{{0.2, 0.2}, {0.8, 0.3}, {0.5, 0.7}};
    const auto km = KnotMatrix::build(knots, k, 1e-8);
    Eigen::VectorXd w(3);
    w << 0.5, -1.2, 2.0;

    for (int j = 0; j < 3; ++j) {
        const auto c = cross_corr(k, knots[static_cast<std::size_t>(j)], knots);
        CHECK(pp_project(c, km, w) == doctest::Approx(w[j]).epsilon(1e-6));
    }

    // linearity
    Eigen::VectorXd v(3);
    v << 1.0, 0.3, -0.7;
    const auto c = cross_corr(k, Point{0.4, 0.4}, knots);
    const double lhs = pp_project(c, km, (2.0 * w + 3.0 * v).eval());
    const double rhs = 2.0 * pp_project(c, km, w) + 3.0 * pp_project(c, km, v);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    // zero effects project to zero
    CHECK(pp_project(c, km, Eigen::VectorXd::Zero(3)) == doctest::Approx(0.0));
}

TEST_CASE("pp_residual_var hand case and bounds") {
    const auto km = far_apart_knots();
    Eigen::VectorXd c(2);
    c << 0.6, 0.0;
    CHECK(pp_residual_var(c, km) == doctest::Approx(0.64).epsilon(1e-9));

    // at a knot the residual variance vanishes
    Kernel k{KernelFamily::Exponential, 2.0};
    std::vector<Point> knots{{0.2, 0.2}, {0.8, 0.3}, {0.5, 0.7}};
    const auto km3 = KnotMatrix::build(knots, k, 1e-8);
    const auto at_knot = cross_corr(k, knots[1], knots);
    CHECK(pp_residual_var(at_knot, km3) == doctest::Approx(0.0).epsilon(1e-6));

    // infinitely far: residual variance equals C(s,s) = 1
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    CHECK(pp_residual_var(zero, km3) == doctest::Approx(1.0).epsilon(1e-12));

    // bounded by [0, 1] at random locations
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const Point s{rng.uniform(), rng.uniform()};
        const double v = pp_residual_var(cross_corr(k, s, knots), km3);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("predictive process reproduces the parent covariance on the knot set") {
    Kernel k{KernelFamily::Exponential, 1.5};
    std::vector<Point> knots{{0.1, 0.1}, {0.9, 0.2}, {0.4, 0.8}, {0.6, 0.5}};
    const auto km = KnotMatrix::build(knots, k, 0.0);
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const auto c = cross_corr(k, knots[i], knots);
        CHECK(km.solve(c).dot(c) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("KnotMatrix rejects degenerate inputs") {
    Kernel k{KernelFamily::Exponential, 1.0};
    CHECK_THROWS_AS(KnotMatrix::build({}, k), ValidationError);
    // duplicate knots make C* singular without jitter
    CHECK_THROWS_AS(KnotMatrix::build({{0.5, 0.5}, {0.5, 0.5}}, k, 0.0), NumericalError);
}

TEST_CASE("PPProjection matches the pointwise operations") {
    Kernel k{KernelFamily::Exponential, 2.0};
    std::vector<Point> knots{{0.25, 0.25}, {0.75, 0.75}};
    const auto km = KnotMatrix::build(knots, k, 1e-8);
    std::vector<Point> locs{{0.1, 0.9}, {0.5, 0.5}, {0.75, 0.75}};
    const auto pp = PPProjection::build(locs, km);
    Eigen::VectorXd w(2);
    w << 1.0, -2.0;
    for (std::size_t i = 0; i < locs.size(); ++i) {
        const auto c = cross_corr(k, locs[i], knots);
        CHECK(pp.proj.row(static_cast<Eigen::Index>(i)).dot(w) ==
              doctest::Approx(pp_project(c, km, w)).epsilon(1e-12));
        CHECK(pp.resid_var[static_cast<Eigen::Index>(i)] ==
              doctest::Approx(pp_residual_var(c, km)).epsilon(1e-12));
    }
}

TEST_CASE("inverse-Wishart sampler matches the analytic mean") {
    Rng rng(101);
    Eigen::MatrixXd scale(2, 2);
    scale << 2.0, 0.4, 0.4, 1.0;
    const double df = 7.0;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    const int n = 40000;
    for (int i = 0; i < n; ++i) acc += draw_inverse_wishart(scale, df, rng);
    acc /= static_cast<double>(n);
    const Eigen::MatrixXd expected = scale / (df - 2.0 - 1.0); // scale/(df-K-1)
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(acc(i, j) == doctest::Approx(expected(i, j)).epsilon(0.05));
}
