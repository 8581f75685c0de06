#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "geosynth/lgcp.hpp"
#include "geosynth/simulate.hpp"
#include "testutil.hpp"

using namespace geosynth;

namespace {

// hand-assembled chain with one draw; beta and w* given per combination
IntensityChain make_chain(int K, const std::vector<Point>& knots, double phi, int n_ni,
                          Eigen::MatrixXd beta, Eigen::MatrixXd w_star) {
    IntensityChain chain;
    chain.K = K;
    chain.kernel = {KernelFamily::Exponential, phi};
    chain.km = KnotMatrix::build(knots, chain.kernel, 1e-8);
    chain.grid = IntegrationGrid::build(SpatialDomain{}, n_ni);
    chain.config.n_ni = n_ni;
    IntensityDraw draw;
    draw.beta = std::move(beta);
    draw.w_star = std::move(w_star);
    draw.psi = Eigen::MatrixXd::Identity(K, K);
    chain.draws.push_back(std::move(draw));
    return chain;
}

Dataset empty_dataset(int K) {
    Dataset ds;
    ds.K = K;
    ds.counts.assign(static_cast<std::size_t>(K), 0);
    return ds;
}

Dataset pattern_to_dataset(const std::vector<Point>& pts) {
    Dataset ds;
    ds.K = 1;
    ds.counts = {static_cast<long>(pts.size())};
    for (const auto& p : pts) {
        Record r;
        r.loc = p;
        ds.records.push_back(r);
    }
    return ds;
}

} // namespace

TEST_CASE("log_intensity basics") {
    const auto knots = lattice_points(SpatialDomain{}, 4);
    SUBCASE("zero parameters give the unit surface") {
        const auto chain =
            make_chain(1, knots, 2.0, 100, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 4));
        CHECK(log_intensity(chain, chain.draws[0], 0, {0.3, 0.4}) == doctest::Approx(0.0));
        const auto surf = intensity_surface(chain, chain.draws[0], 0, chain.grid.points);
        for (double v : surf) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("constant surface from the intercept") {
        const auto chain = make_chain(1, knots, 2.0, 100,
                                      Eigen::MatrixXd::Constant(1, 1, std::log(5.0)),
                                      Eigen::MatrixXd::Zero(1, 4));
        for (const Point s : {Point{0.1, 0.1}, Point{0.9, 0.2}, Point{0.5, 0.5}})
            CHECK(log_intensity(chain, chain.draws[0], 0, s) ==
                  doctest::Approx(std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("knot interpolation adds w* to the intercept") {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, 4);
        w(0, 2) = 0.5;
        const auto chain =
            make_chain(1, knots, 2.0, 100, Eigen::MatrixXd::Constant(1, 1, 1.0), w);
        CHECK(log_intensity(chain, chain.draws[0], 0, knots[2]) ==
              doctest::Approx(1.5).epsilon(1e-6));
    }
    SUBCASE("surface equals exp of the log surface") {
        Eigen::MatrixXd w(1, 4);
        w << 0.3, -0.2, 0.1, 0.4;
        const auto chain = make_chain(1, knots, 2.0, 64, Eigen::MatrixXd::Constant(1, 1, 2.0), w);
        std::vector<Point> locs{{0.11, 0.62}, {0.77, 0.23}};
        const auto surf = intensity_surface(chain, chain.draws[0], 0, locs);
        for (std::size_t i = 0; i < locs.size(); ++i) {
            CHECK(surf[i] ==
                  doctest::Approx(std::exp(log_intensity(chain, chain.draws[0], 0, locs[i])))
                      .epsilon(1e-15));
            CHECK(surf[i] > 0.0);
        }
    }
}

TEST_CASE("lgcp_loglik on constant surfaces is exact for any grid") {
    const auto knots = lattice_points(SpatialDomain{}, 4);
    std::vector<Point> data{{0.2, 0.2}, {0.4, 0.9}, {0.8, 0.1}};
    for (double c : {1.0, 7.5}) {
        for (int n_ni : {49, 2500}) {
            const auto chain = make_chain(1, knots, 2.0, n_ni,
                                          Eigen::MatrixXd::Constant(1, 1, std::log(c)),
                                          Eigen::MatrixXd::Zero(1, 4));
            const double expected = -c + static_cast<double>(data.size()) * std::log(c);
            CHECK(lgcp_loglik(chain, chain.draws[0], 0, data) ==
                  doctest::Approx(expected).epsilon(1e-10));
        }
    }
    // c = 1: the data term vanishes and the loglik is exactly -1
    const auto unit = make_chain(1, knots, 2.0, 100, Eigen::MatrixXd::Zero(1, 1),
                                 Eigen::MatrixXd::Zero(1, 4));
    CHECK(lgcp_loglik(unit, unit.draws[0], 0, data) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("grid refinement changes a smooth-surface loglik below 1e-3") {
    const auto knots = lattice_points(SpatialDomain{}, 4);
    Eigen::MatrixXd w(1, 4);
    w << 0.3, -0.25, 0.2, -0.1;
    std::vector<Point> data{{0.3, 0.3}, {0.6, 0.7}};
    const auto coarse =
        make_chain(1, knots, 2.0, 2500, Eigen::MatrixXd::Constant(1, 1, std::log(50.0)), w);
    const auto fine =
        make_chain(1, knots, 2.0, 10000, Eigen::MatrixXd::Constant(1, 1, std::log(50.0)), w);
    const double a = lgcp_loglik(coarse, coarse.draws[0], 0, data);
    const double b = lgcp_loglik(fine, fine.draws[0], 0, data);
    CHECK(std::fabs(a - b) < 1e-3);
}

TEST_CASE("lgcp_loglik is invariant to grid point relabeling") {
    const auto knots = lattice_points(SpatialDomain{}, 4);
    Eigen::MatrixXd w(1, 4);
    w << 0.5, -0.5, 0.25, 0.0;
    auto chain = make_chain(1, knots, 3.0, 144, Eigen::MatrixXd::Constant(1, 1, 2.0), w);
    std::vector<Point> data{{0.25, 0.75}};
    const double before = lgcp_loglik(chain, chain.draws[0], 0, data);
    std::reverse(chain.grid.points.begin(), chain.grid.points.end());
    std::swap(chain.grid.points[3], chain.grid.points[40]);
    const double after = lgcp_loglik(chain, chain.draws[0], 0, data);
    CHECK(before == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("fit_intensity rejects empty combinations") {
    auto ds = empty_dataset(1);
    KnotSet ks;
    ks.grid_knots = lattice_points(SpatialDomain{}, 4);
    LgcpConfig cfg;
    cfg.mcmc = {10, 1, 5, 0.35};
    CHECK_THROWS_WITH_AS(fit_intensity(ds, ks, {KernelFamily::Exponential, 2.0}, cfg, 1),
                         doctest::Contains("no observations"), ValidationError);
}

TEST_CASE("fit_intensity recovers total mass on homogeneous data") {
    SurfaceSpec flat;
    flat.base = 200.0;
    Rng sim_rng(404);
    const auto pts = simulate_poisson_process(flat, SpatialDomain{}, sim_rng);
    const auto ds = pattern_to_dataset(pts);

    KnotSet ks;
    ks.grid_knots = lattice_points(SpatialDomain{}, 36);
    LgcpConfig cfg;
    cfg.n_ni = 900;
    cfg.mcmc = {1000, 5, 60, 0.35};
    const auto chain = fit_intensity(ds, ks, {KernelFamily::Exponential, 4.3}, cfg, 11);
    REQUIRE(chain.draws.size() == 60);

    double mass_mean = 0.0;
    for (const auto& draw : chain.draws) {
        const auto surf = intensity_surface(chain, draw, 0, chain.grid.points);
        double mass = 0.0;
        for (double v : surf) mass += v;
        mass_mean += mass * chain.grid.weight;
    }
    mass_mean /= static_cast<double>(chain.draws.size());
    CHECK(mass_mean > 200.0 - 3.0 * std::sqrt(200.0));
    CHECK(mass_mean < 200.0 + 3.0 * std::sqrt(200.0));

    // adapted blocks settle inside the documented acceptance window
    for (double a : chain.diag.accept_beta) {
        CHECK(a >= 0.1);
        CHECK(a <= 0.6);
    }
    for (double a : chain.diag.accept_w) {
        CHECK(a >= 0.1);
        CHECK(a <= 0.6);
    }
}

TEST_CASE("prior-only run recovers the Psi kron C* prior covariance") {
    auto ds = empty_dataset(2);
    KnotSet ks;
    ks.grid_knots = {{0.3, 0.5}, {0.7, 0.5}};
    LgcpConfig cfg;
    cfg.prior_only = true;
    cfg.n_ni = 4;
    cfg.fix_psi = true;
    cfg.psi_fixed.resize(2, 2);
    cfg.psi_fixed << 1.0, 0.5, 0.5, 1.0;
    cfg.mcmc = {2000, 10, 8000, 0.35};
    const Kernel kernel{KernelFamily::Exponential, 2.0};
    const auto chain = fit_intensity(ds, ks, kernel, cfg, 5);

    // flatten (combo-major) samples of w*
    const double c01 = corr(kernel, distance(ks.grid_knots[0], ks.grid_knots[1]));
    Eigen::MatrixXd target(4, 4);
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    target(2 * k + i, 2 * l + j) =
                        cfg.psi_fixed(k, l) * (i == j ? 1.0 : c01);

    Eigen::MatrixXd samples(chain.draws.size(), 4);
    for (std::size_t d = 0; d < chain.draws.size(); ++d) {
        samples(static_cast<Eigen::Index>(d), 0) = chain.draws[d].w_star(0, 0);
        samples(static_cast<Eigen::Index>(d), 1) = chain.draws[d].w_star(0, 1);
        samples(static_cast<Eigen::Index>(d), 2) = chain.draws[d].w_star(1, 0);
        samples(static_cast<Eigen::Index>(d), 3) = chain.draws[d].w_star(1, 1);
    }
    const Eigen::VectorXd mean = samples.colwise().mean();
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(mean[j]) < 0.1);
    const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(std::fabs(cov(i, j) - target(i, j)) < 0.12);
}

TEST_CASE("identical seeds reproduce the chain; different seeds do not") {
    SurfaceSpec flat;
    flat.base = 80.0;
    Rng sim_rng(7);
    const auto ds = pattern_to_dataset(simulate_poisson_process(flat, SpatialDomain{}, sim_rng));
    KnotSet ks;
    ks.grid_knots = lattice_points(SpatialDomain{}, 9);
    LgcpConfig cfg;
    cfg.n_ni = 100;
    cfg.mcmc = {200, 2, 20, 0.35};
    const Kernel kernel{KernelFamily::Exponential, 3.0};
    const auto a = fit_intensity(ds, ks, kernel, cfg, 42);
    const auto b = fit_intensity(ds, ks, kernel, cfg, 42);
    const auto c = fit_intensity(ds, ks, kernel, cfg, 43);
    REQUIRE(a.draws.size() == b.draws.size());
    bool all_equal = true, any_diff_c = false;
    for (std::size_t i = 0; i < a.draws.size(); ++i) {
        if (!testutil::exact_equal(a.draws[i].w_star, b.draws[i].w_star)) all_equal = false;
        if (!testutil::exact_equal(a.draws[i].beta, b.draws[i].beta)) all_equal = false;
        if (!testutil::exact_equal(a.draws[i].w_star, c.draws[i].w_star)) any_diff_c = true;
    }
    CHECK(all_equal);
    CHECK(any_diff_c);
}

TEST_CASE("parallel and serial diagonal-Psi fits produce identical draws") {
    SurfaceSpec flat;
    flat.base = 60.0;
    SimSpec spec;
    for (int k = 0; k < 3; ++k) {
        ComboSpec combo;
        combo.intensity = flat;
        combo.mark_surface.base = std::log(40.0);
        spec.combos.push_back(combo);
    }
    const auto ds = simulate_dataset(spec, 31);
    KnotSet ks;
    ks.grid_knots = lattice_points(SpatialDomain{}, 9);
    LgcpConfig cfg;
    cfg.n_ni = 100;
    cfg.psi_diagonal = true;
    cfg.mcmc = {200, 2, 20, 0.35};
    const Kernel kernel{KernelFamily::Exponential, 3.0};

    LgcpConfig serial = cfg;
    serial.threads = 1;
    LgcpConfig parallel = cfg;
    parallel.threads = 3;
    const auto a = fit_intensity(ds, ks, kernel, serial, 9);
    const auto b = fit_intensity(ds, ks, kernel, parallel, 9);
    REQUIRE(a.draws.size() == b.draws.size());
    for (std::size_t i = 0; i < a.draws.size(); ++i) {
        CHECK(testutil::exact_equal(a.draws[i].w_star, b.draws[i].w_star));
        CHECK(testutil::exact_equal(a.draws[i].beta, b.draws[i].beta));
        CHECK(testutil::exact_equal(a.draws[i].psi, b.draws[i].psi));
    }
}
