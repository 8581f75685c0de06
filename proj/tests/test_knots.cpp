#include <doctest.h>

#include <cmath>

#include "geosynth/knots.hpp"
#include "geosynth/simulate.hpp"
#include "testutil.hpp"

using namespace geosynth;

namespace {

Dataset homogeneous_data(double rate, std::uint64_t seed) {
    SimSpec spec;
    ComboSpec combo;
    combo.intensity.base = rate;
    combo.mark_surface.base = std::log(40.0);
    spec.combos.push_back(combo);
    return simulate_dataset(spec, seed);
}

KnotPlacementConfig lean_config() {
    KnotPlacementConfig cfg;
    cfg.n_grid = 9;
    cfg.prefit.n_ni = 400;
    cfg.prefit.mcmc = {400, 4, 25, 0.35};
    return cfg;
}

} // namespace

TEST_CASE("grid knots form the documented lattices") {
    SpatialDomain unit;
    SUBCASE("2x2 interior lattice") {
        const auto pts = place_grid_knots(unit, 4);
        REQUIRE(pts.size() == 4);
        std::vector<std::pair<double, double>> expect{
            {0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
        for (const auto& [ex, ey] : expect) {
            bool found = false;
            for (const auto& p : pts)
                if (std::fabs(p.x - ex) < 1e-12 && std::fabs(p.y - ey) < 1e-12) found = true;
            CHECK(found);
        }
    }
    SUBCASE("single knot at the centroid") {
        const auto pts = place_grid_knots(unit, 1);
        REQUIRE(pts.size() == 1);
        CHECK(pts[0].x == doctest::Approx(0.5));
        CHECK(pts[0].y == doctest::Approx(0.5));
    }
    SUBCASE("36 knots make a 6x6 lattice") {
        const auto pts = place_grid_knots(unit, 36);
        REQUIRE(pts.size() == 36);
        CHECK(pts[0].x == doctest::Approx(1.0 / 12.0));
        CHECK(pts[35].x == doctest::Approx(11.0 / 12.0));
    }
    SUBCASE("zero knots rejected") { CHECK_THROWS_AS(place_grid_knots(unit, 0), ValidationError); }
}

TEST_CASE("n_pp = 0 yields no intensity knots") {
    const auto ds = homogeneous_data(300.0, 1);
    const auto cfg = lean_config();
    const auto pts = place_intensity_knots(ds, 0, cfg, {KernelFamily::Exponential, 4.3}, {},
                                           0.0, 7);
    CHECK(pts.empty());
}

TEST_CASE("intensity knots on homogeneous data are uniform across quadrants") {
    const auto cfg = lean_config();
    const Kernel kernel{KernelFamily::Exponential, 4.3};
    std::vector<double> quadrant(4, 0.0);
    const int reps = 200;
    const int per_rep = 8;
    for (int r = 0; r < reps; ++r) {
        const auto ds = homogeneous_data(800.0, 1000 + static_cast<std::uint64_t>(r));
        const auto pts = place_intensity_knots(ds, per_rep, cfg, kernel, {}, 0.0,
                                               5000 + static_cast<std::uint64_t>(r));
        REQUIRE(static_cast<int>(pts.size()) == per_rep);
        for (const auto& p : pts)
            quadrant[(p.x < 0.5 ? 0u : 1u) + (p.y < 0.5 ? 0u : 2u)] += 1.0;
    }
    const double e = reps * per_rep / 4.0;
    CHECK(testutil::gof_not_rejected(quadrant, {e, e, e, e}, 0.01));
}

TEST_CASE("intensity knots chase a strong cluster") {
    SimSpec spec;
    ComboSpec combo;
    combo.intensity.base = 15.0;
    combo.intensity.bumps.push_back({{0.5, 0.5}, 0.15, 1500.0});
    combo.mark_surface.base = std::log(40.0);
    spec.combos.push_back(combo);

    auto cfg = lean_config();
    cfg.n_grid = 16; // prefit resolution fine enough for the blob
    cfg.prefit.mcmc.burnin = 800;
    const Kernel kernel{KernelFamily::Exponential, 8.0};
    int inside = 0, total = 0;
    for (int r = 0; r < 10; ++r) {
        const auto ds = simulate_dataset(spec, 90 + static_cast<std::uint64_t>(r));
        const auto pts = place_intensity_knots(ds, 20, cfg, kernel, {}, 0.0,
                                               300 + static_cast<std::uint64_t>(r));
        for (const auto& p : pts) {
            ++total;
            if (distance(p, {0.5, 0.5}) <= 0.3) ++inside; // the bump's 2-sigma disk
        }
    }
    CHECK(static_cast<double>(inside) / total >= 0.6);
}

TEST_CASE("minimum separation is enforced against existing and picked knots") {
    const auto ds = homogeneous_data(500.0, 3);
    auto cfg = lean_config();
    const Kernel kernel{KernelFamily::Exponential, 4.3};
    const std::vector<Point> existing{{0.5, 0.5}};
    const double sep = 0.12;
    const auto pts = place_intensity_knots(ds, 12, cfg, kernel, existing, sep, 77);
    REQUIRE(pts.size() == 12);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(distance(pts[i], existing[0]) >= sep);
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            CHECK(distance(pts[i], pts[j]) >= sep);
    }
}

TEST_CASE("pool exhaustion raises a validation error") {
    const auto ds = homogeneous_data(300.0, 5);
    auto cfg = lean_config();
    cfg.prefit.n_ni = 16; // only 16 candidates
    const Kernel kernel{KernelFamily::Exponential, 4.3};
    CHECK_THROWS_WITH_AS(place_intensity_knots(ds, 17, cfg, kernel, {}, 0.0, 9),
                         doctest::Contains("exhausted"), ValidationError);
}

TEST_CASE("build_knot_set defaults the separation to half the grid spacing") {
    const auto ds = homogeneous_data(600.0, 11);
    KnotPlacementConfig cfg = lean_config();
    cfg.n_grid = 16;
    cfg.n_intensity = 8;
    const auto ks = build_knot_set(ds, cfg, {KernelFamily::Exponential, 4.3}, 21);
    CHECK(ks.grid_knots.size() == 16);
    CHECK(ks.pp_knots.size() == 8);
    CHECK(ks.size() == 24);
    CHECK(ks.min_separation == doctest::Approx(0.125)); // half of 1/4
    const auto all = ks.all();
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            CHECK(distance(all[i], all[j]) >= ks.min_separation - 1e-12);
    // the resulting C* factorizes cleanly
    CHECK_NOTHROW(KnotMatrix::build(all, {KernelFamily::Exponential, 4.3}, 1e-8));
    // empty dataset rejected
    Dataset empty;
    empty.K = 1;
    empty.counts = {0};
    CHECK_THROWS_AS(build_knot_set(empty, cfg, {KernelFamily::Exponential, 4.3}, 1),
                    ValidationError);
}
