#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "geosynth/synthesis.hpp"
#include "geosynth/simulate.hpp"
#include "testutil.hpp"

using namespace geosynth;

namespace {

// hand-built chains: constant intensity log(n_k), constant mark rate;
// `retained` identical structural draws with fresh theta draws
struct TinyModel {
    CategoricalChain cat;
    IntensityChain intensity;
    MarkChain marks;
};

TinyModel make_model(const std::vector<long>& counts, int retained, std::uint64_t seed) {
    const int K = static_cast<int>(counts.size());
    TinyModel m;

    Dataset ds;
    ds.K = K;
    ds.counts = counts;
    Rng cat_rng = Rng::stream(seed, "cat");
    m.cat = fit_categorical_chain(ds, default_alpha(K), retained, cat_rng);

    const auto knots = lattice_points(SpatialDomain{}, 4);
    const Kernel kernel{KernelFamily::Exponential, 3.0};
    m.intensity.K = K;
    m.intensity.kernel = kernel;
    m.intensity.km = KnotMatrix::build(knots, kernel, 1e-8);
    m.intensity.grid = IntegrationGrid::build(SpatialDomain{}, 100);
    m.marks.K = K;
    m.marks.family = MarkFamily::TruncatedPoisson;
    m.marks.lo = 16;
    m.marks.hi = 98;
    m.marks.kernel = kernel;
    m.marks.km = m.intensity.km;
    for (int l = 0; l < retained; ++l) {
        IntensityDraw d;
        d.beta.resize(K, 1);
        for (int k = 0; k < K; ++k)
            d.beta(k, 0) = std::log(std::max<double>(1.0, static_cast<double>(counts[k])));
        d.w_star = Eigen::MatrixXd::Zero(K, 4);
        d.psi = Eigen::MatrixXd::Identity(K, K);
        m.intensity.draws.push_back(d);
        MarkDraw md;
        md.beta = Eigen::MatrixXd::Constant(K, 1, std::log(50.0));
        md.w_star = Eigen::MatrixXd::Zero(K, 4);
        md.sigma2 = Eigen::VectorXd::Zero(K);
        md.psi = Eigen::MatrixXd::Identity(K, K);
        m.marks.draws.push_back(md);
    }
    return m;
}

} // namespace

TEST_CASE("draw_locations follows the stated resampling probabilities") {
    Rng rng(5);
    SUBCASE("uniform weights give uniform cell counts") {
        std::vector<double> lambda(25, 3.5);
        std::vector<double> obs(25, 0.0);
        const long n = 100000;
        for (const auto idx : draw_locations(lambda, n, rng)) obs[idx] += 1.0;
        const std::vector<double> expect(25, static_cast<double>(n) / 25.0);
        CHECK(testutil::gof_not_rejected(obs, expect, 0.01));
    }
    SUBCASE("pool of one") {
        std::vector<double> lambda{2.0};
        for (const auto idx : draw_locations(lambda, 50, rng)) CHECK(idx == 0);
    }
    SUBCASE("dominant candidate receives nearly all draws") {
        std::vector<double> lambda(100, 1.0);
        lambda[37] = 1e6; // capped-log-link style ratio
        long hits = 0;
        const long n = 100000;
        for (const auto idx : draw_locations(lambda, n, rng))
            if (idx == 37) ++hits;
        CHECK(static_cast<double>(hits) / static_cast<double>(n) >= 0.999);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(draw_locations(std::vector<double>{}, 1, rng), ValidationError);
        CHECK_THROWS_AS(draw_locations(std::vector<double>{0.0, 0.0}, 1, rng), NumericalError);
    }
}

TEST_CASE("synthesize produces size-N replicates inside the pool and support") {
    const std::vector<long> counts{120, 60, 60};
    const long n_total = 240;
    auto model = make_model(counts, 20, 31);
    auto plan = SynthesisPlan::identity(12, 77, make_grid_pool(SpatialDomain{}, 50));
    const auto reps = synthesize(plan, model.cat, model.intensity, model.marks, n_total,
                                 SpatialDomain{});
    REQUIRE(reps.size() == 12);

    std::set<std::pair<double, double>> pool_set;
    for (const auto& p : plan.pool.locations) pool_set.insert({p.x, p.y});

    for (const auto& rep : reps) {
        long total = 0;
        for (long c : rep.counts) total += c;
        CHECK(total == n_total);
        CHECK(static_cast<long>(rep.records.size()) == n_total);
        for (const auto& rec : rep.records) {
            CHECK(pool_set.count({rec.loc.x, rec.loc.y}) == 1);
            CHECK(rec.mark >= 16.0);
            CHECK(rec.mark <= 98.0);
            CHECK(rec.combo >= 1);
            CHECK(rec.combo <= 3);
        }
    }
}

TEST_CASE("synthesize is deterministic and exchangeable in the draw indices") {
    const std::vector<long> counts{80, 40};
    auto model = make_model(counts, 10, 3);
    auto pool = make_grid_pool(SpatialDomain{}, 50);

    auto plan = SynthesisPlan::identity(6, 123, pool);
    const auto a = synthesize(plan, model.cat, model.intensity, model.marks, 120, SpatialDomain{});
    const auto b = synthesize(plan, model.cat, model.intensity, model.marks, 120, SpatialDomain{});
    REQUIRE(a.size() == b.size());
    for (std::size_t l = 0; l < a.size(); ++l) {
        REQUIRE(a[l].records.size() == b[l].records.size());
        for (std::size_t i = 0; i < a[l].records.size(); ++i) {
            CHECK(a[l].records[i].loc.x == b[l].records[i].loc.x);
            CHECK(a[l].records[i].mark == b[l].records[i].mark);
        }
    }

    // permuting the retained draw indices permutes the replicates
    SynthesisPlan rev = plan;
    std::reverse(rev.draw_indices.begin(), rev.draw_indices.end());
    const auto c = synthesize(rev, model.cat, model.intensity, model.marks, 120, SpatialDomain{});
    for (std::size_t l = 0; l < a.size(); ++l) {
        const auto& mirror = c[a.size() - 1 - l];
        REQUIRE(a[l].records.size() == mirror.records.size());
        for (std::size_t i = 0; i < a[l].records.size(); ++i) {
            CHECK(a[l].records[i].loc.x == mirror.records[i].loc.x);
            CHECK(a[l].records[i].loc.y == mirror.records[i].loc.y);
            CHECK(a[l].records[i].mark == mirror.records[i].mark);
        }
    }
}

TEST_CASE("synthetic count shares track the confidential shares (Dirichlet-multinomial)") {
    // production-sized layout: unbalanced counts over K=24, N about 6300
    std::vector<long> counts;
    long n_total = 0;
    for (int k = 0; k < 24; ++k) {
        const long nk = 79 + (k * 73) % 447; // 79..525 spread
        counts.push_back(nk);
        n_total += nk;
    }
    auto model = make_model(counts, 100, 555);
    auto plan = SynthesisPlan::identity(100, 9000, make_grid_pool(SpatialDomain{}, 50));
    const auto reps =
        synthesize(plan, model.cat, model.intensity, model.marks, n_total, SpatialDomain{});

    std::vector<double> share(24, 0.0);
    for (const auto& rep : reps)
        for (int k = 0; k < 24; ++k)
            share[static_cast<std::size_t>(k)] +=
                static_cast<double>(rep.counts[static_cast<std::size_t>(k)]) /
                static_cast<double>(n_total);
    for (int k = 0; k < 24; ++k) {
        share[static_cast<std::size_t>(k)] /= static_cast<double>(reps.size());
        const double conf =
            static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(n_total);
        CHECK(std::fabs(share[static_cast<std::size_t>(k)] - conf) < 0.02);
    }
}

TEST_CASE("synthesize validates the pool floor and chain alignment") {
    auto model = make_model({40, 20}, 5, 8);
    SUBCASE("pool too small") {
        auto plan = SynthesisPlan::identity(3, 1, make_grid_pool(SpatialDomain{}, 10));
        CHECK_THROWS_WITH_AS(
            synthesize(plan, model.cat, model.intensity, model.marks, 60, SpatialDomain{}),
            doctest::Contains("pool"), ValidationError);
    }
    SUBCASE("draw index beyond the retained draws") {
        auto plan = SynthesisPlan::identity(6, 1, make_grid_pool(SpatialDomain{}, 50));
        CHECK_THROWS_WITH_AS(
            synthesize(plan, model.cat, model.intensity, model.marks, 60, SpatialDomain{}),
            doctest::Contains("retained"), ValidationError);
    }
    SUBCASE("small pools allowed when the floor is lowered") {
        auto plan = SynthesisPlan::identity(2, 1, make_grid_pool(SpatialDomain{}, 10), 100);
        CHECK_NOTHROW(
            synthesize(plan, model.cat, model.intensity, model.marks, 60, SpatialDomain{}));
    }
}
