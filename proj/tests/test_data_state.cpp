#include <doctest.h>

#include <cmath>

#include "geosynth/categorical.hpp"
#include "geosynth/data.hpp"
#include "geosynth/state.hpp"
#include "testutil.hpp"

using namespace geosynth;

namespace {

const char* kTinyCsv =
    "x,y,combo,age\n"
    "0.10,0.20,1,45\n"
    "0.30,0.40,1,52\n"
    "0.90,0.80,2,61\n";

CsvSchema tiny_schema() {
    CsvSchema s;
    s.mark = "age";
    return s;
}

} // namespace

TEST_CASE("load_dataset counts combos and totals") {
    testutil::TempFile f("tiny.csv");
    f.write(kTinyCsv);
    const auto ds = load_dataset(f.path, tiny_schema(), 2, /*rescale=*/false);
    CHECK(ds.K == 2);
    CHECK(ds.counts == std::vector<long>{2, 1});
    CHECK(ds.total() == 3);
    CHECK(ds.records[0].cov_lambda == std::vector<double>{1.0});
}

TEST_CASE("load_dataset error paths") {
    CsvSchema s = tiny_schema();

    SUBCASE("missing column") {
        testutil::TempFile f("missing.csv");
        f.write("x,y,combo\n0.1,0.2,1\n");
        CHECK_THROWS_WITH_AS(load_dataset(f.path, s, 2, false),
                             doctest::Contains("missing column"), ValidationError);
    }
    SUBCASE("combo out of range") {
        testutil::TempFile f("combo.csv");
        f.write("x,y,combo,age\n0.1,0.2,25,45\n");
        CHECK_THROWS_WITH_AS(load_dataset(f.path, s, 24, false),
                             doctest::Contains("combo 25"), ValidationError);
    }
    SUBCASE("location outside bounds") {
        testutil::TempFile f("bounds.csv");
        f.write("x,y,combo,age\n1.5,0.2,1,45\n");
        CHECK_THROWS_AS(load_dataset(f.path, s, 2, false), ValidationError);
    }
    SUBCASE("non-numeric mark") {
        testutil::TempFile f("mark.csv");
        f.write("x,y,combo,age\n0.1,0.2,1,old\n");
        CHECK_THROWS_WITH_AS(load_dataset(f.path, s, 2, false),
                             doctest::Contains("non-numeric"), ValidationError);
    }
}

TEST_CASE("rescaling maps the bounding box onto the unit square and is invertible") {
    testutil::TempFile f("scale.csv");
    f.write("x,y,combo,age\n10,100,1,40\n20,300,1,50\n14,220,2,60\n");
    const auto ds = load_dataset(f.path, tiny_schema(), 2, /*rescale=*/true);
    CHECK(ds.domain.area() == doctest::Approx(1.0));
    for (const auto& rec : ds.records) {
        CHECK(rec.loc.x >= 0.0);
        CHECK(rec.loc.x <= 1.0);
        CHECK(rec.loc.y >= 0.0);
        CHECK(rec.loc.y <= 1.0);
    }
    // corners hit exactly
    CHECK(ds.records[0].loc.x == doctest::Approx(0.0));
    CHECK(ds.records[1].loc.x == doctest::Approx(1.0));
    // inverse map returns source coordinates
    const Point back = ds.source_map.inverse(ds.records[2].loc);
    CHECK(back.x == doctest::Approx(14.0).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(220.0).epsilon(1e-12));
}

TEST_CASE("ingestion round trip is idempotent") {
    testutil::TempFile f("round.csv");
    f.write(kTinyCsv);
    const auto ds = load_dataset(f.path, tiny_schema(), 2, false);
    testutil::TempFile g("round2.csv");
    save_dataset_csv(g.path, ds.records, tiny_schema(), ds.source_map);
    const auto ds2 = load_dataset(g.path, tiny_schema(), 2, false);
    REQUIRE(ds2.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(ds2.records[i].loc.x == ds.records[i].loc.x);
        CHECK(ds2.records[i].loc.y == ds.records[i].loc.y);
        CHECK(ds2.records[i].combo == ds.records[i].combo);
        CHECK(ds2.records[i].mark == ds.records[i].mark);
    }
    CHECK(ds2.counts == ds.counts);
}

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6294.0, 0.367879441171442}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("lattice helpers") {
    CHECK(lattice_shape(36) == std::pair<int, int>{6, 6});
    CHECK(lattice_shape(4) == std::pair<int, int>{2, 2});
    CHECK(lattice_shape(1) == std::pair<int, int>{1, 1});
    CHECK(lattice_shape(6) == std::pair<int, int>{2, 3});
    const auto pts = lattice_points(SpatialDomain{}, 4);
    REQUIRE(pts.size() == 4);
    CHECK(pts[0].x == doctest::Approx(0.25));
    CHECK(pts[0].y == doctest::Approx(0.25));
    CHECK(pts[3].x == doctest::Approx(0.75));
    CHECK(pts[3].y == doctest::Approx(0.75));
}

namespace {

// minimal but fully populated state for round-trip checks
ModelState make_state(int n_knots) {
    ModelState st;
    st.K = 2;
    st.N = 3;
    st.counts = {2, 1};
    st.seed = 17;
    st.schema.mark = "age";

    st.categorical.posterior.alpha_prior = Eigen::VectorXd::Constant(2, 0.5);
    st.categorical.posterior.alpha_post = st.categorical.posterior.alpha_prior;
    st.categorical.posterior.alpha_post[0] += 2.0;
    st.categorical.posterior.alpha_post[1] += 1.0;
    Eigen::VectorXd theta(2);
    theta << 0.7, 0.3;
    st.categorical.theta_draws.push_back(theta);

    st.knots.grid_knots = lattice_points(st.domain, n_knots);
    st.knots.min_separation = 0.05;

    Kernel kern{KernelFamily::Exponential, 4.3};
    st.intensity.K = 2;
    st.intensity.kernel = kern;
    st.intensity.config.n_ni = 100;
    st.intensity.km = KnotMatrix::build(st.knots.all(), kern, st.intensity.config.jitter);
    st.intensity.grid = IntegrationGrid::build(st.domain, 100);
    IntensityDraw d;
    d.beta = Eigen::MatrixXd::Constant(2, 1, std::log(5.0));
    d.w_star = Eigen::MatrixXd::Random(2, n_knots); // deterministic in Eigen
    d.psi = Eigen::MatrixXd::Identity(2, 2);
    st.intensity.draws.push_back(d);
    st.intensity.diag.accept_beta = {0.35, 0.36};
    st.intensity.diag.accept_w = {0.3, 0.4};
    st.intensity.diag.logpost = {-12.5};

    st.marks.K = 2;
    st.marks.p = 1;
    st.marks.kernel = kern;
    st.marks.km = st.intensity.km;
    MarkDraw md;
    md.beta = Eigen::MatrixXd::Constant(2, 1, 3.9);
    md.w_star = Eigen::MatrixXd::Random(2, n_knots);
    md.sigma2 = Eigen::VectorXd::Zero(2);
    md.psi = Eigen::MatrixXd::Identity(2, 2);
    st.marks.draws.push_back(md);
    st.marks.diag.accept_beta = {0.3, 0.3};
    st.marks.diag.accept_w = {0.3, 0.3};
    st.marks.diag.logpost = {-100.0};
    return st;
}

} // namespace

TEST_CASE("state round-trip is bitwise for all numeric fields") {
    const auto st = make_state(36);
    testutil::TempFile f("state.json");
    save_state(f.path, st);
    const auto st2 = load_state(f.path);

    CHECK(st2.K == st.K);
    CHECK(st2.N == st.N);
    CHECK(st2.counts == st.counts);
    CHECK(st2.seed == st.seed);
    // alpha = (0.5, 0.5) posterior round trip
    CHECK(testutil::exact_equal(st2.categorical.posterior.alpha_prior,
                                st.categorical.posterior.alpha_prior));
    CHECK(testutil::exact_equal(st2.categorical.posterior.alpha_post,
                                st.categorical.posterior.alpha_post));
    CHECK(testutil::exact_equal(st2.categorical.theta_draws[0], st.categorical.theta_draws[0]));
    // 36-knot intensity model round trip, bit for bit
    CHECK(testutil::exact_equal(st2.intensity.draws[0].beta, st.intensity.draws[0].beta));
    CHECK(testutil::exact_equal(st2.intensity.draws[0].w_star, st.intensity.draws[0].w_star));
    CHECK(testutil::exact_equal(st2.intensity.draws[0].psi, st.intensity.draws[0].psi));
    CHECK(st2.intensity.kernel.decay == st.intensity.kernel.decay);
    CHECK(testutil::exact_equal(st2.marks.draws[0].beta, st.marks.draws[0].beta));
    CHECK(testutil::exact_equal(st2.marks.draws[0].w_star, st.marks.draws[0].w_star));
    CHECK(st2.knots.grid_knots.size() == st.knots.grid_knots.size());
    for (std::size_t i = 0; i < st.knots.grid_knots.size(); ++i) {
        CHECK(st2.knots.grid_knots[i].x == st.knots.grid_knots[i].x);
        CHECK(st2.knots.grid_knots[i].y == st.knots.grid_knots[i].y);
    }

    // saving the loaded state reproduces the file byte for byte
    testutil::TempFile g("state2.json");
    save_state(g.path, st2);
    CHECK(f.read() == g.read());
}

TEST_CASE("state load rejects foreign and damaged files") {
    testutil::TempFile f("bad.json");
    f.write("{\"magic\": \"something-else\", \"version\": 1}");
    CHECK_THROWS_WITH_AS(load_state(f.path), doctest::Contains("magic"), ValidationError);

    testutil::TempFile g("trunc.json");
    const auto st = make_state(4);
    save_state(g.path, st);
    auto text = g.read();
    text.resize(text.size() / 2);
    g.write(text);
    CHECK_THROWS_AS(load_state(g.path), ValidationError);

    testutil::TempFile h("ver.json");
    auto st_text = state_to_string(st);
    const auto pos = st_text.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    st_text.replace(pos, 12, "\"version\": 9");
    h.write(st_text);
    CHECK_THROWS_WITH_AS(load_state(h.path), doctest::Contains("version"), ValidationError);
}
