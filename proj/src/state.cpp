#include "geosynth/state.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace geosynth {

namespace {

using nlohmann::json;

void require_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw NumericalError(std::string("state: non-finite value in ") + what);
}

json matrix_to_json(const Eigen::MatrixXd& m, const char* what) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            require_finite(m(i, j), what);
            data.push_back(m(i, j));
        }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != m.size())
        throw ValidationError("state: matrix payload size mismatch");
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j2 = 0; j2 < m.cols(); ++j2)
            m(i, j2) = data[static_cast<std::size_t>(idx++)].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v, const char* what) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        require_finite(v[i], what);
        out.push_back(v[i]);
    }
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

json points_to_json(const std::vector<Point>& pts) {
    json out = json::array();
    for (const auto& p : pts) {
        require_finite(p.x, "knot location");
        require_finite(p.y, "knot location");
        out.push_back(json{{"x", p.x}, {"y", p.y}});
    }
    return out;
}

std::vector<Point> points_from_json(const json& j) {
    std::vector<Point> pts;
    pts.reserve(j.size());
    for (const auto& e : j) pts.push_back({e.at("x").get<double>(), e.at("y").get<double>()});
    return pts;
}

json kernel_to_json(const Kernel& k) {
    return json{{"family", to_string(k.family)}, {"decay", k.decay}};
}

Kernel kernel_from_json(const json& j) {
    Kernel k;
    k.family = kernel_family_from_string(j.at("family").get<std::string>());
    k.decay = j.at("decay").get<double>();
    return k;
}

json mcmc_to_json(const McmcSettings& m) {
    return json{{"burnin", m.burnin},
                {"thin", m.thin},
                {"retained", m.retained},
                {"adapt_target", m.adapt_target}};
}

McmcSettings mcmc_from_json(const json& j) {
    McmcSettings m;
    m.burnin = j.at("burnin").get<int>();
    m.thin = j.at("thin").get<int>();
    m.retained = j.at("retained").get<int>();
    m.adapt_target = j.at("adapt_target").get<double>();
    return m;
}

json diag_to_json(const ChainDiagnostics& d) {
    return json{{"accept_beta", d.accept_beta},
                {"accept_w", d.accept_w},
                {"accept_psi", d.accept_psi},
                {"logpost", d.logpost}};
}

ChainDiagnostics diag_from_json(const json& j) {
    ChainDiagnostics d;
    d.accept_beta = j.at("accept_beta").get<std::vector<double>>();
    d.accept_w = j.at("accept_w").get<std::vector<double>>();
    d.accept_psi = j.at("accept_psi").get<double>();
    d.logpost = j.at("logpost").get<std::vector<double>>();
    return d;
}

json schema_to_json(const CsvSchema& s) {
    return json{{"x", s.x},           {"y", s.y},
                {"combo", s.combo},   {"mark", s.mark},
                {"cov_lambda", s.cov_lambda}, {"cov_mark", s.cov_mark},
                {"delimiter", std::string(1, s.delimiter)}};
}

CsvSchema schema_from_json(const json& j) {
    CsvSchema s;
    s.x = j.at("x").get<std::string>();
    s.y = j.at("y").get<std::string>();
    s.combo = j.at("combo").get<std::string>();
    s.mark = j.at("mark").get<std::string>();
    s.cov_lambda = j.at("cov_lambda").get<std::vector<std::string>>();
    s.cov_mark = j.at("cov_mark").get<std::vector<std::string>>();
    const auto d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw ValidationError("state: bad delimiter");
    s.delimiter = d[0];
    return s;
}

json lgcp_config_to_json(const LgcpConfig& c) {
    json out{{"n_ni", c.n_ni},
             {"log_cap", c.log_cap},
             {"psi_diagonal", c.psi_diagonal},
             {"sigma_beta", c.sigma_beta},
             {"iw_scale", c.iw_scale},
             {"iw_df", c.iw_df},
             {"phi_lo", c.phi_lo},
             {"phi_hi", c.phi_hi},
             {"jitter", c.jitter},
             {"fix_psi", c.fix_psi},
             {"prior_only", c.prior_only},
             {"mcmc", mcmc_to_json(c.mcmc)}};
    if (c.fix_psi) out["psi_fixed"] = matrix_to_json(c.psi_fixed, "psi_fixed");
    return out;
}

LgcpConfig lgcp_config_from_json(const json& j) {
    LgcpConfig c;
    c.n_ni = j.at("n_ni").get<int>();
    c.log_cap = j.at("log_cap").get<double>();
    c.psi_diagonal = j.at("psi_diagonal").get<bool>();
    c.sigma_beta = j.at("sigma_beta").get<double>();
    c.iw_scale = j.at("iw_scale").get<double>();
    c.iw_df = j.at("iw_df").get<double>();
    c.phi_lo = j.at("phi_lo").get<double>();
    c.phi_hi = j.at("phi_hi").get<double>();
    c.jitter = j.at("jitter").get<double>();
    c.fix_psi = j.at("fix_psi").get<bool>();
    c.prior_only = j.at("prior_only").get<bool>();
    c.mcmc = mcmc_from_json(j.at("mcmc"));
    if (c.fix_psi) c.psi_fixed = matrix_from_json(j.at("psi_fixed"));
    return c;
}

json mark_config_to_json(const MarkConfig& c) {
    json out{{"family", to_string(c.family)},
             {"lo", c.lo},
             {"hi", c.hi},
             {"psi_diagonal", c.psi_diagonal},
             {"sigma_beta", c.sigma_beta},
             {"iw_scale", c.iw_scale},
             {"iw_df", c.iw_df},
             {"phi_lo", c.phi_lo},
             {"phi_hi", c.phi_hi},
             {"jitter", c.jitter},
             {"log_cap", c.log_cap},
             {"resid_floor", c.resid_floor},
             {"var_floor", c.var_floor},
             {"spatial", c.spatial},
             {"fix_psi", c.fix_psi},
             {"mcmc", mcmc_to_json(c.mcmc)}};
    if (c.fix_psi) out["psi_fixed"] = matrix_to_json(c.psi_fixed, "psi_fixed");
    return out;
}

MarkConfig mark_config_from_json(const json& j) {
    MarkConfig c;
    c.family = mark_family_from_string(j.at("family").get<std::string>());
    c.lo = j.at("lo").get<int>();
    c.hi = j.at("hi").get<int>();
    c.psi_diagonal = j.at("psi_diagonal").get<bool>();
    c.sigma_beta = j.at("sigma_beta").get<double>();
    c.iw_scale = j.at("iw_scale").get<double>();
    c.iw_df = j.at("iw_df").get<double>();
    c.phi_lo = j.at("phi_lo").get<double>();
    c.phi_hi = j.at("phi_hi").get<double>();
    c.jitter = j.at("jitter").get<double>();
    c.log_cap = j.at("log_cap").get<double>();
    c.resid_floor = j.at("resid_floor").get<double>();
    c.var_floor = j.at("var_floor").get<double>();
    c.spatial = j.at("spatial").get<bool>();
    c.fix_psi = j.at("fix_psi").get<bool>();
    c.mcmc = mcmc_from_json(j.at("mcmc"));
    if (c.fix_psi) c.psi_fixed = matrix_from_json(j.at("psi_fixed"));
    return c;
}

} // namespace

std::string state_to_string(const ModelState& state) {
    json root;
    root["magic"] = kStateMagic;
    root["version"] = kStateVersion;
    root["seed"] = state.seed;
    root["domain"] = json{{"x0", state.domain.x0},
                          {"y0", state.domain.y0},
                          {"x1", state.domain.x1},
                          {"y1", state.domain.y1}};
    root["source_map"] = json{{"offset_x", state.source_map.offset_x},
                              {"scale_x", state.source_map.scale_x},
                              {"offset_y", state.source_map.offset_y},
                              {"scale_y", state.source_map.scale_y}};
    root["K"] = state.K;
    root["N"] = state.N;
    root["counts"] = state.counts;
    root["schema"] = schema_to_json(state.schema);
    root["knots"] = json{{"grid", points_to_json(state.knots.grid_knots)},
                         {"pp", points_to_json(state.knots.pp_knots)},
                         {"min_separation", state.knots.min_separation}};
    if (!state.config_echo.empty()) root["config_echo"] = state.config_echo;

    json blocks;
    {
        json cat;
        cat["alpha_prior"] = vector_to_json(state.categorical.posterior.alpha_prior, "alpha");
        cat["alpha_post"] = vector_to_json(state.categorical.posterior.alpha_post, "alpha");
        json draws = json::array();
        for (const auto& t : state.categorical.theta_draws)
            draws.push_back(vector_to_json(t, "theta draw"));
        cat["theta_draws"] = std::move(draws);
        blocks["categorical"] = std::move(cat);
    }
    {
        json lg;
        lg["K"] = state.intensity.K;
        lg["kernel"] = kernel_to_json(state.intensity.kernel);
        lg["config"] = lgcp_config_to_json(state.intensity.config);
        lg["diag"] = diag_to_json(state.intensity.diag);
        json draws = json::array();
        for (const auto& d : state.intensity.draws)
            draws.push_back(json{{"beta", matrix_to_json(d.beta, "beta")},
                                 {"w_star", matrix_to_json(d.w_star, "w_star")},
                                 {"psi", matrix_to_json(d.psi, "psi")}});
        lg["draws"] = std::move(draws);
        blocks["intensity"] = std::move(lg);
    }
    {
        json mk;
        mk["K"] = state.marks.K;
        mk["p"] = state.marks.p;
        mk["family"] = to_string(state.marks.family);
        mk["lo"] = state.marks.lo;
        mk["hi"] = state.marks.hi;
        mk["kernel"] = kernel_to_json(state.marks.kernel);
        mk["config"] = mark_config_to_json(state.marks.config);
        mk["diag"] = diag_to_json(state.marks.diag);
        json draws = json::array();
        for (const auto& d : state.marks.draws) {
            json jd{{"beta", matrix_to_json(d.beta, "beta")},
                    {"w_star", matrix_to_json(d.w_star, "w_star")},
                    {"sigma2", vector_to_json(d.sigma2, "sigma2")},
                    {"psi", matrix_to_json(d.psi, "psi")}};
            json wt = json::array();
            for (const auto& v : d.w_tilde) wt.push_back(vector_to_json(v, "w_tilde"));
            jd["w_tilde"] = std::move(wt);
            draws.push_back(std::move(jd));
        }
        mk["draws"] = std::move(draws);
        blocks["marks"] = std::move(mk);
    }
    root["blocks"] = std::move(blocks);
    return root.dump(1);
}

ModelState state_from_string(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("state: truncated or malformed file: ") + e.what());
    }
    if (!root.contains("magic") || root["magic"] != kStateMagic)
        throw ValidationError("state: wrong magic header (not a geosynth state file)");
    if (!root.contains("version") || root["version"].get<int>() != kStateVersion)
        throw ValidationError("state: unsupported format version");

    ModelState st;
    st.seed = root.at("seed").get<std::uint64_t>();
    const auto& dom = root.at("domain");
    st.domain = {dom.at("x0").get<double>(), dom.at("y0").get<double>(),
                 dom.at("x1").get<double>(), dom.at("y1").get<double>()};
    const auto& map = root.at("source_map");
    st.source_map.offset_x = map.at("offset_x").get<double>();
    st.source_map.scale_x = map.at("scale_x").get<double>();
    st.source_map.offset_y = map.at("offset_y").get<double>();
    st.source_map.scale_y = map.at("scale_y").get<double>();
    st.K = root.at("K").get<int>();
    st.N = root.at("N").get<long>();
    st.counts = root.at("counts").get<std::vector<long>>();
    st.schema = schema_from_json(root.at("schema"));
    const auto& kn = root.at("knots");
    st.knots.grid_knots = points_from_json(kn.at("grid"));
    st.knots.pp_knots = points_from_json(kn.at("pp"));
    st.knots.min_separation = kn.at("min_separation").get<double>();
    if (root.contains("config_echo")) st.config_echo = root["config_echo"].get<std::string>();

    const auto& blocks = root.at("blocks");
    {
        const auto& cat = blocks.at("categorical");
        st.categorical.posterior.alpha_prior = vector_from_json(cat.at("alpha_prior"));
        st.categorical.posterior.alpha_post = vector_from_json(cat.at("alpha_post"));
        for (const auto& t : cat.at("theta_draws"))
            st.categorical.theta_draws.push_back(vector_from_json(t));
    }
    {
        const auto& lg = blocks.at("intensity");
        st.intensity.K = lg.at("K").get<int>();
        st.intensity.kernel = kernel_from_json(lg.at("kernel"));
        st.intensity.config = lgcp_config_from_json(lg.at("config"));
        st.intensity.diag = diag_from_json(lg.at("diag"));
        for (const auto& d : lg.at("draws")) {
            IntensityDraw draw;
            draw.beta = matrix_from_json(d.at("beta"));
            draw.w_star = matrix_from_json(d.at("w_star"));
            draw.psi = matrix_from_json(d.at("psi"));
            st.intensity.draws.push_back(std::move(draw));
        }
        st.intensity.km = KnotMatrix::build(st.knots.all(), st.intensity.kernel,
                                            st.intensity.config.jitter);
        st.intensity.grid = IntegrationGrid::build(st.domain, st.intensity.config.n_ni);
    }
    {
        const auto& mk = blocks.at("marks");
        st.marks.K = mk.at("K").get<int>();
        st.marks.p = mk.at("p").get<int>();
        st.marks.family = mark_family_from_string(mk.at("family").get<std::string>());
        st.marks.lo = mk.at("lo").get<int>();
        st.marks.hi = mk.at("hi").get<int>();
        st.marks.kernel = kernel_from_json(mk.at("kernel"));
        st.marks.config = mark_config_from_json(mk.at("config"));
        st.marks.diag = diag_from_json(mk.at("diag"));
        for (const auto& d : mk.at("draws")) {
            MarkDraw draw;
            draw.beta = matrix_from_json(d.at("beta"));
            draw.w_star = matrix_from_json(d.at("w_star"));
            draw.sigma2 = vector_from_json(d.at("sigma2"));
            draw.psi = matrix_from_json(d.at("psi"));
            for (const auto& v : d.at("w_tilde"))
                draw.w_tilde.push_back(vector_from_json(v));
            st.marks.draws.push_back(std::move(draw));
        }
        st.marks.km = KnotMatrix::build(st.knots.all(), st.marks.kernel,
                                        st.marks.config.jitter);
    }
    return st;
}

void save_state(const std::string& path, const ModelState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("save_state: cannot open " + path);
    out << state_to_string(state);
    out << '\n';
    if (!out) throw ValidationError("save_state: write failed: " + path);
}

ModelState load_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("load_state: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return state_from_string(ss.str());
}

} // namespace geosynth
