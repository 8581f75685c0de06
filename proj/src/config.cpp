#include "geosynth/config.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace geosynth {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

McmcSettings mcmc_from(const json& j, const McmcSettings& defaults) {
    McmcSettings m = defaults;
    m.burnin = j.value("burnin", m.burnin);
    m.thin = j.value("thin", m.thin);
    m.retained = j.value("retained", m.retained);
    m.adapt_target = j.value("adapt_target", m.adapt_target);
    return m;
}

SpatialDomain domain_from(const json& j) {
    SpatialDomain d;
    d.x0 = j.value("x0", 0.0);
    d.y0 = j.value("y0", 0.0);
    d.x1 = j.value("x1", 1.0);
    d.y1 = j.value("y1", 1.0);
    d.validate();
    return d;
}

SurfaceSpec surface_from(const json& j) {
    SurfaceSpec s;
    s.base = j.value("base", 0.0);
    s.log_scale = j.value("log_scale", false);
    if (j.contains("bumps")) {
        for (const auto& b : j.at("bumps")) {
            SurfaceSpec::Bump bump;
            bump.center = {b.at("x").get<double>(), b.at("y").get<double>()};
            bump.sd = b.at("sd").get<double>();
            bump.weight = b.at("weight").get<double>();
            s.bumps.push_back(bump);
        }
    }
    return s;
}

} // namespace

void RunConfig::validate() const {
    if (K < 1) throw ValidationError("config: data.K must be at least 1");
    if (intensity.mcmc.retained < L || marks.mcmc.retained < L)
        throw ValidationError("config: retained draws (" +
                              std::to_string(std::min(intensity.mcmc.retained,
                                                      marks.mcmc.retained)) +
                              ") must be at least the replicate count L (" +
                              std::to_string(L) + ")");
    if (L < 1) throw ValidationError("config: synthesis.L must be at least 1");
    if (h_steps < 1 || !(h_max > h_min) || h_min < 0.0)
        throw ValidationError("config: bad evaluation h grid");
    if (!(level > 0.0 && level < 1.0))
        throw ValidationError("config: evaluation level outside (0,1)");
    thresholds.validate();
    intensity.mcmc.validate();
    marks.mcmc.validate();
    for (const auto& a : analyses) {
        if (a.type != "poisson-rate" && a.type != "logistic")
            throw ValidationError("config: unknown analysis type " + a.type);
        if (a.type == "logistic") {
            if (static_cast<int>(a.group_of_combo.size()) != K ||
                static_cast<int>(a.outcome_of_combo.size()) != K)
                throw ValidationError("config: logistic analysis " + a.name +
                                      " needs K-length group/outcome mappings");
        }
    }
}

std::vector<double> RunConfig::h_grid() const {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(h_steps));
    for (int i = 0; i < h_steps; ++i)
        grid.push_back(h_min + (h_max - h_min) * static_cast<double>(i) /
                                   static_cast<double>(std::max(1, h_steps - 1)));
    return grid;
}

RunConfig parse_run_config(const std::string& text) {
    const json root = parse_json(text, "config");
    RunConfig c;
    c.config_text = text;
    c.seed = root.value("seed", std::uint64_t{1});
    c.threads = root.value("threads", 1);

    if (root.contains("data")) {
        const auto& d = root.at("data");
        c.data_path = d.value("path", std::string{});
        c.K = d.value("K", 0);
        c.rescale = d.value("rescale", true);
        if (d.contains("domain")) c.domain = domain_from(d.at("domain"));
        if (d.contains("schema")) {
            const auto& s = d.at("schema");
            c.schema.x = s.value("x", c.schema.x);
            c.schema.y = s.value("y", c.schema.y);
            c.schema.combo = s.value("combo", c.schema.combo);
            c.schema.mark = s.value("mark", c.schema.mark);
            c.schema.cov_lambda =
                s.value("covariates_lambda", std::vector<std::string>{});
            c.schema.cov_mark = s.value("covariates_mark", std::vector<std::string>{});
        }
    }

    if (root.contains("knots")) {
        const auto& k = root.at("knots");
        c.knots.n_grid = k.value("n_grid", c.knots.n_grid);
        c.knots.n_intensity = k.value("n_intensity", c.knots.n_intensity);
        c.knots.min_separation = k.value("min_separation", c.knots.min_separation);
        if (k.contains("prefit")) {
            const auto& p = k.at("prefit");
            c.knots.prefit.n_ni = p.value("n_ni", c.knots.prefit.n_ni);
            c.knots.prefit.mcmc = mcmc_from(p, c.knots.prefit.mcmc);
        }
    }

    if (root.contains("kernel")) {
        const auto& k = root.at("kernel");
        c.kernel_family = kernel_family_from_string(k.value("family", std::string("exponential")));
        c.phi = k.value("phi", -1.0);
        c.effective_range_fraction = k.value("effective_range_fraction", 0.5);
        c.jitter = k.value("jitter", 1e-8);
        if (k.contains("phi_bounds")) {
            c.intensity.phi_lo = c.marks.phi_lo = k.at("phi_bounds").at(0).get<double>();
            c.intensity.phi_hi = c.marks.phi_hi = k.at("phi_bounds").at(1).get<double>();
        }
    }

    double prior_sigma_beta = 100.0, prior_iw_scale = 1.0, prior_iw_df = -1.0;
    if (root.contains("priors")) {
        const auto& p = root.at("priors");
        prior_sigma_beta = p.value("sigma_beta", prior_sigma_beta);
        prior_iw_scale = p.value("iw_scale", prior_iw_scale);
        prior_iw_df = p.value("iw_df", prior_iw_df);
        c.alpha = p.value("alpha", c.alpha);
    }

    c.intensity.sigma_beta = prior_sigma_beta;
    c.intensity.iw_scale = prior_iw_scale;
    c.intensity.iw_df = prior_iw_df > 0.0 ? prior_iw_df : 0.0;
    c.intensity.jitter = c.jitter;
    if (root.contains("intensity")) {
        const auto& i = root.at("intensity");
        c.intensity.n_ni = i.value("n_ni", c.intensity.n_ni);
        c.intensity.log_cap = i.value("log_cap", c.intensity.log_cap);
        c.intensity.psi_diagonal = i.value("psi_mode", std::string("joint")) == "diagonal";
        c.intensity.sigma_beta = i.value("sigma_beta", c.intensity.sigma_beta);
        if (i.contains("mcmc")) c.intensity.mcmc = mcmc_from(i.at("mcmc"), c.intensity.mcmc);
    }
    c.intensity.threads = c.threads;
    c.knots.prefit.sigma_beta = prior_sigma_beta;
    c.knots.prefit.jitter = c.jitter;

    c.marks.sigma_beta = prior_sigma_beta;
    c.marks.iw_scale = prior_iw_scale;
    c.marks.iw_df = prior_iw_df > 0.0 ? prior_iw_df : 0.0;
    c.marks.jitter = c.jitter;
    if (root.contains("marks")) {
        const auto& m = root.at("marks");
        c.marks.family = mark_family_from_string(
            m.value("family", std::string("truncated-poisson")));
        if (m.contains("bounds")) {
            const auto& b = m.at("bounds");
            c.marks.lo = b.at(0).get<int>();
            c.marks.hi = b.at(1).get<int>();
        }
        c.marks.psi_diagonal = m.value("psi_mode", std::string("joint")) == "diagonal";
        c.marks.sigma_beta = m.value("sigma_beta", c.marks.sigma_beta);
        c.marks.log_cap = m.value("log_cap", c.marks.log_cap);
        if (m.contains("mcmc")) c.marks.mcmc = mcmc_from(m.at("mcmc"), c.marks.mcmc);
    }
    c.marks.threads = c.threads;

    if (root.contains("synthesis")) {
        const auto& s = root.at("synthesis");
        c.L = s.value("L", c.L);
        c.pool_spec = s.value("pool", c.pool_spec);
        c.min_pool = s.value("min_pool", c.min_pool);
    }

    if (root.contains("evaluation")) {
        const auto& e = root.at("evaluation");
        c.thresholds.eps_s = e.value("eps_s", c.thresholds.eps_s);
        c.thresholds.eps_a = e.value("eps_a", c.thresholds.eps_a);
        c.h_min = e.value("h_min", c.h_min);
        c.h_max = e.value("h_max", c.h_max);
        c.h_steps = e.value("h_steps", c.h_steps);
        c.level = e.value("level", c.level);
        c.risk_report_threshold = e.value("risk_report_threshold", c.risk_report_threshold);
        if (e.contains("analyses")) {
            for (const auto& a : e.at("analyses")) {
                AnalysisSpec spec;
                spec.type = a.at("type").get<std::string>();
                spec.name = a.value("name", spec.type);
                if (a.contains("group_of_combo"))
                    spec.group_of_combo = a.at("group_of_combo").get<std::vector<int>>();
                if (a.contains("outcome_of_combo"))
                    spec.outcome_of_combo = a.at("outcome_of_combo").get<std::vector<int>>();
                c.analyses.push_back(std::move(spec));
            }
        }
    }

    if (root.contains("output")) c.out_dir = root.at("output").value("dir", c.out_dir);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(slurp(path)); }

double resolve_decay(const RunConfig& config, const Dataset& ds) {
    if (config.phi > 0.0) return config.phi;
    // effective range at correlation 0.05 set to a fraction of the
    // maximum inter-point distance; subsample very large datasets
    const auto& recs = ds.records;
    if (recs.size() < 2)
        throw ValidationError("resolve_decay: need at least 2 records for the range rule");
    const std::size_t stride = recs.size() > 4000 ? recs.size() / 4000 + 1 : 1;
    double max_d = 0.0;
    for (std::size_t i = 0; i < recs.size(); i += stride)
        for (std::size_t j = i + stride; j < recs.size(); j += stride)
            max_d = std::max(max_d, distance(recs[i].loc, recs[j].loc));
    if (!(max_d > 0.0)) throw ValidationError("resolve_decay: all locations coincide");
    return decay_for_effective_range(config.kernel_family,
                                     config.effective_range_fraction * max_d);
}

SimSpec parse_sim_spec(const std::string& text) {
    const json root = parse_json(text, "generator spec");
    SimSpec spec;
    if (root.contains("domain")) spec.domain = domain_from(root.at("domain"));
    spec.max_intensity = root.value("max_intensity", spec.max_intensity);
    if (!root.contains("combos") || root.at("combos").empty())
        throw ValidationError("generator spec: at least one combination required");
    for (const auto& cj : root.at("combos")) {
        ComboSpec combo;
        combo.intensity = surface_from(cj.at("intensity"));
        if (cj.contains("mark")) {
            const auto& mj = cj.at("mark");
            combo.mark_family = mark_family_from_string(
                mj.value("family", std::string("truncated-poisson")));
            if (combo.mark_family == MarkFamily::Normal) {
                combo.mark_surface = surface_from(mj.at("mean"));
                combo.sigma2 = mj.value("sigma2", 1.0);
            } else {
                combo.mark_surface = surface_from(mj.at("log_rate"));
                if (mj.contains("bounds")) {
                    combo.lo = mj.at("bounds").at(0).get<int>();
                    combo.hi = mj.at("bounds").at(1).get<int>();
                }
            }
        }
        spec.combos.push_back(std::move(combo));
    }
    return spec;
}

SimSpec load_sim_spec(const std::string& path) { return parse_sim_spec(slurp(path)); }

} // namespace geosynth
