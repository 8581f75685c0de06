// geosynth command line: fit / synthesize / evaluate / simulate /
// inspect-state over a single declarative config file.
//
// Exit codes: 0 success, 2 validation failure, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "geosynth/config.hpp"
#include "geosynth/mathutil.hpp"
#include "geosynth/state.hpp"
#include "geosynth/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geosynth;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

RunConfig load_config_with_overrides(const CommonFlags& flags) {
    RunConfig cfg = load_run_config(flags.config_path);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.threads > 0) {
        cfg.threads = flags.threads;
        cfg.intensity.threads = flags.threads;
        cfg.marks.threads = flags.threads;
    }
    return cfg;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir);
}

Dataset load_confidential(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ValidationError("config: data.path missing");
    return load_dataset(cfg.data_path, cfg.schema, cfg.K, cfg.rescale, cfg.domain);
}

std::string replicate_name(int l) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "replicate_%04d.csv", l);
    return buf;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const CommonFlags& flags, const std::string& state_path_flag) {
    const RunConfig cfg = load_config_with_overrides(flags);
    ensure_out_dir(cfg.out_dir);
    const Dataset ds = load_confidential(cfg);
    std::cout << "loaded " << ds.total() << " records, K=" << ds.K << "\n";

    const double phi = resolve_decay(cfg, ds);
    const Kernel kernel{cfg.kernel_family, phi};
    std::cout << "kernel " << to_string(cfg.kernel_family) << ", decay " << phi << "\n";

    long min_count = ds.counts.empty() ? 0 : ds.counts.front();
    for (long c : ds.counts) min_count = std::min(min_count, c);
    const int n_star = cfg.knots.n_grid + cfg.knots.n_intensity;
    if (n_star >= min_count)
        std::cerr << "warning: n* = " << n_star
                  << " is not smaller than the smallest combination count " << min_count
                  << "\n";
    if (n_star > 100)
        std::cerr << "warning: n* = " << n_star
                  << " exceeds the recommended budget of about 100 knots\n";

    std::cout << "placing " << cfg.knots.n_grid << "+" << cfg.knots.n_intensity
              << " knots...\n";
    const KnotSet knots = build_knot_set(ds, cfg.knots, kernel, cfg.seed);

    const int retained = std::max(cfg.intensity.mcmc.retained, cfg.marks.mcmc.retained);
    Rng cat_rng = Rng::stream(cfg.seed, "categorical");
    const Eigen::VectorXd alpha =
        cfg.alpha > 0.0 ? Eigen::VectorXd::Constant(ds.K, cfg.alpha) : default_alpha(ds.K);
    const CategoricalChain cat = fit_categorical_chain(ds, alpha, retained, cat_rng);

    // the two spatial sub-models are independent given the data; run
    // them concurrently on their own seed streams
    std::cout << "running intensity and mark chains...\n";
    auto intensity_future = std::async(std::launch::async, [&]() {
        return fit_intensity(ds, knots, kernel, cfg.intensity, cfg.seed);
    });
    MarkChain marks = fit_marks(ds, knots, kernel, cfg.marks, cfg.seed);
    IntensityChain intensity = intensity_future.get();

    ModelState st;
    st.domain = ds.domain;
    st.source_map = ds.source_map;
    st.K = ds.K;
    st.N = ds.total();
    st.counts = ds.counts;
    st.schema = cfg.schema;
    st.knots = knots;
    st.categorical = cat;
    st.intensity = std::move(intensity);
    st.marks = std::move(marks);
    st.seed = cfg.seed;
    st.config_echo = cfg.config_text;

    const std::string state_path =
        state_path_flag.empty() ? cfg.out_dir + "/state.json" : state_path_flag;
    save_state(state_path, st);
    std::cout << "state written to " << state_path << "\n";

    // acceptance-rate and log-posterior diagnostics
    const auto write_diag = [&](const std::string& path, const ChainDiagnostics& diag) {
        std::ofstream out(path);
        out << "combo,accept_beta,accept_w,accept_psi\n";
        for (std::size_t k = 0; k < diag.accept_beta.size(); ++k)
            out << (k + 1) << ',' << format_double(diag.accept_beta[k]) << ','
                << format_double(diag.accept_w[k]) << ',' << format_double(diag.accept_psi)
                << '\n';
        out << "\ndraw,logpost\n";
        for (std::size_t i = 0; i < diag.logpost.size(); ++i)
            out << (i + 1) << ',' << format_double(diag.logpost[i]) << '\n';
    };
    write_diag(cfg.out_dir + "/diagnostics_intensity.csv", st.intensity.diag);
    write_diag(cfg.out_dir + "/diagnostics_marks.csv", st.marks.diag);
    return 0;
}

// --------------------------------------------------------- synthesize

int cmd_synthesize(const CommonFlags& flags, const std::string& state_path, int l_flag,
                   const std::string& pool_flag) {
    const RunConfig cfg = load_config_with_overrides(flags);
    ensure_out_dir(cfg.out_dir);
    if (state_path.empty()) throw ValidationError("synthesize: --state is required");
    const ModelState st = load_state(state_path);

    const int l_count = l_flag > 0 ? l_flag : cfg.L;
    const std::string pool_spec = pool_flag.empty() ? cfg.pool_spec : pool_flag;
    const std::uint64_t seed = flags.seed_set ? flags.seed : cfg.seed;

    CandidatePool pool = make_pool(pool_spec, st.domain, st.source_map, st.schema, seed);
    SynthesisPlan plan = SynthesisPlan::identity(l_count, seed, std::move(pool), cfg.min_pool);
    std::cout << "generating " << l_count << " replicates of N=" << st.N << " from pool "
              << pool_spec << "\n";
    const auto reps =
        synthesize(plan, st.categorical, st.intensity, st.marks, st.N, st.domain);

    json manifest;
    manifest["magic"] = "geosynth-manifest";
    manifest["version"] = 1;
    manifest["K"] = st.K;
    manifest["N"] = st.N;
    manifest["L"] = l_count;
    manifest["seed"] = seed;
    manifest["pool"] = pool_spec;
    manifest["draw_indices"] = plan.draw_indices;
    manifest["state"] = state_path;
    manifest["mark_family"] = to_string(st.marks.family);
    manifest["mark_bounds"] = {st.marks.lo, st.marks.hi};
    manifest["domain"] = {{"x0", st.domain.x0},
                          {"y0", st.domain.y0},
                          {"x1", st.domain.x1},
                          {"y1", st.domain.y1}};
    manifest["source_map"] = {{"offset_x", st.source_map.offset_x},
                              {"scale_x", st.source_map.scale_x},
                              {"offset_y", st.source_map.offset_y},
                              {"scale_y", st.source_map.scale_y}};
    manifest["schema"] = {{"x", st.schema.x},
                          {"y", st.schema.y},
                          {"combo", st.schema.combo},
                          {"mark", st.schema.mark}};
    json files = json::array();
    for (const auto& rep : reps) {
        const std::string name = replicate_name(rep.replicate_id);
        save_dataset_csv(cfg.out_dir + "/" + name, rep.records, st.schema, st.source_map);
        files.push_back(name);
    }
    manifest["files"] = std::move(files);
    std::ofstream mf(cfg.out_dir + "/manifest.json");
    mf << manifest.dump(1) << '\n';
    if (!mf) throw ValidationError("cannot write manifest");
    std::cout << "wrote " << reps.size() << " replicates and manifest.json under "
              << cfg.out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------ evaluate

struct Manifest {
    int K = 0;
    long N = 0;
    SpatialDomain domain;
    AffineMap map;
    std::vector<std::string> files;
    std::string dir;
};

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("manifest: malformed JSON: ") + e.what());
    }
    if (!j.contains("magic") || j["magic"] != "geosynth-manifest")
        throw ValidationError("manifest: wrong magic");
    Manifest m;
    m.K = j.at("K").get<int>();
    m.N = j.at("N").get<long>();
    const auto& dom = j.at("domain");
    m.domain = {dom.at("x0").get<double>(), dom.at("y0").get<double>(),
                dom.at("x1").get<double>(), dom.at("y1").get<double>()};
    const auto& map = j.at("source_map");
    m.map.offset_x = map.at("offset_x").get<double>();
    m.map.scale_x = map.at("scale_x").get<double>();
    m.map.offset_y = map.at("offset_y").get<double>();
    m.map.scale_y = map.at("scale_y").get<double>();
    m.files = j.at("files").get<std::vector<std::string>>();
    m.dir = fs::path(path).parent_path().string();
    if (m.dir.empty()) m.dir = ".";
    return m;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& confidential_path,
                 const std::string& manifest_path, double eps_s, double eps_a,
                 bool plot_data) {
    RunConfig cfg = load_config_with_overrides(flags);
    if (eps_s > 0.0) cfg.thresholds.eps_s = eps_s;
    if (eps_a > 0.0) cfg.thresholds.eps_a = eps_a;
    ensure_out_dir(cfg.out_dir);
    if (confidential_path.empty() || manifest_path.empty())
        throw ValidationError("evaluate: --confidential and --manifest are required");

    const Manifest manifest = load_manifest(manifest_path);
    // everything is compared in model coordinates via the stored map
    const Dataset conf = load_dataset_with_map(confidential_path, cfg.schema, manifest.K,
                                               manifest.map, manifest.domain);
    if (manifest.files.empty()) throw ValidationError("evaluate: empty replicate list");
    std::vector<SyntheticReplicate> reps;
    reps.reserve(manifest.files.size());
    for (const auto& name : manifest.files) {
        const Dataset d = load_dataset_with_map(manifest.dir + "/" + name, cfg.schema,
                                                manifest.K, manifest.map, manifest.domain);
        SyntheticReplicate rep;
        rep.replicate_id = static_cast<int>(reps.size()) + 1;
        rep.records = d.records;
        rep.counts = d.counts;
        reps.push_back(std::move(rep));
    }
    std::cout << "evaluating " << reps.size() << " replicates against "
              << conf.records.size() << " confidential records\n";

    json summary;
    summary["replicates"] = reps.size();
    summary["eps_s"] = cfg.thresholds.eps_s;
    summary["eps_a"] = cfg.thresholds.eps_a;

    // ---- L function with pointwise band
    {
        const auto grid = cfg.h_grid();
        std::vector<Point> conf_pts;
        for (const auto& r : conf.records) conf_pts.push_back(r.loc);
        std::vector<std::vector<Point>> rep_pts;
        for (const auto& rep : reps) {
            std::vector<Point> pts;
            for (const auto& r : rep.records) pts.push_back(r.loc);
            rep_pts.push_back(std::move(pts));
        }
        const auto band = l_band(rep_pts, conf.domain.area(), grid);
        const auto conf_k = k_hat_curve(conf_pts, conf.domain.area(), grid);

        std::ofstream out(cfg.out_dir + "/lfunction.csv");
        out << "h,conf_l,syn_mean,syn_lo,syn_hi,inside\n";
        int inside_count = 0, considered = 0;
        for (std::size_t b = 0; b < grid.size(); ++b) {
            const double conf_l = l_from_k(conf_k[b], grid[b]);
            const bool inside =
                conf_l >= band.band_lo[b] && conf_l <= band.band_hi[b];
            out << format_double(grid[b]) << ',' << format_double(conf_l) << ','
                << format_double(band.l_mean[b]) << ',' << format_double(band.band_lo[b])
                << ',' << format_double(band.band_hi[b]) << ',' << (inside ? 1 : 0) << '\n';
            ++considered;
            if (inside) ++inside_count;
        }
        summary["l_function"] = {{"points", considered}, {"inside_band", inside_count}};
    }

    // ---- combining-rule tables for the configured analyses
    json analyses_summary = json::array();
    for (const auto& spec : cfg.analyses) {
        const bool poisson = spec.type == "poisson-rate";
        const int n_coef = poisson ? manifest.K
                                   : *std::max_element(spec.group_of_combo.begin(),
                                                       spec.group_of_combo.end());
        const auto fit_one = [&](std::span<const Record> records) {
            return poisson ? poisson_indicator_fit(records, manifest.K)
                           : logistic_indicator_fit(records, spec.group_of_combo,
                                                    spec.outcome_of_combo, n_coef);
        };
        const GlmFit conf_fit = fit_one(conf.records);
        std::vector<GlmFit> rep_fits;
        for (const auto& rep : reps) rep_fits.push_back(fit_one(rep.records));

        const double z = normal_quantile(0.5 + 0.5 * cfg.level);
        std::ofstream out(cfg.out_dir + "/analysis_" + spec.name + ".csv");
        out << "coef,conf_est,conf_lo,conf_hi,syn_est,syn_lo,syn_hi,syn_df,overlap\n";
        int overlaps = 0, considered = 0;
        for (int j = 0; j < n_coef; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            std::vector<double> q, u;
            for (const auto& f : rep_fits)
                if (std::isfinite(f.est[jj])) {
                    q.push_back(f.est[jj]);
                    u.push_back(f.var[jj]);
                }
            if (!std::isfinite(conf_fit.est[jj]) || q.size() < 2) continue;
            const auto comb = combine(q, u, cfg.level);
            const double conf_lo = conf_fit.est[jj] - z * std::sqrt(conf_fit.var[jj]);
            const double conf_hi = conf_fit.est[jj] + z * std::sqrt(conf_fit.var[jj]);
            const bool overlap = comb.lo <= conf_hi && conf_lo <= comb.hi;
            out << (j + 1) << ',' << format_double(conf_fit.est[jj]) << ','
                << format_double(conf_lo) << ',' << format_double(conf_hi) << ','
                << format_double(comb.point) << ',' << format_double(comb.lo) << ','
                << format_double(comb.hi) << ',' << format_double(comb.df) << ','
                << (overlap ? 1 : 0) << '\n';
            ++considered;
            if (overlap) ++overlaps;
        }
        analyses_summary.push_back(
            {{"name", spec.name}, {"coefficients", considered}, {"overlapping", overlaps}});
    }
    summary["analyses"] = std::move(analyses_summary);

    // ---- Type S / Type A risk
    {
        const auto risks = evaluate_risks(conf, reps, cfg.thresholds);
        std::ofstream out(cfg.out_dir + "/risks.csv");
        out << "record,combo,mark,s_valid,s_median,a_valid,a_median\n";
        long below = 0, undefined = 0;
        double max_s = 0.0, max_a = 0.0;
        for (std::size_t i = 0; i < risks.size(); ++i) {
            const auto& r = risks[i];
            out << (i + 1) << ',' << conf.records[i].combo << ','
                << format_double(conf.records[i].mark) << ',' << r.s_valid << ','
                << (r.s_undefined ? "" : format_double(r.s_median)) << ',' << r.a_valid
                << ',' << (r.a_undefined ? "" : format_double(r.a_median)) << '\n';
            const double s = r.s_undefined ? 0.0 : r.s_median;
            const double a = r.a_undefined ? 0.0 : r.a_median;
            max_s = std::max(max_s, s);
            max_a = std::max(max_a, a);
            if (r.s_undefined && r.a_undefined) ++undefined;
            if (s < cfg.risk_report_threshold && a < cfg.risk_report_threshold) ++below;
        }
        summary["risk"] = {{"records", risks.size()},
                           {"threshold", cfg.risk_report_threshold},
                           {"below_threshold", below},
                           {"both_undefined", undefined},
                           {"max_s_median", max_s},
                           {"max_a_median", max_a}};
        if (plot_data) {
            std::ofstream sc(cfg.out_dir + "/risk_scatter.csv");
            sc << "s_median,a_median\n";
            for (const auto& r : risks)
                sc << (r.s_undefined ? 0.0 : r.s_median) << ','
                   << (r.a_undefined ? 0.0 : r.a_median) << '\n';
        }
    }

    std::ofstream sf(cfg.out_dir + "/summary.json");
    sf << summary.dump(1) << '\n';
    std::cout << summary.dump(1) << '\n';
    return 0;
}

// ------------------------------------------------------------ simulate

int cmd_simulate(const std::string& spec_path, std::uint64_t seed,
                 const std::string& out_path) {
    if (spec_path.empty() || out_path.empty())
        throw ValidationError("simulate: --spec and --out are required");
    const SimSpec spec = load_sim_spec(spec_path);
    const Dataset ds = simulate_dataset(spec, seed);
    CsvSchema schema; // x,y,combo,mark
    save_dataset_csv(out_path, ds.records, schema, ds.source_map);
    std::cout << "simulated " << ds.total() << " records over " << ds.K
              << " combination(s) -> " << out_path << "\n";
    for (int k = 0; k < ds.K; ++k)
        std::cout << "  combo " << (k + 1) << ": " << ds.counts[static_cast<std::size_t>(k)]
                  << "\n";
    return 0;
}

// -------------------------------------------------------- inspect-state

int cmd_inspect(const std::string& state_path) {
    const ModelState st = load_state(state_path);
    std::cout << "geosynth state (version " << kStateVersion << ")\n";
    std::cout << "  K=" << st.K << " N=" << st.N << " seed=" << st.seed << "\n";
    std::cout << "  domain [" << st.domain.x0 << "," << st.domain.x1 << "] x ["
              << st.domain.y0 << "," << st.domain.y1 << "]\n";
    std::cout << "  knots: " << st.knots.grid_knots.size() << " grid + "
              << st.knots.pp_knots.size() << " intensity (min sep "
              << st.knots.min_separation << ")\n";
    std::cout << "  categorical: " << st.categorical.theta_draws.size() << " theta draws\n";
    std::cout << "  intensity: " << st.intensity.draws.size() << " draws, kernel "
              << to_string(st.intensity.kernel.family) << " decay "
              << st.intensity.kernel.decay << "\n";
    std::cout << "  marks: " << st.marks.draws.size() << " draws, family "
              << to_string(st.marks.family);
    if (st.marks.family == MarkFamily::TruncatedPoisson)
        std::cout << " on [" << st.marks.lo << "," << st.marks.hi << "]";
    std::cout << "\n";
    double lo = 1.0, hi = 0.0;
    for (double a : st.intensity.diag.accept_w) {
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    std::cout << "  intensity w* acceptance in [" << lo << ", " << hi << "]\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian marked point process synthesis of point-referenced microdata"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string state_path, pool_flag, confidential_path, manifest_path, spec_path, out_path;
    int l_flag = 0;
    double eps_s = 0.0, eps_a = 0.0;
    bool plot_data = false;
    std::uint64_t sim_seed = 1;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "run configuration file")->required();
        sub->add_option("--out", flags.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", flags.seed, "seed (overrides config)")
            ->each([&](const std::string&) { flags.seed_set = true; });
        sub->add_option("--threads", flags.threads, "worker threads (overrides config)");
    };

    auto* fit = app.add_subcommand("fit", "fit the three sub-models and write model state");
    add_common(fit);
    fit->add_option("--state", state_path, "state output path (default <out>/state.json)");

    auto* synth = app.add_subcommand("synthesize", "generate synthetic replicates from a state");
    add_common(synth);
    synth->add_option("--state", state_path, "fitted model state")->required();
    synth->add_option("--replicates", l_flag, "number of replicates L (overrides config)");
    synth->add_option("--pool", pool_flag, "candidate pool: grid:R | uniform:N | file:path");

    auto* eval = app.add_subcommand("evaluate", "utility and disclosure-risk reports");
    add_common(eval);
    eval->add_option("--confidential", confidential_path, "confidential data file")->required();
    eval->add_option("--manifest", manifest_path, "manifest written by synthesize")->required();
    eval->add_option("--eps-s", eps_s, "spatial closeness radius");
    eval->add_option("--eps-a", eps_a, "attribute closeness threshold");
    eval->add_flag("--plot-data", plot_data, "emit ready-to-plot tables");

    auto* sim = app.add_subcommand("simulate", "generate ground-truth test data");
    sim->add_option("--spec", spec_path, "generator spec file")->required();
    sim->add_option("--seed", sim_seed, "seed");
    sim->add_option("--out", out_path, "output CSV path")->required();

    auto* inspect = app.add_subcommand("inspect-state", "summarize a model state file");
    inspect->add_option("--state", state_path, "state file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (fit->parsed()) return cmd_fit(flags, state_path);
        if (synth->parsed()) return cmd_synthesize(flags, state_path, l_flag, pool_flag);
        if (eval->parsed())
            return cmd_evaluate(flags, confidential_path, manifest_path, eps_s, eps_a,
                                plot_data);
        if (sim->parsed()) return cmd_simulate(spec_path, sim_seed, out_path);
        if (inspect->parsed()) return cmd_inspect(state_path);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
