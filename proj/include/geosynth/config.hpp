#pragma once
// Declarative run configuration. One JSON file drives fit, synthesize
// and evaluate; CLI flags override individual keys.

#include <cstdint>
#include <string>
#include <vector>

#include "geosynth/covariance.hpp"
#include "geosynth/data.hpp"
#include "geosynth/evaluation.hpp"
#include "geosynth/knots.hpp"
#include "geosynth/lgcp.hpp"
#include "geosynth/marks.hpp"
#include "geosynth/simulate.hpp"

namespace geosynth {

struct AnalysisSpec {
    std::string type; // "poisson-rate" | "logistic"
    std::string name;
    std::vector<int> group_of_combo;   // logistic: 1..G per combo
    std::vector<int> outcome_of_combo; // logistic: 0/1 per combo
};

struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 1;

    // data
    std::string data_path;
    int K = 0;
    bool rescale = true;
    CsvSchema schema;
    SpatialDomain domain;

    // knots
    KnotPlacementConfig knots;

    // kernel policy (shared by the intensity and mark models)
    KernelFamily kernel_family = KernelFamily::Exponential;
    double phi = -1.0; // <= 0: effective-range rule on the data
    double effective_range_fraction = 0.5;
    double jitter = 1e-8;

    LgcpConfig intensity;
    MarkConfig marks;
    double alpha = -1.0; // <= 0: 1/K

    // synthesis
    int L = 50;
    std::string pool_spec = "grid:50";
    int min_pool = 2500;

    // evaluation
    RiskThresholds thresholds;
    double h_min = 0.01;
    double h_max = 0.25;
    int h_steps = 25;
    double level = 0.95;
    double risk_report_threshold = 0.2; // reference line for the summary
    std::vector<AnalysisSpec> analyses;

    std::string out_dir = "out";
    std::string config_text; // raw file contents, echoed into the state

    void validate() const;
    std::vector<double> h_grid() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Decay parameter under the configured policy: fixed phi when given,
// otherwise effective range = fraction * max inter-point distance.
double resolve_decay(const RunConfig& config, const Dataset& ds);

// Generator specification for the `simulate` subcommand.
SimSpec parse_sim_spec(const std::string& text);
SimSpec load_sim_spec(const std::string& path);

} // namespace geosynth
