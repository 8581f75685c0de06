#pragma once
// Utility diagnostics (K/L functions, combining-rule inference) and
// inferential disclosure-risk measures (Type S, Type A).

#include <limits>
#include <span>
#include <vector>

#include "geosynth/data.hpp"

namespace geosynth {

// Uncorrected estimator (|D_s|/N^2) sum_{i != j} I(||s_i - s_j|| <= h).
// Biased near edges; no correction applied by design.
double k_hat(std::span<const Point> pts, double area, double h);

// L(h) = sqrt(K(h)/pi) - h; positive values indicate clustering.
double l_hat(std::span<const Point> pts, double area, double h);
double l_from_k(double k_value, double h);

// K over an increasing h grid in one O(N^2) pass.
std::vector<double> k_hat_curve(std::span<const Point> pts, double area,
                                std::span<const double> h_grid);

struct LFunctionCurve {
    std::vector<double> h_grid;
    std::vector<double> l_mean;  // mean across replicates
    std::vector<double> band_lo; // pointwise empirical 2.5%
    std::vector<double> band_hi; // pointwise empirical 97.5%
};

LFunctionCurve l_band(const std::vector<std::vector<Point>>& replicate_locations, double area,
                      std::vector<double> h_grid);

// Combining rules across L synthetic analyses: q_bar, u_bar, b,
// T = u_bar + b/L, df = (L-1)(1 + u_bar L / b)^2, t interval.
struct CombinedInference {
    double point = 0.0;
    double within = 0.0;
    double between = 0.0;
    double total_var = 0.0;
    double df = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.95;
};

CombinedInference combine(std::span<const double> q, std::span<const double> u,
                          double level = 0.95);

struct RiskThresholds {
    double eps_s = 0.02; // spatial closeness radius (strict <)
    double eps_a = 5.0;  // attribute closeness (non-strict <=)

    void validate() const {
        if (!(eps_s > 0.0) || !(eps_a > 0.0))
            throw ValidationError("risk thresholds must be positive");
    }
};

// Per-replicate risk values for one confidential record. Replicates
// with a zero denominator carry NaN and are excluded from summaries;
// `undefined` is set when every denominator is zero.
struct RiskSummary {
    std::vector<double> per_replicate;
    int valid = 0;
    bool undefined = true;
    double median = std::numeric_limits<double>::quiet_NaN();
};

RiskSummary type_s_risk(const std::vector<SyntheticReplicate>& replicates,
                        const Record& target, const RiskThresholds& thresholds);
RiskSummary type_a_risk(const std::vector<SyntheticReplicate>& replicates,
                        const Record& target, const RiskThresholds& thresholds);

// Both risks for every confidential record, using a spatial cell index
// per replicate (identical predicates to the single-record versions).
struct RecordRisk {
    double s_median = std::numeric_limits<double>::quiet_NaN();
    double a_median = std::numeric_limits<double>::quiet_NaN();
    int s_valid = 0;
    int a_valid = 0;
    bool s_undefined = true;
    bool a_undefined = true;
};

std::vector<RecordRisk> evaluate_risks(const Dataset& confidential,
                                       const std::vector<SyntheticReplicate>& replicates,
                                       const RiskThresholds& thresholds);

// Indicator-coded generalized-linear analyses: saturated group models
// with closed-form maximum-likelihood fits and Wald variances.
struct GlmFit {
    std::vector<double> est; // NaN when the group is absent
    std::vector<double> var;
    std::vector<long> n;
};

// log-link rate regression of the mark on the K combination indicators
GlmFit poisson_indicator_fit(std::span<const Record> records, int K);

// logit regression of outcome(combo) on group(combo) indicators;
// group_of_combo maps 1..K to 1..G, outcome_of_combo to {0,1}
GlmFit logistic_indicator_fit(std::span<const Record> records,
                              std::span<const int> group_of_combo,
                              std::span<const int> outcome_of_combo, int n_groups);

} // namespace geosynth
