#include "geosynth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "geosynth/mathutil.hpp"

namespace geosynth {

namespace {

void check_khat_args(std::span<const Point> pts, double area, double h) {
    if (pts.size() < 2) throw ValidationError("k_hat: need at least 2 points");
    if (!(area > 0.0)) throw ValidationError("k_hat: area must be positive");
    if (h < 0.0) throw ValidationError("k_hat: negative radius");
}

} // namespace

double k_hat(std::span<const Point> pts, double area, double h) {
    check_khat_args(pts, area, h);
    const std::size_t n = pts.size();
    long pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (distance(pts[i], pts[j]) <= h) pairs += 2; // ordered pairs
    const double nn = static_cast<double>(n);
    return area / nn * static_cast<double>(pairs) / nn;
}

double l_from_k(double k_value, double h) { return std::sqrt(k_value / M_PI) - h; }

double l_hat(std::span<const Point> pts, double area, double h) {
    return l_from_k(k_hat(pts, area, h), h);
}

std::vector<double> k_hat_curve(std::span<const Point> pts, double area,
                                std::span<const double> h_grid) {
    if (h_grid.empty()) throw ValidationError("k_hat_curve: empty h grid");
    for (std::size_t i = 0; i + 1 < h_grid.size(); ++i)
        if (!(h_grid[i] < h_grid[i + 1]))
            throw ValidationError("k_hat_curve: h grid must be strictly increasing");
    check_khat_args(pts, area, h_grid.back());

    // bin pair distances once, then accumulate
    std::vector<long> bins(h_grid.size(), 0);
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(pts[i], pts[j]);
            const auto it = std::lower_bound(h_grid.begin(), h_grid.end(), d);
            if (it != h_grid.end())
                bins[static_cast<std::size_t>(it - h_grid.begin())] += 2;
        }
    std::vector<double> out(h_grid.size());
    const double nn = static_cast<double>(n);
    long cum = 0;
    for (std::size_t b = 0; b < bins.size(); ++b) {
        cum += bins[b];
        out[b] = area / nn * static_cast<double>(cum) / nn;
    }
    return out;
}

LFunctionCurve l_band(const std::vector<std::vector<Point>>& replicate_locations, double area,
                      std::vector<double> h_grid) {
    if (replicate_locations.empty()) throw ValidationError("l_band: empty replicate list");
    LFunctionCurve curve;
    curve.h_grid = std::move(h_grid);
    const std::size_t nh = curve.h_grid.size();
    std::vector<std::vector<double>> l_by_h(nh);
    for (const auto& pts : replicate_locations) {
        const auto ks = k_hat_curve(std::span<const Point>(pts), area,
                                    std::span<const double>(curve.h_grid));
        for (std::size_t b = 0; b < nh; ++b)
            l_by_h[b].push_back(l_from_k(ks[b], curve.h_grid[b]));
    }
    curve.l_mean.resize(nh);
    curve.band_lo.resize(nh);
    curve.band_hi.resize(nh);
    for (std::size_t b = 0; b < nh; ++b) {
        curve.l_mean[b] = mean(l_by_h[b]);
        curve.band_lo[b] = quantile(l_by_h[b], 0.025);
        curve.band_hi[b] = quantile(l_by_h[b], 0.975);
    }
    return curve;
}

CombinedInference combine(std::span<const double> q, std::span<const double> u, double level) {
    if (q.size() < 2) throw ValidationError("combine: need at least 2 synthetic analyses");
    if (q.size() != u.size()) throw ValidationError("combine: q and u lengths differ");
    for (double v : u)
        if (v < 0.0) throw ValidationError("combine: negative variance estimate");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("combine: level outside (0,1)");

    const double l_count = static_cast<double>(q.size());
    CombinedInference out;
    out.level = level;
    out.point = mean(q);
    out.between = sample_variance(q);
    out.within = mean(u);
    out.total_var = out.within + out.between / l_count;

    const double half = 0.5 * (1.0 - level);
    if (out.between > 0.0) {
        out.df = (l_count - 1.0) *
                 std::pow(1.0 + out.within * l_count / out.between, 2.0);
        const double t = student_t_quantile(1.0 - half, out.df);
        const double se = std::sqrt(out.total_var);
        out.lo = out.point - t * se;
        out.hi = out.point + t * se;
    } else {
        // all point estimates identical: normal interval with variance u_bar
        out.df = std::numeric_limits<double>::infinity();
        const double z = normal_quantile(1.0 - half);
        const double se = std::sqrt(out.within);
        out.lo = out.point - z * se;
        out.hi = out.point + z * se;
    }
    return out;
}

namespace {

inline bool spatially_close(const Point& a, const Point& b, double eps_s) {
    return distance(a, b) < eps_s; // strict, per definition
}

inline bool similar_attributes(const Record& synth, const Record& target, double eps_a) {
    return synth.combo == target.combo && std::fabs(synth.mark - target.mark) <= eps_a;
}

void summarize(RiskSummary& s) {
    std::vector<double> valid;
    for (double v : s.per_replicate)
        if (!std::isnan(v)) valid.push_back(v);
    s.valid = static_cast<int>(valid.size());
    s.undefined = valid.empty();
    if (!s.undefined) s.median = quantile(valid, 0.5);
}

RiskSummary risk_impl(const std::vector<SyntheticReplicate>& replicates, const Record& target,
                      const RiskThresholds& th, bool type_s) {
    th.validate();
    RiskSummary out;
    out.per_replicate.reserve(replicates.size());
    for (const auto& rep : replicates) {
        long denom = 0, num = 0;
        for (const auto& rec : rep.records) {
            const bool close = spatially_close(rec.loc, target.loc, th.eps_s);
            const bool similar = similar_attributes(rec, target, th.eps_a);
            const bool cond = type_s ? close : similar;
            if (cond) {
                ++denom;
                if (close && similar) ++num;
            }
        }
        out.per_replicate.push_back(denom > 0
                                        ? static_cast<double>(num) / static_cast<double>(denom)
                                        : std::numeric_limits<double>::quiet_NaN());
    }
    summarize(out);
    return out;
}

// uniform cells of side eps_s over synthetic locations
struct CellIndex {
    double cell = 1.0;
    std::unordered_map<long long, std::vector<int>> cells;

    static long long key(long cx, long cy) { return (cx << 32) ^ (cy & 0xffffffffLL); }

    void build(const std::vector<Record>& records, double eps_s) {
        cell = eps_s;
        cells.clear();
        for (int i = 0; i < static_cast<int>(records.size()); ++i) {
            const auto& p = records[static_cast<std::size_t>(i)].loc;
            cells[key(static_cast<long>(std::floor(p.x / cell)),
                      static_cast<long>(std::floor(p.y / cell)))]
                .push_back(i);
        }
    }

    template <typename Fn>
    void for_neighbors(const Point& p, Fn&& fn) const {
        const long cx = static_cast<long>(std::floor(p.x / cell));
        const long cy = static_cast<long>(std::floor(p.y / cell));
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy) {
                const auto it = cells.find(key(cx + dx, cy + dy));
                if (it == cells.end()) continue;
                for (int i : it->second) fn(i);
            }
    }
};

} // namespace

RiskSummary type_s_risk(const std::vector<SyntheticReplicate>& replicates, const Record& target,
                        const RiskThresholds& thresholds) {
    return risk_impl(replicates, target, thresholds, true);
}

RiskSummary type_a_risk(const std::vector<SyntheticReplicate>& replicates, const Record& target,
                        const RiskThresholds& thresholds) {
    return risk_impl(replicates, target, thresholds, false);
}

std::vector<RecordRisk> evaluate_risks(const Dataset& confidential,
                                       const std::vector<SyntheticReplicate>& replicates,
                                       const RiskThresholds& thresholds) {
    thresholds.validate();
    const std::size_t n = confidential.records.size();
    std::vector<std::vector<double>> s_vals(n), a_vals(n);

    for (const auto& rep : replicates) {
        CellIndex index;
        index.build(rep.records, thresholds.eps_s);
        // marks per combination, sorted, for the attribute-side counts
        std::unordered_map<int, std::vector<double>> marks_by_combo;
        for (const auto& rec : rep.records) marks_by_combo[rec.combo].push_back(rec.mark);
        for (auto& [combo, marks] : marks_by_combo) std::sort(marks.begin(), marks.end());

        for (std::size_t i = 0; i < n; ++i) {
            const Record& target = confidential.records[i];
            long close = 0, both = 0;
            index.for_neighbors(target.loc, [&](int j) {
                const Record& rec = rep.records[static_cast<std::size_t>(j)];
                if (!spatially_close(rec.loc, target.loc, thresholds.eps_s)) return;
                ++close;
                if (similar_attributes(rec, target, thresholds.eps_a)) ++both;
            });
            long similar = 0;
            const auto it = marks_by_combo.find(target.combo);
            if (it != marks_by_combo.end()) {
                const auto& marks = it->second;
                const auto lo = std::lower_bound(marks.begin(), marks.end(),
                                                 target.mark - thresholds.eps_a);
                const auto hi = std::upper_bound(marks.begin(), marks.end(),
                                                 target.mark + thresholds.eps_a);
                similar = static_cast<long>(hi - lo);
            }
            if (close > 0)
                s_vals[i].push_back(static_cast<double>(both) / static_cast<double>(close));
            if (similar > 0)
                a_vals[i].push_back(static_cast<double>(both) / static_cast<double>(similar));
        }
    }

    std::vector<RecordRisk> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].s_valid = static_cast<int>(s_vals[i].size());
        out[i].a_valid = static_cast<int>(a_vals[i].size());
        out[i].s_undefined = s_vals[i].empty();
        out[i].a_undefined = a_vals[i].empty();
        if (!s_vals[i].empty()) out[i].s_median = quantile(s_vals[i], 0.5);
        if (!a_vals[i].empty()) out[i].a_median = quantile(a_vals[i], 0.5);
    }
    return out;
}

GlmFit poisson_indicator_fit(std::span<const Record> records, int K) {
    if (K < 1) throw ValidationError("poisson_indicator_fit: K must be positive");
    GlmFit fit;
    fit.est.assign(static_cast<std::size_t>(K), std::numeric_limits<double>::quiet_NaN());
    fit.var.assign(static_cast<std::size_t>(K), std::numeric_limits<double>::quiet_NaN());
    fit.n.assign(static_cast<std::size_t>(K), 0);
    std::vector<double> sums(static_cast<std::size_t>(K), 0.0);
    for (const auto& rec : records) {
        if (rec.combo < 1 || rec.combo > K)
            throw ValidationError("poisson_indicator_fit: combo outside [1..K]");
        if (rec.mark < 0.0)
            throw ValidationError("poisson_indicator_fit: negative response");
        const auto k = static_cast<std::size_t>(rec.combo - 1);
        sums[k] += rec.mark;
        fit.n[k]++;
    }
    for (int k = 0; k < K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (fit.n[kk] == 0) continue;
        double total = sums[kk];
        if (total <= 0.0) total = 0.5; // continuity guard for all-zero groups
        fit.est[kk] = std::log(total / static_cast<double>(fit.n[kk]));
        fit.var[kk] = 1.0 / total;
    }
    return fit;
}

GlmFit logistic_indicator_fit(std::span<const Record> records,
                              std::span<const int> group_of_combo,
                              std::span<const int> outcome_of_combo, int n_groups) {
    if (n_groups < 1) throw ValidationError("logistic_indicator_fit: no groups");
    if (group_of_combo.size() != outcome_of_combo.size())
        throw ValidationError("logistic_indicator_fit: mapping lengths differ");
    GlmFit fit;
    fit.est.assign(static_cast<std::size_t>(n_groups),
                   std::numeric_limits<double>::quiet_NaN());
    fit.var.assign(static_cast<std::size_t>(n_groups),
                   std::numeric_limits<double>::quiet_NaN());
    fit.n.assign(static_cast<std::size_t>(n_groups), 0);
    std::vector<long> hits(static_cast<std::size_t>(n_groups), 0);
    const int n_combo = static_cast<int>(group_of_combo.size());
    for (const auto& rec : records) {
        if (rec.combo < 1 || rec.combo > n_combo)
            throw ValidationError("logistic_indicator_fit: combo outside the mapping");
        const auto c = static_cast<std::size_t>(rec.combo - 1);
        const int g = group_of_combo[c];
        if (g < 1 || g > n_groups)
            throw ValidationError("logistic_indicator_fit: group index outside [1..G]");
        fit.n[static_cast<std::size_t>(g - 1)]++;
        if (outcome_of_combo[c] != 0) hits[static_cast<std::size_t>(g - 1)]++;
    }
    for (int g = 0; g < n_groups; ++g) {
        const auto gg = static_cast<std::size_t>(g);
        if (fit.n[gg] == 0) continue;
        double x = static_cast<double>(hits[gg]);
        double m = static_cast<double>(fit.n[gg]);
        if (x == 0.0 || x == m) { // Haldane-Anscombe continuity correction
            x += 0.5;
            m += 1.0;
        }
        const double p = x / m;
        fit.est[gg] = std::log(p / (1.0 - p));
        fit.var[gg] = 1.0 / (m * p * (1.0 - p));
    }
    return fit;
}

} // namespace geosynth
