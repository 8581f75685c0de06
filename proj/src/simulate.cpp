#include "geosynth/simulate.hpp"

#include <cmath>
#include <string>

namespace geosynth {

double SurfaceSpec::value(const Point& s) const {
    double v = base;
    for (const auto& b : bumps) {
        const double d2 = (s.x - b.center.x) * (s.x - b.center.x) +
                          (s.y - b.center.y) * (s.y - b.center.y);
        v += b.weight * std::exp(-d2 / (2.0 * b.sd * b.sd));
    }
    return log_scale ? std::exp(v) : v;
}

double SurfaceSpec::upper_bound() const {
    double v = base;
    for (const auto& b : bumps) v += std::max(b.weight, 0.0);
    return log_scale ? std::exp(v) : v;
}

double SurfaceSpec::integral(const SpatialDomain& domain) const {
    if (!log_scale) {
        // Gaussian bumps integrate to weight * 2 pi sd^2 (boundary
        // truncation ignored; bumps are expected to sit inside D)
        double total = base * domain.area();
        for (const auto& b : bumps) total += b.weight * 2.0 * M_PI * b.sd * b.sd;
        return total;
    }
    const int n = 40000;
    const auto pts = lattice_points(domain, n);
    double total = 0.0;
    for (const auto& p : pts) total += value(p);
    return total * domain.area() / static_cast<double>(n);
}

void SurfaceSpec::validate(bool must_be_nonnegative) const {
    for (const auto& b : bumps) {
        if (!(b.sd > 0.0)) throw ValidationError("surface: bump sd must be positive");
        if (!std::isfinite(b.weight)) throw ValidationError("surface: non-finite bump weight");
    }
    if (!std::isfinite(base)) throw ValidationError("surface: non-finite base");
    if (must_be_nonnegative && !log_scale) {
        double worst = base;
        for (const auto& b : bumps) worst += std::min(b.weight, 0.0);
        if (worst < 0.0)
            throw ValidationError("surface: intensity can go negative; use log_scale or "
                                  "nonnegative weights");
    }
}

std::vector<Point> simulate_poisson_process(const SurfaceSpec& intensity,
                                            const SpatialDomain& domain, Rng& rng,
                                            double max_intensity) {
    intensity.validate(true);
    domain.validate();
    const double bound = intensity.upper_bound();
    if (!(bound >= 0.0) || bound > max_intensity)
        throw ValidationError("simulate: unbounded or excessive intensity spec (bound " +
                              std::to_string(bound) + ")");
    std::vector<Point> pts;
    if (bound == 0.0) return pts;
    const long n_dom = rng.poisson(bound * domain.area());
    pts.reserve(static_cast<std::size_t>(n_dom));
    for (long i = 0; i < n_dom; ++i) {
        const Point p{rng.uniform(domain.x0, domain.x1), rng.uniform(domain.y0, domain.y1)};
        if (rng.uniform() * bound < intensity.value(p)) pts.push_back(p);
    }
    return pts;
}

Dataset simulate_dataset(const SimSpec& spec, std::uint64_t seed) {
    if (spec.combos.empty()) throw ValidationError("simulate: no combinations specified");
    Dataset ds;
    ds.domain = spec.domain;
    ds.K = static_cast<int>(spec.combos.size());
    ds.counts.assign(static_cast<std::size_t>(ds.K), 0);
    for (int k = 0; k < ds.K; ++k) {
        const auto& combo = spec.combos[static_cast<std::size_t>(k)];
        combo.mark_surface.validate(false);
        Rng rng = Rng::stream(seed, "simulate/combo/" + std::to_string(k));
        const auto pts =
            simulate_poisson_process(combo.intensity, spec.domain, rng, spec.max_intensity);
        for (const auto& p : pts) {
            Record rec;
            rec.loc = p;
            rec.combo = k + 1;
            const double level = combo.mark_surface.value(p);
            if (combo.mark_family == MarkFamily::Normal) {
                rec.mark = rng.normal(level, std::sqrt(combo.sigma2));
            } else {
                const double rate = combo.mark_surface.log_scale ? level : std::exp(level);
                rec.mark = static_cast<double>(draw_trunc_pois(rate, combo.lo, combo.hi, rng));
            }
            ds.records.push_back(std::move(rec));
            ds.counts[static_cast<std::size_t>(k)]++;
        }
    }
    ds.validate();
    return ds;
}

} // namespace geosynth
