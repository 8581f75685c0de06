#include "geosynth/knots.hpp"

#include <algorithm>
#include <cmath>

namespace geosynth {

std::vector<Point> place_grid_knots(const SpatialDomain& domain, int n_g) {
    if (n_g < 1) throw ValidationError("place_grid_knots: n_g must be positive");
    return lattice_points(domain, n_g);
}

namespace {

// Unmarked dataset: every record collapsed onto a single combination.
Dataset collapse_to_unmarked(const Dataset& ds) {
    Dataset one;
    one.domain = ds.domain;
    one.K = 1;
    one.source_map = ds.source_map;
    one.counts = {static_cast<long>(ds.records.size())};
    one.records.reserve(ds.records.size());
    for (const auto& rec : ds.records) {
        Record r;
        r.loc = rec.loc;
        r.combo = 1;
        r.mark = rec.mark;
        one.records.push_back(std::move(r));
    }
    return one;
}

} // namespace

std::vector<Point> place_intensity_knots(const Dataset& ds, int n_pp,
                                         const KnotPlacementConfig& config,
                                         const Kernel& kernel,
                                         const std::vector<Point>& existing,
                                         double min_separation, std::uint64_t seed) {
    if (n_pp == 0) return {};
    if (n_pp < 0) throw ValidationError("place_intensity_knots: negative n_pp");
    if (ds.records.empty())
        throw ValidationError("place_intensity_knots: empty dataset");

    const Dataset unmarked = collapse_to_unmarked(ds);
    KnotSet prefit_knots;
    prefit_knots.grid_knots = place_grid_knots(ds.domain, config.n_grid);
    const IntensityChain prefit =
        fit_intensity(unmarked, prefit_knots, kernel, config.prefit, seed);

    // posterior-mean intensity over the prefit integration grid
    const auto& candidates = prefit.grid.points;
    std::vector<double> weights(candidates.size(), 0.0);
    for (const auto& draw : prefit.draws) {
        const auto surf =
            intensity_surface(prefit, draw, 0, std::span<const Point>(candidates));
        for (std::size_t i = 0; i < candidates.size(); ++i) weights[i] += surf[i];
    }

    Rng rng = Rng::stream(seed, "knots/intensity");
    std::vector<Point> picked;
    picked.reserve(static_cast<std::size_t>(n_pp));
    const auto too_close = [&](const Point& p) {
        for (const auto& q : existing)
            if (distance(p, q) < min_separation) return true;
        for (const auto& q : picked)
            if (distance(p, q) < min_separation) return true;
        return false;
    };

    std::vector<double> w = weights;
    while (static_cast<int>(picked.size()) < n_pp) {
        double total = 0.0;
        for (double v : w) total += v;
        if (!(total > 0.0))
            throw ValidationError(
                "place_intensity_knots: candidate pool exhausted before placing all knots");
        const std::size_t idx = rng.categorical(w);
        w[idx] = 0.0; // without replacement
        if (too_close(candidates[idx])) continue;
        picked.push_back(candidates[idx]);
    }
    return picked;
}

KnotSet build_knot_set(const Dataset& ds, const KnotPlacementConfig& config,
                       const Kernel& kernel, std::uint64_t seed) {
    if (config.n_grid < 1)
        throw ValidationError("build_knot_set: at least one grid knot required");
    KnotSet ks;
    ks.grid_knots = place_grid_knots(ds.domain, config.n_grid);

    double sep = config.min_separation;
    if (sep < 0.0) {
        const auto [rows, cols] = lattice_shape(config.n_grid);
        const double dx = ds.domain.width() / static_cast<double>(cols);
        const double dy = ds.domain.height() / static_cast<double>(rows);
        sep = 0.5 * std::min(dx, dy);
    }
    ks.min_separation = sep;
    ks.pp_knots = place_intensity_knots(ds, config.n_intensity, config, kernel,
                                        ks.grid_knots, sep, seed);
    return ks;
}

} // namespace geosynth
