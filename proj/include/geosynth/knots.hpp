#pragma once
// Hybrid knot placement: a uniform grid subset plus a subset sampled
// from the posterior-mean intensity of an unmarked (K=1) fit.

#include <cstdint>

#include "geosynth/knots_types.hpp"
#include "geosynth/lgcp.hpp"

namespace geosynth {

// Regular lattice with half-cell margin; n_g = 1 gives the centroid.
std::vector<Point> place_grid_knots(const SpatialDomain& domain, int n_g);

struct KnotPlacementConfig {
    int n_grid = 16;
    int n_intensity = 16;
    double min_separation = -1.0; // < 0 resolves to half the grid spacing
    LgcpConfig prefit;            // unmarked K=1 fit used for sampling

    KnotPlacementConfig() {
        prefit.n_ni = 900;
        prefit.mcmc.burnin = 1000;
        prefit.mcmc.thin = 5;
        prefit.mcmc.retained = 50;
    }
};

// Samples n_pp distinct integration-grid points with probability
// proportional to the posterior-mean intensity of the unmarked fit,
// honoring the minimum-separation rule against existing knots.
std::vector<Point> place_intensity_knots(const Dataset& ds, int n_pp,
                                         const KnotPlacementConfig& config,
                                         const Kernel& kernel,
                                         const std::vector<Point>& existing,
                                         double min_separation, std::uint64_t seed);

// Grid knots, then intensity knots; positions are fixed thereafter.
KnotSet build_knot_set(const Dataset& ds, const KnotPlacementConfig& config,
                       const Kernel& kernel, std::uint64_t seed);

} // namespace geosynth
