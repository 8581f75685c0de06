#pragma once
// Ground-truth data generator: exact inhomogeneous Poisson simulation
// by thinning a dominating homogeneous process, plus mark generation.

#include <cstdint>
#include <vector>

#include "geosynth/data.hpp"
#include "geosynth/marks.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

// base + sum of Gaussian bumps; with log_scale the whole expression is
// exponentiated. Bounded above by construction.
struct SurfaceSpec {
    struct Bump {
        Point center;
        double sd = 0.1;
        double weight = 0.0;
    };
    double base = 0.0;
    std::vector<Bump> bumps;
    bool log_scale = false;

    double value(const Point& s) const;
    double upper_bound() const;
    // integral over the domain (analytic for linear scale, lattice
    // quadrature for log scale)
    double integral(const SpatialDomain& domain) const;
    void validate(bool must_be_nonnegative) const;
};

struct ComboSpec {
    SurfaceSpec intensity;                           // linear scale, >= 0
    MarkFamily mark_family = MarkFamily::TruncatedPoisson;
    SurfaceSpec mark_surface;                        // mean (normal) or log rate (truncated)
    double sigma2 = 1.0;                             // normal family only
    int lo = 16;
    int hi = 98;
};

struct SimSpec {
    SpatialDomain domain;
    std::vector<ComboSpec> combos;
    double max_intensity = 1e8; // reject specs whose bound exceeds this
};

// One inhomogeneous Poisson pattern with the given intensity (exact).
std::vector<Point> simulate_poisson_process(const SurfaceSpec& intensity,
                                            const SpatialDomain& domain, Rng& rng,
                                            double max_intensity = 1e8);

// Full dataset: counts, locations, and marks for every combination.
Dataset simulate_dataset(const SimSpec& spec, std::uint64_t seed);

} // namespace geosynth
