#pragma once
// KnotSet value type, split out so the LGCP model and knot placement
// can depend on it without a cycle.

#include <vector>

#include "geosynth/data.hpp"

namespace geosynth {

// Fixed knot locations shared across combinations: a uniform grid
// subset plus a subset sampled from an overall intensity surface.
struct KnotSet {
    std::vector<Point> grid_knots;
    std::vector<Point> pp_knots;
    double min_separation = 0.0;

    std::vector<Point> all() const {
        std::vector<Point> out = grid_knots;
        out.insert(out.end(), pp_knots.begin(), pp_knots.end());
        return out;
    }
    int size() const { return static_cast<int>(grid_knots.size() + pp_knots.size()); }
};

} // namespace geosynth
