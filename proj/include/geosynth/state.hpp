#pragma once
// Versioned, self-describing container for fitted model state.
//
// The on-disk format is a JSON document with a magic marker, a format
// version, and per-module blocks keyed by name. Doubles are written in
// shortest round-trip form, so load(save(x)) == x bitwise and repeated
// saves of the same state are byte-identical.

#include <cstdint>
#include <string>

#include "geosynth/categorical.hpp"
#include "geosynth/data.hpp"
#include "geosynth/knots_types.hpp"
#include "geosynth/lgcp.hpp"
#include "geosynth/marks.hpp"

namespace geosynth {

inline constexpr const char* kStateMagic = "geosynth-state";
inline constexpr int kStateVersion = 1;

struct ModelState {
    SpatialDomain domain;
    AffineMap source_map;
    int K = 0;
    long N = 0;
    std::vector<long> counts;
    CsvSchema schema;
    KnotSet knots;
    CategoricalChain categorical;
    IntensityChain intensity;
    MarkChain marks;
    std::uint64_t seed = 0;
    std::string config_echo; // original run config text, if any
};

std::string state_to_string(const ModelState& state);
ModelState state_from_string(const std::string& text);

void save_state(const std::string& path, const ModelState& state);
ModelState load_state(const std::string& path);

} // namespace geosynth
