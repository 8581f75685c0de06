#pragma once
// Posterior-predictive generation of L fully synthetic replicates:
// counts, then locations from a candidate pool, then marks.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geosynth/categorical.hpp"
#include "geosynth/data.hpp"
#include "geosynth/lgcp.hpp"
#include "geosynth/marks.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

struct CandidatePool {
    std::vector<Point> locations;
    std::string source; // "grid:R", "uniform:N", "file:<path>"
    // optional per-candidate covariates (leading 1.0 intercept); empty
    // collections mean intercept-only
    std::vector<std::vector<double>> cov_lambda;
    std::vector<std::vector<double>> cov_mark;
};

CandidatePool make_grid_pool(const SpatialDomain& domain, int resolution);
CandidatePool make_uniform_pool(const SpatialDomain& domain, int n, Rng& rng);
CandidatePool load_pool_csv(const std::string& path, const CsvSchema& schema,
                            const AffineMap& map, const SpatialDomain& domain);

// "grid:R" | "uniform:N" | "file:path"
CandidatePool make_pool(const std::string& spec, const SpatialDomain& domain,
                        const AffineMap& map, const CsvSchema& schema, std::uint64_t seed);

struct SynthesisPlan {
    int L = 0;
    std::uint64_t seed = 0;
    CandidatePool pool;
    std::vector<int> draw_indices; // size L, 0-based into the retained draws
    int min_pool = 2500;           // hard floor on the candidate pool size

    // identity mapping: replicate l uses retained draw l-1
    static SynthesisPlan identity(int L, std::uint64_t seed, CandidatePool pool,
                                  int min_pool = 2500);
};

// n_k i.i.d. pool indices drawn with replacement, P(j) proportional to
// lambda_at_pool[j].
std::vector<std::size_t> draw_locations(std::span<const double> lambda_at_pool, long n_k,
                                        Rng& rng);

std::vector<SyntheticReplicate> synthesize(const SynthesisPlan& plan,
                                           const CategoricalChain& categorical,
                                           const IntensityChain& intensity,
                                           const MarkChain& marks, long n_total,
                                           const SpatialDomain& domain);

} // namespace geosynth
