#include "geosynth/synthesis.hpp"

#include <algorithm>
#include <cmath>

namespace geosynth {

CandidatePool make_grid_pool(const SpatialDomain& domain, int resolution) {
    if (resolution < 1) throw ValidationError("make_grid_pool: resolution must be positive");
    CandidatePool pool;
    pool.locations = lattice_points(domain, resolution * resolution);
    pool.source = "grid:" + std::to_string(resolution);
    return pool;
}

CandidatePool make_uniform_pool(const SpatialDomain& domain, int n, Rng& rng) {
    if (n < 1) throw ValidationError("make_uniform_pool: n must be positive");
    CandidatePool pool;
    pool.locations.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        pool.locations.push_back(
            {rng.uniform(domain.x0, domain.x1), rng.uniform(domain.y0, domain.y1)});
    pool.source = "uniform:" + std::to_string(n);
    return pool;
}

CandidatePool load_pool_csv(const std::string& path, const CsvSchema& schema,
                            const AffineMap& map, const SpatialDomain& domain) {
    CandidatePool pool;
    pool.source = "file:" + path;
    std::vector<std::string> cols{schema.x, schema.y};
    for (const auto& c : schema.cov_lambda) cols.push_back(c);
    for (const auto& c : schema.cov_mark) cols.push_back(c);
    const auto data = read_csv_columns(path, cols, schema.delimiter);
    const std::size_t n = data.front().size();
    if (n == 0) throw ValidationError("load_pool_csv: empty candidate pool file");
    pool.locations.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point p = map.forward({data[0][i], data[1][i]});
        if (!domain.contains(p))
            throw ValidationError("load_pool_csv: candidate location outside the domain");
        pool.locations.push_back(p);
    }
    if (!schema.cov_lambda.empty()) {
        pool.cov_lambda.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            pool.cov_lambda[i].push_back(1.0);
            for (std::size_t j = 0; j < schema.cov_lambda.size(); ++j)
                pool.cov_lambda[i].push_back(data[2 + j][i]);
        }
    }
    if (!schema.cov_mark.empty()) {
        pool.cov_mark.resize(n);
        const std::size_t off = 2 + schema.cov_lambda.size();
        for (std::size_t i = 0; i < n; ++i) {
            pool.cov_mark[i].push_back(1.0);
            for (std::size_t j = 0; j < schema.cov_mark.size(); ++j)
                pool.cov_mark[i].push_back(data[off + j][i]);
        }
    }
    return pool;
}

CandidatePool make_pool(const std::string& spec, const SpatialDomain& domain,
                        const AffineMap& map, const CsvSchema& schema, std::uint64_t seed) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw ValidationError("pool spec must look like grid:R, uniform:N or file:path");
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    if (kind == "grid") return make_grid_pool(domain, std::stoi(arg));
    if (kind == "uniform") {
        Rng rng = Rng::stream(seed, "pool/uniform");
        return make_uniform_pool(domain, std::stoi(arg), rng);
    }
    if (kind == "file") return load_pool_csv(arg, schema, map, domain);
    throw ValidationError("unknown pool kind: " + kind);
}

SynthesisPlan SynthesisPlan::identity(int L, std::uint64_t seed, CandidatePool pool,
                                      int min_pool) {
    SynthesisPlan plan;
    plan.L = L;
    plan.seed = seed;
    plan.pool = std::move(pool);
    plan.min_pool = min_pool;
    plan.draw_indices.resize(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) plan.draw_indices[static_cast<std::size_t>(l)] = l;
    return plan;
}

std::vector<std::size_t> draw_locations(std::span<const double> lambda_at_pool, long n_k,
                                        Rng& rng) {
    if (lambda_at_pool.empty()) throw ValidationError("draw_locations: empty candidate pool");
    if (n_k < 0) throw ValidationError("draw_locations: negative count");
    std::vector<double> cum(lambda_at_pool.size());
    double total = 0.0;
    for (std::size_t j = 0; j < lambda_at_pool.size(); ++j) {
        if (!(lambda_at_pool[j] >= 0.0))
            throw NumericalError("draw_locations: negative or non-finite intensity");
        total += lambda_at_pool[j];
        cum[j] = total;
    }
    if (!(total > 0.0)) throw NumericalError("draw_locations: intensity sums to zero");
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(n_k));
    for (long i = 0; i < n_k; ++i) {
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        out.push_back(static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cum.begin(),
                                     static_cast<std::ptrdiff_t>(cum.size()) - 1)));
    }
    return out;
}

std::vector<SyntheticReplicate> synthesize(const SynthesisPlan& plan,
                                           const CategoricalChain& categorical,
                                           const IntensityChain& intensity,
                                           const MarkChain& marks, long n_total,
                                           const SpatialDomain& domain) {
    const int K = intensity.K;
    if (plan.L < 1) throw ValidationError("synthesize: L must be at least 1");
    if (static_cast<int>(plan.pool.locations.size()) < plan.min_pool)
        throw ValidationError("synthesize: candidate pool smaller than the configured minimum (" +
                              std::to_string(plan.pool.locations.size()) + " < " +
                              std::to_string(plan.min_pool) + ")");
    if (static_cast<int>(plan.draw_indices.size()) != plan.L)
        throw ValidationError("synthesize: draw_indices length differs from L");
    const int retained = static_cast<int>(
        std::min({categorical.theta_draws.size(), intensity.draws.size(), marks.draws.size()}));
    for (int idx : plan.draw_indices)
        if (idx < 0 || idx >= retained)
            throw ValidationError("synthesize: draw index outside the retained chain draws");
    if (marks.K != K || static_cast<int>(categorical.theta_draws.front().size()) != K)
        throw ValidationError("synthesize: chains disagree on K");
    for (const auto& p : plan.pool.locations)
        if (!domain.contains(p))
            throw ValidationError("synthesize: candidate location outside the domain");
    if (!plan.pool.cov_lambda.empty() &&
        plan.pool.cov_lambda.size() != plan.pool.locations.size())
        throw ValidationError("synthesize: pool covariate rows do not match locations");
    const std::size_t p_mark = static_cast<std::size_t>(marks.p);
    if (p_mark > 1 && plan.pool.cov_mark.empty())
        throw ValidationError("synthesize: mark model uses covariates but the pool has none");

    // projections over the pool, one per kernel
    const auto pool_span = std::span<const Point>(plan.pool.locations);
    const Eigen::MatrixXd proj_pool_lambda = PPProjection::build(pool_span, intensity.km).proj;
    const PPProjection pp_mark =
        PPProjection::build(pool_span, marks.km, marks.config.resid_floor);

    const std::vector<double> intercept{1.0};

    std::vector<SyntheticReplicate> reps;
    reps.reserve(static_cast<std::size_t>(plan.L));
    for (int l = 0; l < plan.L; ++l) {
        const int idx = plan.draw_indices[static_cast<std::size_t>(l)];
        Rng rng = Rng::stream(plan.seed, "replicate/" + std::to_string(idx));
        const auto& theta = categorical.theta_draws[static_cast<std::size_t>(idx)];
        const auto& int_draw = intensity.draws[static_cast<std::size_t>(idx)];
        const auto& mark_draw = marks.draws[static_cast<std::size_t>(idx)];

        SyntheticReplicate rep;
        rep.replicate_id = l + 1;
        rep.counts = draw_counts(theta, n_total, rng);
        rep.records.reserve(static_cast<std::size_t>(n_total));

        for (int k = 0; k < K; ++k) {
            const long nk = rep.counts[static_cast<std::size_t>(k)];
            if (nk == 0) continue;
            // intensity at every candidate for this (draw, combination)
            const Eigen::VectorXd w_lambda = int_draw.w_star.row(k).transpose();
            std::vector<double> lambda(plan.pool.locations.size());
            for (std::size_t j = 0; j < lambda.size(); ++j) {
                double lin = int_draw.beta(k, 0);
                lin += proj_pool_lambda.row(static_cast<Eigen::Index>(j)).dot(w_lambda);
                lambda[j] = std::exp(std::min(lin, intensity.config.log_cap));
            }
            const auto picks = draw_locations(lambda, nk, rng);
            const Eigen::VectorXd w_mark = mark_draw.w_star.row(k).transpose();
            for (const auto j : picks) {
                Record rec;
                rec.loc = plan.pool.locations[j];
                rec.combo = k + 1;
                rec.cov_lambda =
                    plan.pool.cov_lambda.empty() ? intercept : plan.pool.cov_lambda[j];
                rec.cov_mark = plan.pool.cov_mark.empty() ? intercept : plan.pool.cov_mark[j];
                const double proj_mean =
                    pp_mark.proj.row(static_cast<Eigen::Index>(j)).dot(w_mark);
                rec.mark = draw_mark_at(marks, mark_draw, k, proj_mean,
                                        pp_mark.resid_var[static_cast<Eigen::Index>(j)],
                                        rec.cov_mark, rng);
                rep.records.push_back(std::move(rec));
            }
        }
        reps.push_back(std::move(rep));
    }
    return reps;
}

} // namespace geosynth
