#pragma once
// Seeded random number streams with portable distributions.
//
// All variate generators are implemented on top of the raw mt19937_64
// output so that a given (seed, call sequence) produces the same draws
// on every platform. std::*_distribution is implementation-defined and
// must not be used anywhere in the library.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace geosynth {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(detail::splitmix64(seed)) {}

    // Independent substream keyed by a name, e.g. "intensity/k=3".
    static Rng stream(std::uint64_t seed, std::string_view tag) {
        return Rng(detail::splitmix64(seed ^ detail::fnv1a64(tag)));
    }

    std::uint64_t raw() { return gen_(); }

    // Uniform on [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1]; safe as a log() argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // One standard normal per call (Box-Muller, cosine branch).
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate = 1.0) { return -std::log(uniform_pos()) / rate; }

    // Gamma(shape, scale) via Marsaglia-Tsang; shape < 1 boosted.
    double gamma(double shape, double scale = 1.0) {
        if (!(shape > 0.0) || !(scale > 0.0))
            throw std::invalid_argument("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
        }
    }

    double chisq(double df) { return gamma(0.5 * df, 2.0); }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    // Exact Poisson: Knuth for small rates, gamma/binomial recursion above.
    long poisson(double rate) {
        if (rate < 0.0 || !std::isfinite(rate))
            throw std::invalid_argument("poisson: rate must be finite and nonnegative");
        long n = 0;
        while (rate > 30.0) {
            const long m = static_cast<long>(std::ceil(7.0 * rate / 8.0));
            const double x = gamma(static_cast<double>(m), 1.0);
            if (x <= rate) {
                n += m;
                rate -= x;
            } else {
                return n + binomial(m - 1, rate / x);
            }
        }
        const double limit = std::exp(-rate);
        double prod = uniform();
        long k = 0;
        while (prod > limit) {
            prod *= uniform();
            ++k;
        }
        return n + k;
    }

    // Exact binomial by inversion for small n*p, otherwise beta recursion.
    long binomial(long n, double p) {
        if (n < 0 || p < 0.0 || p > 1.0)
            throw std::invalid_argument("binomial: bad arguments");
        if (n == 0 || p == 0.0) return 0;
        if (p == 1.0) return n;
        if (p > 0.5) return n - binomial(n, 1.0 - p);
        if (static_cast<double>(n) * p < 30.0) {
            // inversion: count waiting times of a geometric walk
            long x = 0;
            double sum = 0.0;
            const double log1mp = std::log1p(-p);
            for (;;) {
                if (x >= n) return n;
                sum += std::log(uniform_pos()) / static_cast<double>(n - x);
                if (sum < log1mp) return x;
                ++x;
            }
        }
        const long i = static_cast<long>(1.0 + static_cast<double>(n) * p);
        const double b = beta(static_cast<double>(i), static_cast<double>(n - i + 1));
        if (b <= p) return i + binomial(n - i, (p - b) / (1.0 - b));
        return binomial(i - 1, p / b);
    }

    // Index draw proportional to weights (must be nonnegative, not all zero).
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
        const double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    std::vector<double> dirichlet(const std::vector<double>& alpha) {
        std::vector<double> out(alpha.size());
        double total = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            out[i] = gamma(alpha[i]);
            total += out[i];
        }
        if (total <= 0.0) throw std::runtime_error("dirichlet: degenerate draw");
        for (double& v : out) v /= total;
        return out;
    }

    // Multinomial counts via successive binomial splits; totals are exact.
    std::vector<long> multinomial(long n, const std::vector<double>& probs) {
        std::vector<long> counts(probs.size(), 0);
        double remaining = 1.0;
        long left = n;
        for (std::size_t k = 0; k + 1 < probs.size() && left > 0; ++k) {
            const double p = remaining > 0.0 ? std::min(1.0, probs[k] / remaining) : 0.0;
            const long c = binomial(left, p);
            counts[k] = c;
            left -= c;
            remaining -= probs[k];
        }
        if (!probs.empty()) counts[probs.size() - 1] += left;
        return counts;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace geosynth
