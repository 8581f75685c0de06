#pragma once
// Shared helpers for the test suites.

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "geosynth/mathutil.hpp"

namespace testutil {

template <typename A, typename B>
bool exact_equal(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (a(i, j) != b(i, j)) return false;
    return true;
}

// Pearson chi-square statistic against expected counts (> 0 each).
inline double chisq_stat(const std::vector<double>& observed,
                         const std::vector<double>& expected) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    return stat;
}

// true when the GOF test does NOT reject at the given level
inline bool gof_not_rejected(const std::vector<double>& observed,
                             const std::vector<double>& expected, double level) {
    const double stat = chisq_stat(observed, expected);
    const double df = static_cast<double>(observed.size()) - 1.0;
    return geosynth::chisq_sf(stat, df) > level;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = std::string("geosynth_test_") + name;
    }
    ~TempFile() { std::remove(path.c_str()); }
    void write(const std::string& contents) const {
        std::ofstream out(path);
        out << contents;
    }
    std::string read() const {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    }
};

} // namespace testutil
