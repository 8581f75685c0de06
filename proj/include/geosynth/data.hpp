#pragma once
// Domain types and delimited-text ingestion.
//
// All types here are plain values, immutable by convention once built;
// they can be shared freely across threads.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "geosynth/errors.hpp"

namespace geosynth {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

// Axis-aligned study region. Default is the unit square.
struct SpatialDomain {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool contains(const Point& p) const {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
    void validate() const {
        if (!(width() > 0.0) || !(height() > 0.0))
            throw ValidationError("domain: bounds must have positive side lengths");
    }
};

// Per-axis affine transform applied to raw coordinates at ingestion:
// model_x = (raw_x - offset_x) * scale_x. Identity when no rescaling.
struct AffineMap {
    double offset_x = 0.0;
    double scale_x = 1.0;
    double offset_y = 0.0;
    double scale_y = 1.0;

    Point forward(const Point& p) const {
        return {(p.x - offset_x) * scale_x, (p.y - offset_y) * scale_y};
    }
    Point inverse(const Point& p) const {
        return {p.x / scale_x + offset_x, p.y / scale_y + offset_y};
    }
    bool is_identity() const {
        return offset_x == 0.0 && offset_y == 0.0 && scale_x == 1.0 && scale_y == 1.0;
    }
};

// One individual: location, categorical combination index (1..K),
// non-categorical mark, and covariate vectors (leading 1.0 intercept).
struct Record {
    Point loc;
    int combo = 1;
    double mark = 0.0;
    std::vector<double> cov_lambda{1.0};
    std::vector<double> cov_mark{1.0};
};

struct Dataset {
    std::vector<Record> records;
    SpatialDomain domain;
    int K = 0;
    std::vector<long> counts; // n_1..n_K
    AffineMap source_map;     // raw -> model coordinates

    long total() const {
        long n = 0;
        for (long c : counts) n += c;
        return n;
    }

    // Recomputes counts from records and checks every invariant.
    void validate() const;
};

struct SyntheticReplicate {
    std::vector<Record> records;
    int replicate_id = 0;        // 1..L
    std::vector<long> counts;    // n_dagger per combination
};

// Column mapping for delimited-text files.
struct CsvSchema {
    std::string x = "x";
    std::string y = "y";
    std::string combo = "combo";
    std::string mark = "mark";
    std::vector<std::string> cov_lambda; // extra intensity covariates (intercept implied)
    std::vector<std::string> cov_mark;   // extra mark covariates (intercept implied)
    char delimiter = ',';
};

// Reads a headered delimited file and returns a validated Dataset.
// When rescale is true the data bounding box is mapped onto the unit
// square and the affine map retained; otherwise `domain` is used as-is
// and out-of-bounds locations are an error.
Dataset load_dataset(const std::string& path, const CsvSchema& schema, int K,
                     bool rescale = true, const SpatialDomain& domain = SpatialDomain{});

// As load_dataset but applies a fixed, previously stored map instead of
// deriving one from the file's own bounding box.
Dataset load_dataset_with_map(const std::string& path, const CsvSchema& schema, int K,
                              const AffineMap& map, const SpatialDomain& domain);

void save_dataset_csv(const std::string& path, const std::vector<Record>& records,
                      const CsvSchema& schema, const AffineMap& map);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

// Numeric columns by name from a headered delimited file; every listed
// column must exist and parse.
std::vector<std::vector<double>> read_csv_columns(const std::string& path,
                                                  const std::vector<std::string>& columns,
                                                  char delimiter = ',');

// rows x cols with rows <= cols, rows the largest divisor of n <= sqrt(n)
std::pair<int, int> lattice_shape(int n);

// Cell centers of the lattice covering the domain (half-cell margin).
std::vector<Point> lattice_points(const SpatialDomain& domain, int n);

} // namespace geosynth
