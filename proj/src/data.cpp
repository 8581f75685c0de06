#include "geosynth/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace geosynth {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, delim)) {
        // trim surrounding whitespace and CR
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& col, std::size_t row) {
    double v{};
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ValidationError("row " + std::to_string(row) + ": non-numeric value '" + s +
                              "' in column '" + col + "'");
    return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

struct RawRow {
    Point loc;
    int combo;
    double mark;
    std::vector<double> cov_lambda;
    std::vector<double> cov_mark;
};

std::vector<RawRow> read_rows(const std::string& path, const CsvSchema& schema, int K) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty data file: " + path);
    const auto header = split_line(line, schema.delimiter);

    const auto ix = column_index(header, schema.x);
    const auto iy = column_index(header, schema.y);
    const auto ic = column_index(header, schema.combo);
    const auto im = column_index(header, schema.mark);
    std::vector<std::size_t> il, iq;
    for (const auto& c : schema.cov_lambda) il.push_back(column_index(header, c));
    for (const auto& c : schema.cov_mark) iq.push_back(column_index(header, c));

    std::vector<RawRow> rows;
    std::size_t r = 1;
    while (std::getline(in, line)) {
        ++r;
        if (line.empty()) continue;
        const auto f = split_line(line, schema.delimiter);
        if (f.size() != header.size())
            throw ValidationError("row " + std::to_string(r) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(f.size()));
        RawRow row;
        row.loc.x = parse_double(f[ix], schema.x, r);
        row.loc.y = parse_double(f[iy], schema.y, r);
        const double cv = parse_double(f[ic], schema.combo, r);
        if (cv != std::floor(cv))
            throw ValidationError("row " + std::to_string(r) + ": combo must be an integer");
        row.combo = static_cast<int>(cv);
        if (row.combo < 1 || row.combo > K)
            throw ValidationError("row " + std::to_string(r) + ": combo " +
                                  std::to_string(row.combo) + " outside [1.." +
                                  std::to_string(K) + "]");
        row.mark = parse_double(f[im], schema.mark, r);
        row.cov_lambda.push_back(1.0);
        for (auto j : il) row.cov_lambda.push_back(parse_double(f[j], "covariate", r));
        row.cov_mark.push_back(1.0);
        for (auto j : iq) row.cov_mark.push_back(parse_double(f[j], "covariate", r));
        rows.push_back(std::move(row));
    }
    return rows;
}

Dataset assemble(std::vector<RawRow> rows, int K, const AffineMap& map,
                 const SpatialDomain& domain) {
    Dataset ds;
    ds.domain = domain;
    ds.K = K;
    ds.source_map = map;
    ds.counts.assign(static_cast<std::size_t>(K), 0);
    ds.records.reserve(rows.size());
    for (auto& row : rows) {
        Record rec;
        rec.loc = map.forward(row.loc);
        if (!domain.contains(rec.loc))
            throw ValidationError("location (" + std::to_string(row.loc.x) + ", " +
                                  std::to_string(row.loc.y) + ") outside the domain bounds");
        rec.combo = row.combo;
        rec.mark = row.mark;
        rec.cov_lambda = std::move(row.cov_lambda);
        rec.cov_mark = std::move(row.cov_mark);
        ds.counts[static_cast<std::size_t>(rec.combo - 1)]++;
        ds.records.push_back(std::move(rec));
    }
    ds.validate();
    return ds;
}

} // namespace

void Dataset::validate() const {
    domain.validate();
    if (K < 1) throw ValidationError("dataset: K must be at least 1");
    if (counts.size() != static_cast<std::size_t>(K))
        throw ValidationError("dataset: counts vector length differs from K");
    std::vector<long> recount(static_cast<std::size_t>(K), 0);
    std::size_t p_lambda = 0, p_mark = 0;
    for (const auto& rec : records) {
        if (rec.combo < 1 || rec.combo > K)
            throw ValidationError("dataset: combo outside [1..K]");
        if (!domain.contains(rec.loc))
            throw ValidationError("dataset: record location outside domain");
        if (rec.cov_lambda.empty() || rec.cov_lambda.front() != 1.0 ||
            rec.cov_mark.empty() || rec.cov_mark.front() != 1.0)
            throw ValidationError("dataset: covariate vectors must start with the 1.0 intercept");
        if (p_lambda == 0) {
            p_lambda = rec.cov_lambda.size();
            p_mark = rec.cov_mark.size();
        } else if (rec.cov_lambda.size() != p_lambda || rec.cov_mark.size() != p_mark) {
            throw ValidationError("dataset: ragged covariate vectors");
        }
        recount[static_cast<std::size_t>(rec.combo - 1)]++;
    }
    for (int k = 0; k < K; ++k)
        if (recount[static_cast<std::size_t>(k)] != counts[static_cast<std::size_t>(k)])
            throw ValidationError("dataset: stored counts do not match records");
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema, int K, bool rescale,
                     const SpatialDomain& domain) {
    if (K < 1) throw ValidationError("load_dataset: K must be at least 1");
    auto rows = read_rows(path, schema, K);
    AffineMap map;
    SpatialDomain dom = domain;
    if (rescale) {
        if (rows.empty()) throw ValidationError("load_dataset: cannot rescale an empty file");
        double lox = rows.front().loc.x, hix = lox, loy = rows.front().loc.y, hiy = loy;
        for (const auto& r : rows) {
            lox = std::min(lox, r.loc.x);
            hix = std::max(hix, r.loc.x);
            loy = std::min(loy, r.loc.y);
            hiy = std::max(hiy, r.loc.y);
        }
        if (!(hix > lox) || !(hiy > loy))
            throw ValidationError("load_dataset: degenerate bounding box, cannot rescale");
        map.offset_x = lox;
        map.scale_x = 1.0 / (hix - lox);
        map.offset_y = loy;
        map.scale_y = 1.0 / (hiy - loy);
        dom = SpatialDomain{}; // unit square
    }
    return assemble(std::move(rows), K, map, dom);
}

Dataset load_dataset_with_map(const std::string& path, const CsvSchema& schema, int K,
                              const AffineMap& map, const SpatialDomain& domain) {
    auto rows = read_rows(path, schema, K);
    return assemble(std::move(rows), K, map, domain);
}

void save_dataset_csv(const std::string& path, const std::vector<Record>& records,
                      const CsvSchema& schema, const AffineMap& map) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << schema.x << schema.delimiter << schema.y << schema.delimiter << schema.combo
        << schema.delimiter << schema.mark;
    for (const auto& c : schema.cov_lambda) out << schema.delimiter << c;
    for (const auto& c : schema.cov_mark) out << schema.delimiter << c;
    out << '\n';
    for (const auto& rec : records) {
        const Point raw = map.inverse(rec.loc);
        out << format_double(raw.x) << schema.delimiter << format_double(raw.y)
            << schema.delimiter << rec.combo << schema.delimiter << format_double(rec.mark);
        for (std::size_t j = 1; j < rec.cov_lambda.size(); ++j)
            out << schema.delimiter << format_double(rec.cov_lambda[j]);
        for (std::size_t j = 1; j < rec.cov_mark.size(); ++j)
            out << schema.delimiter << format_double(rec.cov_mark[j]);
        out << '\n';
    }
    if (!out) throw ValidationError("write failed: " + path);
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::vector<double>> read_csv_columns(const std::string& path,
                                                  const std::vector<std::string>& columns,
                                                  char delimiter) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty data file: " + path);
    const auto header = split_line(line, delimiter);
    std::vector<std::size_t> idx;
    for (const auto& c : columns) idx.push_back(column_index(header, c));
    std::vector<std::vector<double>> out(columns.size());
    std::size_t r = 1;
    while (std::getline(in, line)) {
        ++r;
        if (line.empty()) continue;
        const auto f = split_line(line, delimiter);
        if (f.size() != header.size())
            throw ValidationError("row " + std::to_string(r) + ": ragged row");
        for (std::size_t j = 0; j < idx.size(); ++j)
            out[j].push_back(parse_double(f[idx[j]], columns[j], r));
    }
    return out;
}

std::pair<int, int> lattice_shape(int n) {
    if (n < 1) throw ValidationError("lattice_shape: n must be positive");
    int rows = 1;
    for (int d = 1; d * d <= n; ++d)
        if (n % d == 0) rows = d;
    return {rows, n / rows};
}

std::vector<Point> lattice_points(const SpatialDomain& domain, int n) {
    domain.validate();
    const auto [rows, cols] = lattice_shape(n);
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n));
    const double dx = domain.width() / static_cast<double>(cols);
    const double dy = domain.height() / static_cast<double>(rows);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            pts.push_back({domain.x0 + (static_cast<double>(c) + 0.5) * dx,
                           domain.y0 + (static_cast<double>(r) + 0.5) * dy});
    return pts;
}

} // namespace geosynth
