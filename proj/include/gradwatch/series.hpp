#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradwatch {

/// A T x d block of observations. Row t (1-based) lives at rescaled time t/T.
/// Immutable by convention once constructed; all entries must be finite.
struct TimeSeries {
    Eigen::MatrixXd values;           // T x d
    std::vector<std::string> labels;  // empty or one name per column

    Eigen::Index T() const { return values.rows(); }
    Eigen::Index d() const { return values.cols(); }
};

inline void validate(const TimeSeries& s) {
    if (s.values.rows() < 2) throw std::invalid_argument("TimeSeries: need T >= 2, got T = " + std::to_string(s.values.rows()));
    if (s.values.cols() < 1) throw std::invalid_argument("TimeSeries: need d >= 1");
    if (!s.values.allFinite()) throw std::invalid_argument("TimeSeries: non-finite entry");
    if (!s.labels.empty() && static_cast<Eigen::Index>(s.labels.size()) != s.values.cols())
        throw std::invalid_argument("TimeSeries: label count does not match column count");
}

inline TimeSeries make_series(Eigen::MatrixXd values, std::vector<std::string> labels = {}) {
    TimeSeries s{std::move(values), std::move(labels)};
    validate(s);
    return s;
}

/// Lag-embed a univariate series: row t of the output is
/// (Y_{t+p}, Y_{t+p-1}, ..., Y_t), giving a (T-p) x (p+1) series.
/// The first p rows are dropped; downstream grids use the embedded T.
inline TimeSeries embed_lags(const TimeSeries& s, int p) {
    if (s.d() != 1) throw std::invalid_argument("embed_lags: series must be univariate");
    if (p < 0) throw std::invalid_argument("embed_lags: p must be >= 0");
    if (p >= s.T()) throw std::invalid_argument("embed_lags: p = " + std::to_string(p) + " >= T = " + std::to_string(s.T()));
    const Eigen::Index n = s.T() - p;
    Eigen::MatrixXd out(n, p + 1);
    for (Eigen::Index t = 0; t < n; ++t)
        for (int l = 0; l <= p; ++l) out(t, l) = s.values(t + p - l, 0);
    return make_series(std::move(out));
}

/// Exact time reversal; an involution.
inline TimeSeries reverse_time(const TimeSeries& s) {
    TimeSeries out{s.values.colwise().reverse(), s.labels};
    return out;
}

struct CsvOptions {
    bool header = false;          // first row contains column names
    std::vector<int> columns;     // 0-based selection; empty = all columns
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    std::size_t b = raw.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        throw std::runtime_error("load_csv: blank cell at row " + std::to_string(row) + ", column " + std::to_string(col));
    std::size_t e = raw.find_last_not_of(" \t\r");
    std::string tok = raw.substr(b, e - b + 1);
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(v))
        throw std::runtime_error("load_csv: non-numeric cell '" + tok + "' at row " + std::to_string(row) + ", column " + std::to_string(col));
    return v;
}

}  // namespace detail

/// Load a comma-delimited numeric file. Row order is time order.
/// Malformed cells are hard errors reported with their row/column location.
inline TimeSeries load_csv(const std::string& path, const CsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open file '" + path + "'");

    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (lineno == 1 && opt.header) {
            for (auto& c : cells) labels.push_back(c);
            width = cells.size();
            continue;
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw std::runtime_error("load_csv: ragged row " + std::to_string(lineno) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) row[c] = detail::parse_cell(cells[c], lineno, c + 1);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_csv: no data rows in '" + path + "'");

    std::vector<int> cols = opt.columns;
    if (cols.empty())
        for (std::size_t c = 0; c < width; ++c) cols.push_back(static_cast<int>(c));
    for (int c : cols)
        if (c < 0 || static_cast<std::size_t>(c) >= width)
            throw std::runtime_error("load_csv: column index " + std::to_string(c) + " out of range");

    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][static_cast<std::size_t>(cols[c])];

    std::vector<std::string> sel_labels;
    if (!labels.empty())
        for (int c : cols) sel_labels.push_back(labels[static_cast<std::size_t>(c)]);
    return make_series(std::move(m), std::move(sel_labels));
}

/// Write with 17 significant digits so load_csv round-trips bit-exactly.
inline void write_csv(const TimeSeries& s, const std::string& path, bool header = false) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open file '" + path + "' for writing");
    if (header && !s.labels.empty()) {
        for (Eigen::Index c = 0; c < s.d(); ++c) out << (c ? "," : "") << s.labels[static_cast<std::size_t>(c)];
        out << "\n";
    }
    char buf[64];
    for (Eigen::Index t = 0; t < s.T(); ++t) {
        for (Eigen::Index c = 0; c < s.d(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", s.values(t, c));
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_csv: write failed for '" + path + "'");
}

}  // namespace gradwatch
