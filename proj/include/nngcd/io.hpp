#ifndef NNGCD_IO_HPP
#define NNGCD_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nngcd/errors.hpp"
#include "nngcd/matrix.hpp"

// CSV matrices: one row per line, comma-separated decimal literals. A first
// line starting with '#' is a header and is skipped. Blank lines are ignored.

namespace nngcd::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view field, std::size_t line_no, const std::string& path) {
    field = trim(field);
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    if (!field.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed number '" + std::string(field) +
                              "'");
    }
    return value;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline DenseMatrix parse_matrix_csv(std::istream& in, const std::string& path = "<stream>") {
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            if (rows == 0) continue;
            throw ValidationError(path + ":" + std::to_string(line_no) + ": header line after data");
        }
        std::size_t fields = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            const auto field = body.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                   : comma - start);
            values.push_back(detail::parse_double(field, line_no, path));
            ++fields;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (rows == 0) {
            cols = fields;
        } else if (fields != cols) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                                  " fields, found " + std::to_string(fields));
        }
        ++rows;
    }
    return DenseMatrix(rows, cols, std::move(values));
}

inline DenseMatrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return parse_matrix_csv(in, path);
}

/// Alias kept for feature files, which are plain CSV matrices.
inline DenseMatrix load_features(const std::string& path) { return load_matrix(path); }

inline void write_matrix_csv(std::ostream& out, const DenseMatrix& m, const std::string& header = {}) {
    if (!header.empty()) out << '#' << header << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << detail::format_double(m(i, j));
        }
        out << '\n';
    }
}

inline void save_matrix(const std::string& path, const DenseMatrix& m, const std::string& header = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    write_matrix_csv(out, m, header);
}

/// Integer column (first column of a CSV file). Labels are non-negative ids.
inline std::vector<int> load_labels(const std::string& path) {
    const DenseMatrix m = load_matrix(path);
    std::vector<int> labels;
    labels.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double v = m(i, 0);
        if (v != std::floor(v) || v < 0) {
            throw ValidationError(path + ": row " + std::to_string(i + 1) + " is not a non-negative integer id");
        }
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

/// 0/1 flags from the given column of a CSV file.
inline std::vector<bool> load_mask(const std::string& path, std::size_t column = 0) {
    const DenseMatrix m = load_matrix(path);
    require(m.rows() == 0 || column < m.cols(), path + ": missing mask column " + std::to_string(column));
    std::vector<bool> mask;
    mask.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double v = m(i, column);
        if (v != 0.0 && v != 1.0) throw ValidationError(path + ": row " + std::to_string(i + 1) + " is not 0/1");
        mask.push_back(v == 1.0);
    }
    return mask;
}

inline void save_labels(const std::string& path, const std::vector<int>& labels, const std::string& header = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    if (!header.empty()) out << '#' << header << '\n';
    for (int v : labels) out << v << '\n';
}

inline void save_report(const std::string& path, const nlohmann::json& report) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << report.dump(2) << '\n';
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline nlohmann::json matrix_to_json(const DenseMatrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.storage()}};
}

inline DenseMatrix matrix_from_json(const nlohmann::json& j) {
    try {
        return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                           j.at("values").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("matrix json: ") + e.what());
    }
}

}  // namespace nngcd::io

#endif  // NNGCD_IO_HPP
