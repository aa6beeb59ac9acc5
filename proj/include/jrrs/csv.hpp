#pragma once
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>
#include <jrrs/linalg.hpp>

namespace jrrs::csv {

/// Numeric table read from a comma-delimited file; header is empty when the file has none.
struct Table
{
    Matrix data;
    std::vector<std::string> header;
};

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view cell, double& out)
{
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto* end = cell.data() + cell.size();
    const auto res = std::from_chars(cell.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}

/// Parses CSV text. The first line is taken as a header when any of its cells is not a number.
/// Errors carry 1-based line and column numbers.
inline Table parse(std::istream& in, const std::string& source = "<input>")
{
    Table t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (first) {
            first = false;
            width = cells.size();
            double tmp;
            bool numeric = true;
            for (auto c : cells) numeric = numeric && parse_double(c, tmp);
            if (!numeric) {
                for (auto c : cells) t.header.emplace_back(c);
                continue;
            }
        }
        if (cells.size() != width) {
            throw InvalidInput(source + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size())
                               + " fields, expected " + std::to_string(width));
        }
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            if (!parse_double(cells[j], row[j]) || !std::isfinite(row[j])) {
                throw InvalidInput(source + ": line " + std::to_string(lineno) + ", column " + std::to_string(j + 1)
                                   + ": not a finite number: '" + std::string(cells[j]) + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInput(source + ": no numeric rows");
    t.data.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) t.data(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return t;
}

inline Table read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return parse(in, path);
}

inline std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write(std::ostream& out, const Matrix& M, const std::vector<std::string>& header = {})
{
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
        out << '\n';
    }
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format_double(M(i, j));
        out << '\n';
    }
}

} // namespace jrrs::csv
