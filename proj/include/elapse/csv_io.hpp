#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/rate_model.hpp>

namespace elapse {

/// Floats are written with 17 significant digits so regression baselines are
/// bit-stable.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Comma-separated, header row, UNIX newlines, column-major data.
inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size())
        throw invalid_argument_error("write_csv: header/column count mismatch");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != rows)
            throw invalid_argument_error("write_csv: ragged columns");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw numeric_error("write_csv: cannot open " + path.string());
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << "\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << (c ? "," : "") << format_double(columns[c][r]);
        out << "\n";
    }
    if (!out) throw numeric_error("write_csv: write failed for " + path.string());
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw invalid_argument_error("read_csv: cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        throw invalid_argument_error("read_csv: empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    t.columns.resize(t.header.size());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c >= t.columns.size())
                throw invalid_argument_error("read_csv: extra column at line " +
                                             std::to_string(lineno));
            try {
                t.columns[c].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw invalid_argument_error("read_csv: bad number '" + cell +
                                             "' at line " + std::to_string(lineno));
            }
            ++c;
        }
        if (c != t.columns.size())
            throw invalid_argument_error("read_csv: short row at line " +
                                         std::to_string(lineno));
    }
    return t;
}

/// Rate table layout: first row lists the age knots (corner cell ignored),
/// first column lists the activity knots, body holds r(x, I).
inline RateModel load_tabulated_rate(const std::filesystem::path& path,
                                     bool inhibitory) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw invalid_argument_error("load_tabulated_rate: cannot open " +
                                     path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.emplace_back();
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) rows.back().push_back(cell);
    }
    if (rows.size() < 3 || rows.front().size() < 3)
        throw invalid_argument_error("load_tabulated_rate: need at least 2x2 values");
    const std::size_t nx = rows.front().size() - 1;
    const std::size_t ni = rows.size() - 1;
    auto num = [&](const std::string& s) {
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            throw invalid_argument_error("load_tabulated_rate: bad number '" + s + "'");
        }
    };
    std::vector<double> x_knots(nx), i_knots(ni);
    for (std::size_t k = 0; k < nx; ++k) x_knots[k] = num(rows[0][k + 1]);
    std::vector<std::vector<double>> values(nx, std::vector<double>(ni));
    for (std::size_t r = 0; r < ni; ++r) {
        if (rows[r + 1].size() != nx + 1)
            throw invalid_argument_error("load_tabulated_rate: ragged row");
        i_knots[r] = num(rows[r + 1][0]);
        for (std::size_t c = 0; c < nx; ++c) values[c][r] = num(rows[r + 1][c + 1]);
    }
    return RateModel::tabulated(std::move(x_knots), std::move(i_knots),
                                std::move(values), inhibitory);
}

/// Two-column (x, value) file matched against a grid.
inline std::vector<double> load_grid_column(const std::filesystem::path& path,
                                            const Grid& g) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() != 2)
        throw invalid_argument_error("load_grid_column: expected 2 columns in " +
                                     path.string());
    if (t.columns[0].size() != g.n_nodes())
        throw invalid_argument_error("load_grid_column: row count does not match grid");
    for (std::size_t j = 0; j < g.n_nodes(); ++j)
        if (std::fabs(t.columns[0][j] - g.node(j)) > 1e-9 * (1.0 + g.node(j)))
            throw invalid_argument_error("load_grid_column: x column does not match grid");
    return t.columns[1];
}

} // namespace elapse
