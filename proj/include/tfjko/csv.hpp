// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_CSV_HPP
#define TFJKO_CSV_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "density.hpp"

namespace tfjko
{

class CsvTable
{
public:
    explicit CsvTable(std::vector<std::string> header)
        : header_(std::move(header))
    {
    }

    void add(const std::vector<double>& row)
    {
        if (row.size() != header_.size())
            throw InputError("row width does not match the header");
        std::vector<std::string> cells;
        for (double v : row)
            cells.push_back(fmt17(v));
        rows_.push_back(std::move(cells));
    }

    void add_cells(std::vector<std::string> cells)
    {
        if (cells.size() != header_.size())
            throw InputError("row width does not match the header");
        rows_.push_back(std::move(cells));
    }

    std::size_t size() const { return rows_.size(); }

    std::string str() const
    {
        std::string s;
        auto line = [&](const std::vector<std::string>& c) {
            for (std::size_t i = 0; i < c.size(); ++i)
                s += (i ? "," : "") + c[i];
            s += '\n';
        };
        line(header_);
        for (const auto& r : rows_)
            line(r);
        return s;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Writes through a sibling temporary and renames it into place.
inline void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out)
            throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot move output into place at " + path);
    }
}

inline void write_csv(const std::string& path, const CsvTable& t) { write_atomic(path, t.str()); }

inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                          const std::vector<std::string>& header)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line))
        throw InputError(path + ": empty file");
    std::vector<std::string> got;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            got.push_back(cell);
    }
    if (!got.empty() && !got.back().empty() && got.back().back() == '\r')
        got.back().pop_back();
    if (got != header)
        throw InputError(path + ": unexpected header");
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw InputError(path + ":" + std::to_string(lineno) + ": not a number");
            }
            row.push_back(v);
        }
        if (row.size() != header.size())
            throw InputError(path + ":" + std::to_string(lineno) + ": wrong column count");
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_density(const std::string& path, const GridDensity& rho)
{
    CsvTable t({"x", "rho"});
    for (std::size_t i = 0; i < rho.size(); ++i)
        t.add({rho.xs()[i], rho.vals()[i]});
    write_csv(path, t);
}

inline GridDensity read_density(const std::string& path)
{
    auto rows = read_numeric_csv(path, {"x", "rho"});
    std::vector<double> x, v;
    for (const auto& r : rows) {
        x.push_back(r[0]);
        v.push_back(r[1]);
    }
    return GridDensity(std::move(x), std::move(v));
}

inline void write_quantiles(const std::string& path, const QuantilePoints& q)
{
    CsvTable t({"i", "z"});
    for (std::size_t i = 0; i < q.size(); ++i)
        t.add_cells({std::to_string(i), fmt17(q.z()[i])});
    write_csv(path, t);
}

inline QuantilePoints read_quantiles(const std::string& path)
{
    auto rows = read_numeric_csv(path, {"i", "z"});
    std::vector<double> z;
    for (const auto& r : rows)
        z.push_back(r[1]);
    return QuantilePoints(std::move(z));
}

} // namespace tfjko

#endif
