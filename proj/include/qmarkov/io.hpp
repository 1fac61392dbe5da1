// Serialization for the command-line front end: CSV tables with round-trip
// number formatting, complex matrices as JSON, and staged output files that
// appear only when a command succeeds.

#pragma once

#include "qmarkov/algebra.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qmarkov::io {

using json = nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// {"rows": R, "cols": C, "data": [[re, im], ...]} in row-major order.
inline json matrix_to_json(const CMatrix& m) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back({m(r, c).real(), m(r, c).imag()});
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline CMatrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw std::invalid_argument("matrix json: wrong size");
    CMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& e = data.at(static_cast<std::size_t>(r * cols + c));
            m(r, c) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
        }
    return m;
}

/// A table cell: number, missing value, or text.
using Cell = std::variant<double, std::monostate, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != header.size()) throw std::logic_error("table row has the wrong width");
        rows.push_back(std::move(row));
    }
};

inline Cell opt_cell(const std::optional<double>& v) { return v ? Cell{*v} : Cell{std::monostate{}}; }

inline std::string to_csv(const Table& t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ',';
            if (const auto* d = std::get_if<double>(&row[i])) os << format_double(*d);
            else if (const auto* s = std::get_if<std::string>(&row[i])) os << *s;
        }
        os << '\n';
    }
    return os.str();
}

inline std::string to_json(const Table& t) {
    json arr = json::array();
    for (const auto& row : t.rows) {
        json obj = json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (const auto* d = std::get_if<double>(&row[i])) obj[t.header[i]] = *d;
            else if (const auto* s = std::get_if<std::string>(&row[i])) obj[t.header[i]] = *s;
            else obj[t.header[i]] = nullptr;
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

/// Files written through this object go to temporaries first and are renamed
/// into place by commit(). Anything not committed is removed on destruction.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    ~OutputSet() {
        std::error_code ec;
        for (const auto& [tmp, dst] : staged_) std::filesystem::remove(tmp, ec);
        for (const auto& dst : committed_partial_) std::filesystem::remove(dst, ec);
    }

    std::filesystem::path write(const std::string& name, const std::string& content) {
        std::filesystem::create_directories(dir_);
        const auto dst = dir_ / name;
        const auto tmp = dir_ / ("." + name + ".tmp");
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os) throw std::runtime_error("cannot write " + tmp.string());
            os << content;
            if (!os) throw std::runtime_error("write failed: " + tmp.string());
        }
        staged_.emplace_back(tmp, dst);
        return dst;
    }

    void commit() {
        for (const auto& [tmp, dst] : staged_) {
            std::filesystem::rename(tmp, dst);
            committed_partial_.push_back(dst);
        }
        staged_.clear();
        committed_partial_.clear();
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
    std::vector<std::filesystem::path> committed_partial_;  // renamed before a failure inside commit()
};

}  // namespace qmarkov::io
