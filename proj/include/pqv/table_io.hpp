#pragma once

// Plain CSV tables: header row always present, doubles written with 17
// significant digits so that re-reading reproduces them exactly.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pqv/errors.hpp"

namespace pqv::io {

inline std::string format_double(double v) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    const std::vector<std::string>& header() const { return header_; }

    template <class... Cells>
    void row(const Cells&... cells) {
        std::string line;
        bool first = true;
        auto put = [&](const auto& c) {
            if (!first) line += ',';
            first = false;
            line += cell(c);
        };
        (put(cells), ...);
        lines_.push_back(std::move(line));
    }

    void row_values(const std::vector<double>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += format_double(cells[i]);
        }
        lines_.push_back(std::move(line));
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += '\n';
        for (const auto& l : lines_) {
            out += l;
            out += '\n';
        }
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
        f << str();
        if (!f) throw std::runtime_error("write failed for '" + path + "'");
    }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(float v) { return format_double(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }

    std::vector<std::string> header_;
    std::vector<std::string> lines_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParameterError("CSV column '" + name + "' not found");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("CSV is empty (no header row)");
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != t.header.size()) throw ParameterError("CSV row has wrong number of cells");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline CsvTable load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParameterError("not a number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParameterError("not an integer: '" + s + "'");
    return v;
}

}  // namespace pqv::io
