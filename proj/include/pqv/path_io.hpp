#pragma once

// Binary path files ("PQV1", little-endian) and CSV export `t,x1..xd`.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pqv/paths.hpp"
#include "pqv/table_io.hpp"

namespace pqv::io {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "binary path I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > data_.size()) throw ParameterError("truncated path file");
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string bytes(std::size_t n) {
        if (pos_ + n > data_.size()) throw ParameterError("truncated path file");
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    const std::string& data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_path(const SampledPath& x) {
    std::string out = "PQV1";
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(x.level()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(x.dim()));
    detail::put<double>(out, x.horizon());
    detail::put<std::uint64_t>(out, x.meta().seed);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(x.meta().kind));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(x.meta().params.size()));
    for (const auto& [name, value] : x.meta().params) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put<double>(out, value);
    }
    for (double v : x.samples()) detail::put<double>(out, v);
    return out;
}

inline SampledPath decode_path(const std::string& data) {
    detail::Reader r(data);
    if (r.bytes(4) != "PQV1") throw ParameterError("not a PQV1 path file");
    const auto level = r.get<std::uint32_t>();
    const auto dim = r.get<std::uint32_t>();
    const auto horizon = r.get<double>();
    PathMeta meta;
    meta.seed = r.get<std::uint64_t>();
    meta.kind = path_kind_from_code(r.get<std::uint32_t>());
    const auto nparams = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < nparams; ++i) {
        const auto len = r.get<std::uint32_t>();
        std::string name = r.bytes(len);
        meta.params[name] = r.get<double>();
    }
    if (level > 28) throw ParameterError("path file level out of range");
    const std::size_t n = ((std::size_t{1} << level) + 1) * dim;
    std::vector<double> samples(n);
    for (auto& s : samples) s = r.get<double>();
    if (!r.at_end()) throw ParameterError("trailing bytes in path file");
    return SampledPath(Grid{static_cast<int>(level), horizon, 0.0}, dim, std::move(samples),
                       std::move(meta));
}

inline void save_path(const SampledPath& x, const std::string& file) {
    std::ofstream f(file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + file + "' for writing");
    const auto bytes = encode_path(x);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for '" + file + "'");
}

inline SampledPath load_path(const std::string& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + file + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return decode_path(ss.str());
}

inline CsvWriter path_table(const SampledPath& x) {
    std::vector<std::string> header{"t"};
    for (std::size_t c = 1; c <= x.dim(); ++c) header.push_back("x" + std::to_string(c));
    CsvWriter w(std::move(header));
    std::vector<double> row(x.dim() + 1);
    for (std::size_t j = 0; j < x.points(); ++j) {
        row[0] = x.grid().time(j);
        for (std::size_t c = 0; c < x.dim(); ++c) row[c + 1] = x.value(j, c);
        w.row_values(row);
    }
    return w;
}

}  // namespace pqv::io
