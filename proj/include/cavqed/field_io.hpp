#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "photonics.hpp"

namespace cavqed {

// Binary field container: one line of JSON header, '\n', then little-endian
// float64 payload in this order: x axis, y axis, z axis, eps (nx*ny*nz),
// E as (ReEx, ImEx, ReEy, ImEy, ReEz, ImEz) per sample. Samples row-major,
// z fastest.
//
// header: {"format": "cavqed-field", "version": 1, "shape": [nx, ny, nz],
//          "length_unit": "m" | "um" | "nm", "complex_layout": "interleaved",
//          "eps_layout": "scalar"}
//
// CSV fallback: x,y,z,eps,ReEx,ImEx,ReEy,ImEy,ReEz,ImEz (metres), one row
// per grid point, any order; '#' lines and a non-numeric header are skipped.

namespace detail {

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return s;
}

inline double length_scale(const std::string& unit)
{
    if (unit == "m") return 1.0;
    if (unit == "um") return 1e-6;
    if (unit == "nm") return 1e-9;
    throw ConfigError("unknown length unit '" + unit + "'");
}

inline bool little_endian()
{
    const std::uint16_t probe = 1;
    unsigned char b = 0;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

inline double load_f64(const std::string& buf, std::size_t offset)
{
    unsigned char raw[8];
    std::memcpy(raw, buf.data() + offset, 8);
    if (!little_endian()) std::reverse(raw, raw + 8);
    double v;
    std::memcpy(&v, raw, 8);
    return v;
}

inline void store_f64(std::string& buf, double v)
{
    unsigned char raw[8];
    std::memcpy(raw, &v, 8);
    if (!little_endian()) std::reverse(raw, raw + 8);
    buf.append(reinterpret_cast<const char*>(raw), 8);
}

/// Splits a CSV line into doubles; returns false if any field is not numeric.
inline bool parse_numbers(const std::string& line, std::vector<double>& out)
{
    out.clear();
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::string field = line.substr(pos, end - pos);
        field.erase(0, field.find_first_not_of(" \t\r"));
        field.erase(field.find_last_not_of(" \t\r") + 1);
        if (field.empty()) return false;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(field, &used));
            if (used != field.size()) return false;
        } catch (const std::exception&) {
            return false;
        }
        pos = end + 1;
    }
    return true;
}

struct CsvRow {
    std::size_t offset;
    std::vector<double> values;
};

/// Numeric rows of a CSV text. The first non-comment row may be a header.
inline std::vector<CsvRow> read_csv_rows(const std::string& text, const std::string& what)
{
    std::vector<CsvRow> rows;
    std::size_t pos = 0;
    bool first = true;
    std::vector<double> vals;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto nb = line.find_first_not_of(" \t");
        if (nb != std::string::npos && line[nb] != '#') {
            if (parse_numbers(line, vals)) {
                rows.push_back({pos, vals});
            } else if (!first) {
                throw IoError(what + ": malformed row at byte offset " + std::to_string(pos));
            }
            first = false;
        }
        pos = end + 1;
    }
    return rows;
}

inline std::vector<double> unique_sorted(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline FieldGrid parse_field_csv(const std::string& text)
{
    const auto rows = read_csv_rows(text, "field csv");
    if (rows.empty()) throw IoError("field csv: no data rows");
    std::array<std::vector<double>, 3> coords;
    for (const auto& r : rows) {
        if (r.values.size() != 10)
            throw IoError("field csv: expected 10 columns at byte offset " + std::to_string(r.offset) + ", found " +
                          std::to_string(r.values.size()));
        for (std::size_t d = 0; d < 3; ++d) coords[d].push_back(r.values[d]);
    }
    FieldGrid g;
    for (std::size_t d = 0; d < 3; ++d) g.axes[d] = unique_sorted(coords[d]);
    if (g.size() != rows.size())
        throw IoError("field csv: " + std::to_string(rows.size()) + " rows do not form a full " +
                      std::to_string(g.nx()) + "x" + std::to_string(g.ny()) + "x" + std::to_string(g.nz()) + " grid");
    g.epsilon.assign(g.size(), 0.0);
    g.e_field.assign(g.size(), CVec3{});
    std::vector<char> seen(g.size(), 0);
    auto at = [](const std::vector<double>& ax, double v) {
        return static_cast<std::size_t>(std::lower_bound(ax.begin(), ax.end(), v) - ax.begin());
    };
    for (const auto& r : rows) {
        const std::size_t n = g.index(at(g.axes[0], r.values[0]), at(g.axes[1], r.values[1]), at(g.axes[2], r.values[2]));
        if (seen[n]) throw IoError("field csv: duplicate grid point at byte offset " + std::to_string(r.offset));
        seen[n] = 1;
        if (!(r.values[3] >= 1.0))
            throw IoError("field csv: eps < 1 at byte offset " + std::to_string(r.offset));
        g.epsilon[n] = r.values[3];
        for (std::size_t c = 0; c < 3; ++c) g.e_field[n][c] = cplx(r.values[4 + 2 * c], r.values[5 + 2 * c]);
    }
    return g;
}

inline FieldGrid parse_field_binary(const std::string& buf)
{
    const std::size_t nl = buf.find('\n');
    if (nl == std::string::npos) throw IoError("field file: header line not terminated (byte offset 0)");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(buf.substr(0, nl));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("field file: bad JSON header at byte offset " + std::to_string(e.byte) + ": " + e.what());
    }
    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!h.contains(key)) throw IoError(std::string("field file header: missing '") + key + "'");
        return h.at(key);
    };
    if (need("format") != "cavqed-field") throw IoError("field file header: format must be 'cavqed-field'");
    if (need("version") != 1) throw IoError("field file header: unsupported version");
    if (h.value("complex_layout", "interleaved") != "interleaved")
        throw IoError("field file header: only interleaved complex layout is supported");
    if (h.value("eps_layout", "scalar") != "scalar")
        throw IoError("field file header: only scalar eps layout is supported");
    const auto& shape = need("shape");
    if (!shape.is_array() || shape.size() != 3) throw IoError("field file header: shape must be [nx, ny, nz]");
    std::array<std::size_t, 3> dims{};
    for (std::size_t d = 0; d < 3; ++d) {
        if (!shape[d].is_number_unsigned() || shape[d].get<std::size_t>() < 2)
            throw IoError("field file header: shape entries must be integers >= 2");
        dims[d] = shape[d].get<std::size_t>();
    }
    const double scale = length_scale(h.value("length_unit", std::string("m")));
    const std::size_t cells = dims[0] * dims[1] * dims[2];
    const std::size_t count = dims[0] + dims[1] + dims[2] + 7 * cells;
    const std::size_t start = nl + 1;
    const std::size_t have = buf.size() - start;
    if (have != 8 * count)
        throw IoError("field file: payload starting at byte offset " + std::to_string(start) + " has " +
                      std::to_string(have) + " bytes, expected " + std::to_string(8 * count));
    std::size_t off = start;
    FieldGrid g;
    for (std::size_t d = 0; d < 3; ++d) {
        g.axes[d].resize(dims[d]);
        for (auto& x : g.axes[d]) {
            x = scale * load_f64(buf, off);
            off += 8;
        }
        for (std::size_t k = 1; k < dims[d]; ++k)
            if (!(g.axes[d][k] > g.axes[d][k - 1]))
                throw IoError("field file: axis " + std::to_string(d) + " not increasing near byte offset " +
                              std::to_string(off - 8 * (dims[d] - k)));
    }
    g.epsilon.resize(cells);
    for (auto& e : g.epsilon) {
        e = load_f64(buf, off);
        if (!(e >= 1.0)) throw IoError("field file: eps < 1 at byte offset " + std::to_string(off));
        off += 8;
    }
    g.e_field.resize(cells);
    for (auto& v : g.e_field)
        for (auto& c : v) {
            const double re = load_f64(buf, off);
            const double im = load_f64(buf, off + 8);
            if (!std::isfinite(re) || !std::isfinite(im))
                throw IoError("field file: non-finite field at byte offset " + std::to_string(off));
            c = cplx(re, im);
            off += 16;
        }
    return g;
}

} // namespace detail

/// Loads a field grid, picking the binary container when the file starts
/// with '{' and the CSV reader otherwise.
inline FieldGrid load_field_grid(const std::string& path)
{
    const std::string buf = detail::read_file(path);
    const auto first = buf.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw IoError("field file '" + path + "' is empty");
    FieldGrid g = buf[first] == '{' ? detail::parse_field_binary(buf) : detail::parse_field_csv(buf);
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("field file '") + path + "': " + e.what());
    }
    return g;
}

inline std::string encode_field_grid(const FieldGrid& g)
{
    nlohmann::json h{{"format", "cavqed-field"},
                     {"version", 1},
                     {"shape", {g.nx(), g.ny(), g.nz()}},
                     {"length_unit", "m"},
                     {"complex_layout", "interleaved"},
                     {"eps_layout", "scalar"}};
    std::string buf = h.dump() + "\n";
    for (const auto& ax : g.axes)
        for (double x : ax) detail::store_f64(buf, x);
    for (double e : g.epsilon) detail::store_f64(buf, e);
    for (const auto& v : g.e_field)
        for (const auto& c : v) {
            detail::store_f64(buf, c.real());
            detail::store_f64(buf, c.imag());
        }
    return buf;
}

inline void save_field_grid(const FieldGrid& g, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    const std::string buf = encode_field_grid(g);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failure on '" + path + "'");
}

struct Ringdown {
    CVector samples;
    double dt = 0.0; ///< from the time column; 0 if there is only one row
};

/// Ringdown CSV: (time, Re) or (time, Re, Im), uniformly sampled.
inline Ringdown load_ringdown(const std::string& path)
{
    const auto rows = detail::read_csv_rows(detail::read_file(path), "signal csv");
    if (rows.empty()) throw IoError("signal csv '" + path + "': no data rows");
    Ringdown r;
    r.samples.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& v = rows[k].values;
        if (v.size() != 2 && v.size() != 3)
            throw IoError("signal csv: expected 2 or 3 columns at byte offset " + std::to_string(rows[k].offset));
        r.samples(static_cast<Eigen::Index>(k)) = cplx(v[1], v.size() == 3 ? v[2] : 0.0);
    }
    if (rows.size() > 1) {
        r.dt = rows[1].values[0] - rows[0].values[0];
        for (std::size_t k = 1; k < rows.size(); ++k) {
            const double d = rows[k].values[0] - rows[k - 1].values[0];
            if (!(std::abs(d - r.dt) <= 1e-6 * std::abs(r.dt)))
                throw IoError("signal csv: non-uniform time step at byte offset " + std::to_string(rows[k].offset));
        }
    }
    return r;
}

/// Two-column spectrum CSV (frequency_THz, power); omega returned in rad/s.
inline SampledSpectrum load_spectrum(const std::string& path)
{
    const auto rows = detail::read_csv_rows(detail::read_file(path), "spectrum csv");
    SampledSpectrum s;
    for (const auto& r : rows) {
        if (r.values.size() != 2)
            throw IoError("spectrum csv: expected 2 columns at byte offset " + std::to_string(r.offset));
        s.omega.push_back(units::two_pi * units::THz * r.values[0]);
        s.power.push_back(r.values[1]);
    }
    std::vector<std::size_t> order(s.omega.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.omega[a] < s.omega[b]; });
    SampledSpectrum sorted;
    for (std::size_t k : order) {
        sorted.omega.push_back(s.omega[k]);
        sorted.power.push_back(s.power[k]);
    }
    return sorted;
}

} // namespace cavqed
