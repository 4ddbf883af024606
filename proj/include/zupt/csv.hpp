#pragma once

// CSV readers/writers for the on-disk formats:
//   IMU log        t,ax,ay,az,wx,wy,wz
//   positions      t,px,py,pz
//   labels         t,zv
// Malformed input raises Error(ErrorKind::parse) with "<file>:<line>: ...".

#include "zupt/core.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace zupt::csv {

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) fail("failed to format number");
    return std::string(buf.data(), end);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] inline void parse_error(const std::string& source, std::size_t line, const std::string& msg) {
    throw Error(ErrorKind::parse, source + ":" + std::to_string(line) + ": " + msg);
}

struct Table {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> lines;  // source line of each row
    std::size_t size() const { return rows.size(); }
    const std::vector<double>& operator[](std::size_t i) const { return rows[i]; }
    auto begin() const { return rows.begin(); }
    auto end() const { return rows.end(); }
};

/// Reads a CSV with an exact header and `expected.size()` numeric columns.
inline Table read_numeric(std::istream& in, const std::string& source, const std::vector<std::string>& expected) {
    std::string line;
    std::size_t lineno = 0;
    Table table;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view text = trim(line);
        if (text.empty()) continue;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = text.find(',', start);
            fields.push_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!header_seen) {
            bool ok = fields.size() == expected.size();
            for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = fields[i] == expected[i];
            if (!ok) {
                std::string want;
                for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
                parse_error(source, lineno, "expected header '" + want + "'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != expected.size())
            parse_error(source, lineno, "expected " + std::to_string(expected.size()) + " columns, got " +
                                            std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const auto f = fields[i];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
            if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(row[i]))
                parse_error(source, lineno, "invalid number '" + std::string(f) + "' in column " + expected[i]);
        }
        table.rows.push_back(std::move(row));
        table.lines.push_back(lineno);
    }
    if (!header_seen) parse_error(source, lineno + 1, "empty file");
    return table;
}

inline Table read_numeric_file(const std::string& path, const std::vector<std::string>& expected) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse, path + ": cannot open file");
    return read_numeric(in, path, expected);
}

inline void check_increasing(const Table& table, const std::string& source) {
    for (std::size_t i = 1; i < table.size(); ++i)
        if (!(table[i][0] > table[i - 1][0]))
            parse_error(source, table.lines[i], "timestamps must be strictly increasing");
}

}  // namespace detail

inline const std::vector<std::string> kImuHeader{"t", "ax", "ay", "az", "wx", "wy", "wz"};
inline const std::vector<std::string> kPositionHeader{"t", "px", "py", "pz"};
inline const std::vector<std::string> kLabelHeader{"t", "zv"};

inline ImuSequence parse_imu(std::istream& in, const std::string& source = "<imu>", double nominal_rate = 0.0) {
    const auto rows = detail::read_numeric(in, source, kImuHeader);
    detail::check_increasing(rows, source);
    std::vector<ImuSample> samples;
    samples.reserve(rows.size());
    for (const auto& r : rows) samples.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
    if (samples.size() < 2) throw Error(ErrorKind::parse, source + ": IMU log needs at least 2 samples");
    try {
        return ImuSequence(std::move(samples), nominal_rate);
    } catch (const Error& e) {
        throw Error(ErrorKind::parse, source + ": " + e.what());
    }
}

inline ImuSequence read_imu(const std::string& path, double nominal_rate = 0.0) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse, path + ": cannot open file");
    return parse_imu(in, path, nominal_rate);
}

inline std::vector<TimedPosition> read_positions(const std::string& path) {
    const auto rows = detail::read_numeric_file(path, kPositionHeader);
    detail::check_increasing(rows, path);
    std::vector<TimedPosition> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r[0], Vec3(r[1], r[2], r[3])});
    return out;
}

struct Labels {
    std::vector<double> t;
    StationaryFlags zv;
};

inline Labels read_labels(const std::string& path) {
    const auto rows = detail::read_numeric_file(path, kLabelHeader);
    detail::check_increasing(rows, path);
    Labels out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double z = rows[i][1];
        if (z != 0.0 && z != 1.0) detail::parse_error(path, rows.lines[i], "zv must be 0 or 1");
        out.t.push_back(rows[i][0]);
        out.zv.push_back(static_cast<std::uint8_t>(z));
    }
    return out;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(path + ": cannot open for writing");
    return out;
}

inline void write_imu(std::ostream& out, const ImuSequence& seq) {
    out << "t,ax,ay,az,wx,wy,wz\n";
    for (const auto& s : seq) {
        out << format_double(s.t);
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.accel[i]);
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.gyro[i]);
        out << '\n';
    }
}

inline void write_imu(const std::string& path, const ImuSequence& seq) {
    auto out = open_out(path);
    write_imu(out, seq);
}

inline void write_positions(const std::string& path, std::span<const TimedPosition> pos) {
    auto out = open_out(path);
    out << "t,px,py,pz\n";
    for (const auto& p : pos)
        out << format_double(p.t) << ',' << format_double(p.p.x()) << ',' << format_double(p.p.y()) << ','
            << format_double(p.p.z()) << '\n';
}

inline void write_labels(const std::string& path, std::span<const double> t, std::span<const std::uint8_t> zv) {
    if (t.size() != zv.size()) fail("write_labels: size mismatch");
    auto out = open_out(path);
    out << "t,zv\n";
    for (std::size_t i = 0; i < t.size(); ++i) out << format_double(t[i]) << ',' << int(zv[i] ? 1 : 0) << '\n';
}

}  // namespace zupt::csv
