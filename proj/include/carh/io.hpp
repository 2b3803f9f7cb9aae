#pragma once

/** @file
 * Plain-text data formats.
 *
 *   wide curves      k,t_1,...,t_m        one row per curve
 *   covariates       k,v_1,...,v_d        one row per curve index
 *   long records     timestamp,value      sorted; ISO-8601 or epoch seconds
 *   config           key = value          '#' starts a comment
 *
 * Numbers are written with 12 significant digits.
 */

#include "carh/function_space.hpp"
#include "carh/kernel_regression.hpp"
#include "carh/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace carh::io {

inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("write failed for " + path);
}

// ---------------------------------------------------------------- tables

/// Rows of a `k,x_1,...,x_w` table.
struct IndexedTable {
    std::vector<long long> index;
    std::vector<std::vector<double>> rows;
};

inline IndexedTable parse_indexed_table(const std::vector<std::string>& lines, char prefix, const std::string& source) {
    if (lines.empty()) throw DataError(source + ": empty file");
    const auto header = split(lines.front());
    if (header.size() < 2 || header.front() != "k") {
        throw DataError(source + ": header must be k," + prefix + "_1,...");
    }
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c] != std::string(1, prefix) + "_" + std::to_string(c)) {
            throw DataError(source + ": header column " + std::to_string(c + 1) + " should be " + prefix + "_" +
                            std::to_string(c) + ", got '" + std::string(header[c]) + "'");
        }
    }
    const std::size_t width = header.size() - 1;
    IndexedTable t;
    std::set<long long> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r]);
        const std::string where = source + ": row " + std::to_string(r + 1);
        if (cells.size() != width + 1) {
            throw DataError(where + " has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(width + 1));
        }
        const auto k = parse_int(cells[0]);
        if (!k) throw DataError(where + ", column 1: index '" + std::string(cells[0]) + "' is not an integer");
        if (!seen.insert(*k).second) throw DataError(where + ": duplicate index " + std::to_string(*k));
        std::vector<double> row(width);
        for (std::size_t c = 0; c < width; ++c) {
            const auto v = parse_double(cells[c + 1]);
            if (!v) {
                throw DataError(where + ", column " + std::to_string(c + 2) + ": '" + std::string(cells[c + 1]) +
                                "' is not a finite number");
            }
            row[c] = *v;
        }
        t.index.push_back(*k);
        t.rows.push_back(std::move(row));
    }
    if (t.rows.empty()) throw DataError(source + ": no data rows");
    return t;
}

inline std::string format_indexed_table(const std::vector<long long>& index,
                                        const std::vector<std::vector<double>>& rows, char prefix) {
    std::ostringstream os;
    const std::size_t width = rows.empty() ? 0 : rows.front().size();
    os << 'k';
    for (std::size_t c = 1; c <= width; ++c) os << ',' << prefix << '_' << c;
    os << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        os << index[r];
        for (double x : rows[r]) os << ',' << format_number(x);
        os << '\n';
    }
    return os.str();
}

struct CurveTable {
    GridPtr grid;
    std::vector<long long> index;
    std::vector<Curve> curves;
    std::vector<std::string> labels;  ///< optional day labels (ISO dates)
};

inline CurveTable parse_wide_csv(const std::vector<std::string>& lines, const std::string& source) {
    IndexedTable t = parse_indexed_table(lines, 't', source);
    const std::size_t m = t.rows.front().size();
    if (m < 2) throw DataError(source + ": curves need at least 2 grid points");
    CurveTable out;
    out.grid = make_grid(m);
    out.index = std::move(t.index);
    for (auto& row : t.rows) {
        out.curves.emplace_back(out.grid, Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(m)));
    }
    return out;
}

inline CurveTable load_wide_csv(const std::string& path) { return parse_wide_csv(read_lines(path), path); }

inline std::string format_wide_csv(const std::vector<long long>& index, const std::vector<Curve>& curves) {
    std::vector<std::vector<double>> rows;
    for (const Curve& c : curves) rows.emplace_back(c.values().data(), c.values().data() + c.values().size());
    return format_indexed_table(index, rows, 't');
}

inline void save_wide_csv(const std::string& path, const std::vector<long long>& index,
                          const std::vector<Curve>& curves) {
    write_text(path, format_wide_csv(index, curves));
}

struct CovariateTable {
    std::vector<long long> index;
    std::vector<CovariateVector> values;
};

inline CovariateTable load_covariate_csv(const std::string& path) {
    IndexedTable t = parse_indexed_table(read_lines(path), 'v', path);
    CovariateTable out;
    out.index = std::move(t.index);
    for (auto& row : t.rows) {
        out.values.emplace_back(Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
    }
    return out;
}

inline std::string format_covariate_csv(const std::vector<long long>& index,
                                        const std::vector<CovariateVector>& covs) {
    std::vector<std::vector<double>> rows;
    for (const auto& v : covs) rows.emplace_back(v.values().data(), v.values().data() + v.values().size());
    return format_indexed_table(index, rows, 'v');
}

/// Pairs curves with covariates by index k.
inline CurveSeries join_series(const CurveTable& curves, const CovariateTable& covs) {
    std::unordered_map<long long, std::size_t> pos;
    for (std::size_t i = 0; i < covs.index.size(); ++i) pos.emplace(covs.index[i], i);
    std::vector<CovariateVector> matched;
    for (long long k : curves.index) {
        const auto it = pos.find(k);
        if (it == pos.end()) throw DataError("no covariate row for curve index " + std::to_string(k));
        matched.push_back(covs.values[it->second]);
    }
    try {
        return CurveSeries(curves.grid, curves.curves, std::move(matched));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

// ---------------------------------------------------------------- long format

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::string civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y + (m <= 2)), m, d);
    return buf;
}

}  // namespace detail

/// Seconds since the epoch for "YYYY-MM-DD[ T]HH:MM[:SS]" or a plain integer.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
    s = trim(s);
    if (const auto secs = parse_int(s)) return *secs;
    if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
        return std::nullopt;
    }
    const auto num = [&](std::size_t pos, std::size_t len) { return parse_int(s.substr(pos, len)); };
    const auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2);
    std::optional<long long> sec = 0;
    if (s.size() >= 19) {
        if (s[16] != ':') return std::nullopt;
        sec = num(17, 2);
    }
    if (!y || !mo || !d || !h || !mi || !sec || *mo < 1 || *mo > 12 || *d < 1 || *d > 31 || *h > 23 || *mi > 59 ||
        *sec > 59) {
        return std::nullopt;
    }
    return detail::days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d)) * 86400 +
           *h * 3600 + *mi * 60 + *sec;
}

struct DailyBlocks {
    std::vector<std::string> days;  ///< ISO date of each block
    std::vector<std::vector<double>> values;
};

/// Groups sorted `timestamp,value` records into calendar days of exactly
/// `records_per_day` equally spaced records.
inline DailyBlocks segment_long_records(const std::vector<std::string>& lines, std::size_t records_per_day,
                                        const std::string& source) {
    if (records_per_day < 1 || 86400 % records_per_day != 0) {
        throw DataError(source + ": records per day must divide 86400 seconds");
    }
    const std::int64_t step = 86400 / static_cast<std::int64_t>(records_per_day);
    if (lines.empty()) throw DataError(source + ": empty file");
    const auto header = split(lines.front());
    std::size_t first = 0;
    if (header.size() == 2 && !parse_timestamp(header[0])) first = 1;

    struct Record {
        std::int64_t t;
        double v;
    };
    std::vector<Record> records;
    for (std::size_t r = first; r < lines.size(); ++r) {
        const auto cells = split(lines[r]);
        const std::string where = source + ": row " + std::to_string(r + 1);
        if (cells.size() != 2) throw DataError(where + ": expected timestamp,value");
        const auto t = parse_timestamp(cells[0]);
        if (!t) throw DataError(where + ", column 1: bad timestamp '" + std::string(cells[0]) + "'");
        const auto v = parse_double(cells[1]);
        if (!v) throw DataError(where + ", column 2: '" + std::string(cells[1]) + "' is not a finite number");
        if (!records.empty() && *t < records.back().t) throw DataError(where + ": timestamps are not sorted");
        records.push_back({*t, *v});
    }
    if (records.empty()) throw DataError(source + ": no records");

    const auto day_of = [](std::int64_t t) { return t >= 0 ? t / 86400 : -((-t + 86399) / 86400); };
    DailyBlocks out;
    std::size_t i = 0;
    while (i < records.size()) {
        const std::int64_t day = day_of(records[i].t);
        const std::string label = detail::civil_from_days(day);
        std::size_t j = i;
        while (j < records.size() && day_of(records[j].t) == day) ++j;
        for (std::size_t r = i + 1; r < j; ++r) {
            const std::int64_t dt = records[r].t - records[r - 1].t;
            if (dt == 0) throw DataError(source + ": duplicate timestamp within day " + label);
            if (dt != step) throw DataError(source + ": gap or irregular spacing within day " + label);
        }
        const std::size_t count = j - i;
        if (count != records_per_day) {
            if (j == records.size() && count < records_per_day) {
                throw DataError(source + ": incomplete trailing day " + label + " (" + std::to_string(count) + " of " +
                                std::to_string(records_per_day) + " records)");
            }
            throw DataError(source + ": day " + label + " has " + std::to_string(count) + " records, expected " +
                            std::to_string(records_per_day));
        }
        std::vector<double> vals;
        for (std::size_t r = i; r < j; ++r) vals.push_back(records[r].v);
        out.days.push_back(label);
        out.values.push_back(std::move(vals));
        i = j;
    }
    return out;
}

/// Daily curves from a long-format file; indices are 1..n, labels the dates.
inline CurveTable segment_long_csv(const std::string& path, std::size_t records_per_day) {
    if (records_per_day < 2) throw DataError(path + ": curves need at least 2 records per day");
    DailyBlocks blocks = segment_long_records(read_lines(path), records_per_day, path);
    CurveTable out;
    out.grid = make_grid(records_per_day);
    for (std::size_t d = 0; d < blocks.values.size(); ++d) {
        const auto& v = blocks.values[d];
        out.curves.emplace_back(out.grid,
                                Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        out.index.push_back(static_cast<long long>(d + 1));
    }
    out.labels = std::move(blocks.days);
    return out;
}

/// Sample standard deviation (n-1 denominator) over the sample mean; a
/// single value has no dispersion and yields 0.
inline double coefficient_of_variation(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("coefficient_of_variation: no values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (mean == 0.0) throw std::invalid_argument("coefficient_of_variation: zero mean");
    if (values.size() == 1) return 0.0;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1.0)) / mean;
}

/// One CV covariate per day of a long-format file, indexed 1..n like segment_long_csv.
inline CovariateTable daily_cv_covariates(const std::string& path, std::size_t records_per_day) {
    DailyBlocks blocks = segment_long_records(read_lines(path), records_per_day, path);
    CovariateTable out;
    for (std::size_t d = 0; d < blocks.values.size(); ++d) {
        try {
            out.values.push_back(CovariateVector::scalar(coefficient_of_variation(blocks.values[d])));
        } catch (const std::invalid_argument& e) {
            throw DataError(path + ": day " + blocks.days[d] + ": " + e.what());
        }
        out.index.push_back(static_cast<long long>(d + 1));
    }
    return out;
}

/// Keeps rows whose index or date label appears in `include` (comma list).
inline CurveTable filter_rows(const CurveTable& table, const std::string& include) {
    std::set<std::string> keys;
    for (auto item : split(include)) {
        if (!item.empty()) keys.emplace(item);
    }
    CurveTable out;
    out.grid = table.grid;
    for (std::size_t i = 0; i < table.curves.size(); ++i) {
        const bool by_index = keys.count(std::to_string(table.index[i])) > 0;
        const bool by_label = i < table.labels.size() && keys.count(table.labels[i]) > 0;
        if (by_index || by_label) {
            out.index.push_back(table.index[i]);
            out.curves.push_back(table.curves[i]);
            if (i < table.labels.size()) out.labels.push_back(table.labels[i]);
        }
    }
    if (out.curves.empty()) throw DataError("calendar filter kept no rows");
    return out;
}

// ---------------------------------------------------------------- config

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(const std::vector<std::string>& lines, const std::string& source) {
    ConfigMap out;
    for (std::size_t r = 0; r < lines.size(); ++r) {
        std::string_view line = lines[r];
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw DataError(source + ": line " + std::to_string(r + 1) + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw DataError(source + ": line " + std::to_string(r + 1) + ": empty key");
        out[key] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

inline ConfigMap load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return parse_config(lines, path);
}

inline std::string format_config(const ConfigMap& cfg) {
    std::ostringstream os;
    for (const auto& [k, v] : cfg) os << k << " = " << v << '\n';
    return os.str();
}

}  // namespace carh::io
