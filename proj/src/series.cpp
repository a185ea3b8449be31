#include "tsfeatlime/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>

#include "tsfeatlime/csv.hpp"
#include "tsfeatlime/errors.hpp"

namespace tsfl {

namespace chr = std::chrono;

namespace {

int parse_int(std::string_view text) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return -1;
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_real(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw IngestionError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    const int y = parse_int(text.substr(0, 4));
    const int m = parse_int(text.substr(5, 2));
    const int d = parse_int(text.substr(8, 2));
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                                  chr::day{static_cast<unsigned>(d)}};
    if (y < 0 || m < 0 || d < 0 || !ymd.ok()) {
        throw IngestionError("invalid date '" + std::string(text) + "'");
    }
    return Date{ymd};
}

std::string format_date(Date d) {
    const chr::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

Series::Series(std::vector<Date> timestamps, std::vector<double> values)
    : timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (timestamps_.size() != values_.size()) {
        throw DimensionError("series: " + std::to_string(timestamps_.size()) + " timestamps vs " +
                             std::to_string(values_.size()) + " values");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw IngestionError("series: non-finite value at position " + std::to_string(i));
        }
        if (i > 0 && !(timestamps_[i - 1] < timestamps_[i])) {
            throw IngestionError("series: timestamps not strictly increasing at position " +
                                 std::to_string(i));
        }
    }
}

Series Series::monthly(std::vector<double> values, Date start) {
    std::vector<Date> ts;
    ts.reserve(values.size());
    chr::year_month_day first{start};
    chr::year_month ym{first.year(), first.month()};
    for (std::size_t i = 0; i < values.size(); ++i) {
        ts.emplace_back(ym / chr::day{1});
        ym += chr::months{1};
    }
    return Series(std::move(ts), std::move(values));
}

Series Series::slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw DimensionError("series slice out of range");
    return Series(std::vector<Date>(timestamps_.begin() + first, timestamps_.begin() + first + count),
                  std::vector<double>(values_.begin() + first, values_.begin() + first + count));
}

Series Series::with_values(std::vector<double> values) const {
    return Series(timestamps_, std::move(values));
}

Series parse_series_csv(std::string_view text, std::string_view time_column,
                        std::string_view value_column) {
    const csv::Table table = csv::parse(text);
    const std::size_t tcol = table.column(time_column);
    const std::size_t vcol = table.column(value_column);

    std::vector<std::pair<Date, double>> points;
    points.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        // Row numbers are 1-based data rows (header excluded).
        const std::string where = "row " + std::to_string(r + 1);
        if (row.size() <= std::max(tcol, vcol)) {
            throw IngestionError(where + ": expected at least " + std::to_string(std::max(tcol, vcol) + 1) +
                                 " fields, got " + std::to_string(row.size()));
        }
        Date d;
        try {
            d = parse_date(row[tcol]);
        } catch (const IngestionError& e) {
            throw IngestionError(where + ": " + e.what());
        }
        const auto v = parse_real(row[vcol]);
        if (!v) throw IngestionError(where + ": non-numeric value '" + row[vcol] + "'");
        points.emplace_back(d, *v);
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Date> ts;
    std::vector<double> vs;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i > 0 && points[i].first == points[i - 1].first) {
            throw IngestionError("duplicate timestamp " + format_date(points[i].first));
        }
        ts.push_back(points[i].first);
        vs.push_back(points[i].second);
    }
    return Series(std::move(ts), std::move(vs));
}

Series load_csv(const std::string& path, std::string_view time_column, std::string_view value_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_series_csv(text, time_column, value_column);
}

void write_series_csv(std::ostream& out, const Series& s, std::string_view time_column,
                      std::string_view value_column) {
    out << csv::escape(time_column) << ',' << csv::escape(value_column) << '\n';
    char buf[64];
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", s.values()[i]);
        out << format_date(s.timestamps()[i]) << ',' << buf << '\n';
    }
}

void write_series_csv(const std::string& path, const Series& s, std::string_view time_column,
                      std::string_view value_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StorageError("cannot write '" + path + "'");
    write_series_csv(out, s, time_column, value_column);
}

Series resample_monthly(const Series& s) {
    if (s.empty()) return s;
    std::map<chr::year_month, std::pair<double, std::size_t>> buckets;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const chr::year_month_day ymd{s.timestamps()[i]};
        auto& [sum, count] = buckets[chr::year_month{ymd.year(), ymd.month()}];
        sum += s.values()[i];
        ++count;
    }
    std::vector<Date> ts;
    std::vector<double> vs;
    auto expected = buckets.begin()->first;
    for (const auto& [ym, acc] : buckets) {
        if (ym != expected) {
            throw GapError("no observations for month " +
                           format_date(Date{expected / chr::day{1}}).substr(0, 7));
        }
        ts.emplace_back(ym / chr::day{1});
        vs.push_back(acc.first / static_cast<double>(acc.second));
        expected += chr::months{1};
    }
    return Series(std::move(ts), std::move(vs));
}

NormalizationState fit_normalization(std::span<const double> values) {
    if (values.empty()) throw DegenerateRangeError("cannot normalize an empty series");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (!(*hi > *lo)) throw DegenerateRangeError("cannot normalize a constant series");
    return {*lo, *hi};
}

Series apply_normalization(const Series& s, const NormalizationState& state) {
    std::vector<double> out(s.values().begin(), s.values().end());
    for (double& v : out) v = state.normalize(v);
    return s.with_values(std::move(out));
}

Series denormalize(const Series& s, const NormalizationState& state) {
    std::vector<double> out(s.values().begin(), s.values().end());
    for (double& v : out) v = state.denormalize(v);
    return s.with_values(std::move(out));
}

std::pair<Series, NormalizationState> minmax_normalize(const Series& s) {
    const NormalizationState state = fit_normalization(s.values());
    return {apply_normalization(s, state), state};
}

Series last_window(const Series& s, std::size_t q) {
    if (q == 0) throw ConfigError("window length must be positive");
    if (q > s.size()) {
        throw InsufficientHistoryError("window of " + std::to_string(q) + " requested but series has " +
                                       std::to_string(s.size()) + " observations");
    }
    return s.slice(s.size() - q, q);
}

}  // namespace tsfl
