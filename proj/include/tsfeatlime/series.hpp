#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tsfl {

using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DD`; throws IngestionError on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Ordered univariate observations. Immutable after construction.
///
/// Timestamps are strictly increasing and every value is finite; the
/// constructor enforces both.
class Series {
public:
    Series() = default;
    Series(std::vector<Date> timestamps, std::vector<double> values);

    /// Monthly series starting at `start` (first of month by convention).
    static Series monthly(std::vector<double> values,
                          Date start = Date{std::chrono::year{2000} / 1 / 1});

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<const Date> timestamps() const noexcept { return timestamps_; }

    /// Observations [first, first + count).
    [[nodiscard]] Series slice(std::size_t first, std::size_t count) const;

    /// Same timestamps, new values (length must match).
    [[nodiscard]] Series with_values(std::vector<double> values) const;

    friend bool operator==(const Series&, const Series&) = default;

private:
    std::vector<Date> timestamps_;
    std::vector<double> values_;
};

/// Reads `time_column` / `value_column` from a headed CSV file and returns the
/// series sorted by timestamp. Duplicate timestamps are rejected.
Series load_csv(const std::string& path, std::string_view time_column,
                std::string_view value_column);
Series parse_series_csv(std::string_view text, std::string_view time_column,
                        std::string_view value_column);

void write_series_csv(std::ostream& out, const Series& s,
                      std::string_view time_column = "date",
                      std::string_view value_column = "value");
void write_series_csv(const std::string& path, const Series& s,
                      std::string_view time_column = "date",
                      std::string_view value_column = "value");

/// One observation per calendar month, stamped on the first day, valued at the
/// mean of that month's source observations. A month with no observations
/// inside the covered range raises GapError.
Series resample_monthly(const Series& s);

struct NormalizationState {
    double min = 0.0;
    double max = 1.0;

    [[nodiscard]] double normalize(double v) const noexcept { return (v - min) / (max - min); }
    [[nodiscard]] double denormalize(double v) const noexcept { return min + v * (max - min); }
    /// Scales a difference (no offset).
    [[nodiscard]] double denormalize_delta(double d) const noexcept { return d * (max - min); }
};

/// Min/max of `values`; throws DegenerateRangeError when max == min.
NormalizationState fit_normalization(std::span<const double> values);
Series apply_normalization(const Series& s, const NormalizationState& state);
Series denormalize(const Series& s, const NormalizationState& state);

std::pair<Series, NormalizationState> minmax_normalize(const Series& s);

/// Final q observations. Throws InsufficientHistoryError when q > size.
Series last_window(const Series& s, std::size_t q);

}  // namespace tsfl
