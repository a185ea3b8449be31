#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsfeatlime/perturbation.hpp"

namespace tsfl {

// Feature functions. `t` is the 1-based time index and `values[0]` is y_1.
// Each returns std::nullopt where the feature is undefined.

/// y_{t-k} when k < t.
std::optional<double> lag(std::span<const double> values, std::size_t t, std::size_t k);

/// Mean of y_{t-k-w+1} .. y_{t-k} when k < t and w <= t - k.
std::optional<double> rolling_window(std::span<const double> values, std::size_t t, std::size_t k,
                                     std::size_t w);

/// Mean of y_{t-w} .. y_{t-1} when w < t. Fixed width despite the name.
std::optional<double> expanding_window(std::span<const double> values, std::size_t t, std::size_t w);

enum class FeatureKind { Lag, RollingWindow, ExpandingWindow };

std::string_view to_string(FeatureKind kind) noexcept;

struct FeatureSpec {
    FeatureKind kind = FeatureKind::Lag;
    std::size_t offset = 0;  ///< k; 0 for ExpandingWindow
    std::size_t window = 0;  ///< w; 0 for Lag
    std::string label;

    static FeatureSpec make_lag(std::size_t k);
    static FeatureSpec make_rolling(std::size_t k, std::size_t w);
    static FeatureSpec make_expanding(std::size_t w);

    /// Evaluates the feature at 1-based time t.
    [[nodiscard]] std::optional<double> evaluate(std::span<const double> values, std::size_t t) const;

    /// Whether the feature is defined at t = q + 1 for a length-q window.
    [[nodiscard]] bool defined_after(std::size_t q) const noexcept;

    /// Text form accepted by parse_feature_specs (`lag:k`, `rw:k:w`, `ew:w`).
    [[nodiscard]] std::string syntax() const;

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Parses `lag:1,rw:1:3,ew:5`. Throws SpecError on malformed entries or
/// duplicate labels.
std::vector<FeatureSpec> parse_feature_specs(std::string_view text);
std::string format_feature_specs(std::span<const FeatureSpec> specs);

/// Checks structural invariants and label uniqueness; throws SpecError.
void validate_specs(std::span<const FeatureSpec> specs);

enum class FeatureFamily { Lag, RollingWindow, ExpandingWindow };

std::string_view to_string(FeatureFamily family) noexcept;
FeatureFamily parse_feature_family(std::string_view text);

/// Default family members: Lag k = 1..q; RollingWindow k = 1..3 with w = 3;
/// ExpandingWindow w = 1..5.
std::vector<FeatureSpec> default_family(FeatureFamily family, std::size_t q);

/// Row-major p x F matrix of feature values at t = q + 1.
struct FeatureMatrix {
    std::vector<FeatureSpec> columns;
    std::size_t rows = 0;
    std::vector<double> data;

    [[nodiscard]] std::size_t cols() const noexcept { return columns.size(); }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data).subspan(r * cols(), cols());
    }
};

/// Feature vector of a single window at t = q + 1. Throws SpecError naming
/// the first spec that is undefined there.
std::vector<double> feature_row(std::span<const double> window, std::span<const FeatureSpec> specs);

FeatureMatrix build_feature_matrix(const SampleSet& samples, std::span<const FeatureSpec> specs);
FeatureMatrix build_feature_matrix(std::span<const std::vector<double>> samples,
                                   std::span<const FeatureSpec> specs);

}  // namespace tsfl
