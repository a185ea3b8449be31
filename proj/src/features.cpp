#include "tsfeatlime/features.hpp"

#include <charconv>
#include <set>

#include "tsfeatlime/errors.hpp"

namespace tsfl {

namespace {

// Mean of y_first .. y_last (1-based, inclusive).
double mean_of(std::span<const double> values, std::size_t first, std::size_t last) {
    if (last > values.size()) {
        throw DimensionError("feature needs y_" + std::to_string(last) + " but only " +
                             std::to_string(values.size()) + " values are available");
    }
    double sum = 0.0;
    for (std::size_t i = first; i <= last; ++i) sum += values[i - 1];
    return sum / static_cast<double>(last - first + 1);
}

std::size_t parse_count(std::string_view text, std::string_view entry) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || v == 0) {
        throw SpecError("feature '" + std::string(entry) + "': expected a positive integer, got '" +
                        std::string(text) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
}

}  // namespace

std::optional<double> lag(std::span<const double> values, std::size_t t, std::size_t k) {
    if (t == 0 || k == 0 || k >= t) return std::nullopt;
    return mean_of(values, t - k, t - k);
}

std::optional<double> rolling_window(std::span<const double> values, std::size_t t, std::size_t k,
                                     std::size_t w) {
    if (t == 0 || k == 0 || w == 0 || k >= t || w > t - k) return std::nullopt;
    return mean_of(values, t - k - w + 1, t - k);
}

std::optional<double> expanding_window(std::span<const double> values, std::size_t t, std::size_t w) {
    if (t == 0 || w == 0 || w >= t) return std::nullopt;
    return mean_of(values, t - w, t - 1);
}

std::string_view to_string(FeatureKind kind) noexcept {
    switch (kind) {
        case FeatureKind::Lag: return "Lag";
        case FeatureKind::RollingWindow: return "RollingWindow";
        case FeatureKind::ExpandingWindow: return "ExpandingWindow";
    }
    return "?";
}

FeatureSpec FeatureSpec::make_lag(std::size_t k) {
    return {FeatureKind::Lag, k, 0, "Lag_" + std::to_string(k)};
}

FeatureSpec FeatureSpec::make_rolling(std::size_t k, std::size_t w) {
    return {FeatureKind::RollingWindow, k, w, "RW_" + std::to_string(k) + "_" + std::to_string(w)};
}

FeatureSpec FeatureSpec::make_expanding(std::size_t w) {
    return {FeatureKind::ExpandingWindow, 0, w, "EW_" + std::to_string(w)};
}

std::optional<double> FeatureSpec::evaluate(std::span<const double> values, std::size_t t) const {
    switch (kind) {
        case FeatureKind::Lag: return lag(values, t, offset);
        case FeatureKind::RollingWindow: return rolling_window(values, t, offset, window);
        case FeatureKind::ExpandingWindow: return expanding_window(values, t, window);
    }
    return std::nullopt;
}

bool FeatureSpec::defined_after(std::size_t q) const noexcept {
    const std::size_t t = q + 1;
    switch (kind) {
        case FeatureKind::Lag: return offset >= 1 && offset < t;
        case FeatureKind::RollingWindow: return offset >= 1 && window >= 1 && offset < t && window <= t - offset;
        case FeatureKind::ExpandingWindow: return window >= 1 && window < t;
    }
    return false;
}

std::string FeatureSpec::syntax() const {
    switch (kind) {
        case FeatureKind::Lag: return "lag:" + std::to_string(offset);
        case FeatureKind::RollingWindow: return "rw:" + std::to_string(offset) + ":" + std::to_string(window);
        case FeatureKind::ExpandingWindow: return "ew:" + std::to_string(window);
    }
    return {};
}

void validate_specs(std::span<const FeatureSpec> specs) {
    std::set<std::string> labels;
    for (const auto& s : specs) {
        const bool ok = [&] {
            switch (s.kind) {
                case FeatureKind::Lag: return s.offset >= 1 && s.window == 0;
                case FeatureKind::RollingWindow: return s.offset >= 1 && s.window >= 1;
                case FeatureKind::ExpandingWindow: return s.offset == 0 && s.window >= 1;
            }
            return false;
        }();
        if (!ok) throw SpecError("feature '" + s.label + "' has parameters inconsistent with its kind");
        if (!labels.insert(s.label).second) throw SpecError("duplicate feature label '" + s.label + "'");
    }
}

std::vector<FeatureSpec> parse_feature_specs(std::string_view text) {
    std::vector<FeatureSpec> specs;
    for (std::string_view entry : split(text, ',')) {
        entry = trim(entry);
        if (entry.empty()) continue;
        const auto parts = split(entry, ':');
        const std::string_view kind = parts.front();
        if (kind == "lag" && parts.size() == 2) {
            specs.push_back(FeatureSpec::make_lag(parse_count(parts[1], entry)));
        } else if (kind == "rw" && parts.size() == 3) {
            specs.push_back(FeatureSpec::make_rolling(parse_count(parts[1], entry), parse_count(parts[2], entry)));
        } else if (kind == "ew" && parts.size() == 2) {
            specs.push_back(FeatureSpec::make_expanding(parse_count(parts[1], entry)));
        } else {
            throw SpecError("unrecognised feature '" + std::string(entry) +
                            "' (expected lag:k, rw:k:w or ew:w)");
        }
    }
    if (specs.empty()) throw SpecError("feature list is empty");
    validate_specs(specs);
    return specs;
}

std::string format_feature_specs(std::span<const FeatureSpec> specs) {
    std::string out;
    for (const auto& s : specs) {
        if (!out.empty()) out += ',';
        out += s.syntax();
    }
    return out;
}

std::string_view to_string(FeatureFamily family) noexcept {
    switch (family) {
        case FeatureFamily::Lag: return "Lag";
        case FeatureFamily::RollingWindow: return "RW";
        case FeatureFamily::ExpandingWindow: return "EW";
    }
    return "?";
}

FeatureFamily parse_feature_family(std::string_view text) {
    if (text == "Lag" || text == "lag") return FeatureFamily::Lag;
    if (text == "RW" || text == "rw") return FeatureFamily::RollingWindow;
    if (text == "EW" || text == "ew") return FeatureFamily::ExpandingWindow;
    throw SpecError("unknown feature family '" + std::string(text) + "' (expected Lag, RW or EW)");
}

std::vector<FeatureSpec> default_family(FeatureFamily family, std::size_t q) {
    std::vector<FeatureSpec> specs;
    switch (family) {
        case FeatureFamily::Lag:
            for (std::size_t k = 1; k <= q; ++k) specs.push_back(FeatureSpec::make_lag(k));
            break;
        case FeatureFamily::RollingWindow:
            for (std::size_t k = 1; k <= 3; ++k) specs.push_back(FeatureSpec::make_rolling(k, 3));
            break;
        case FeatureFamily::ExpandingWindow:
            for (std::size_t w = 1; w <= 5; ++w) specs.push_back(FeatureSpec::make_expanding(w));
            break;
    }
    return specs;
}

std::vector<double> feature_row(std::span<const double> window, std::span<const FeatureSpec> specs) {
    const std::size_t q = window.size();
    std::vector<double> row;
    row.reserve(specs.size());
    for (const auto& s : specs) {
        const auto v = s.evaluate(window, q + 1);
        if (!v) {
            throw SpecError("feature '" + s.label + "' is undefined at t = " + std::to_string(q + 1) +
                            " for a window of length " + std::to_string(q));
        }
        row.push_back(*v);
    }
    return row;
}

FeatureMatrix build_feature_matrix(std::span<const std::vector<double>> samples,
                                   std::span<const FeatureSpec> specs) {
    validate_specs(specs);
    FeatureMatrix m;
    m.columns.assign(specs.begin(), specs.end());
    m.rows = samples.size();
    if (!samples.empty()) {
        const std::size_t q = samples.front().size();
        for (const auto& s : specs) {
            if (!s.defined_after(q)) {
                throw SpecError("feature '" + s.label + "' is undefined at t = " + std::to_string(q + 1) +
                                " for windows of length " + std::to_string(q));
            }
        }
    }
    m.data.reserve(m.rows * m.cols());
    for (const auto& sample : samples) {
        const auto row = feature_row(sample, specs);
        m.data.insert(m.data.end(), row.begin(), row.end());
    }
    return m;
}

FeatureMatrix build_feature_matrix(const SampleSet& samples, std::span<const FeatureSpec> specs) {
    return build_feature_matrix(std::span<const std::vector<double>>(samples.samples), specs);
}

}  // namespace tsfl
