#include "tsfeatlime/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/rng.hpp"

namespace tsfl {

double QuadraticARForecaster::predict(std::span<const double> window) const {
    if (window.size() < 2) throw DimensionError("quadratic AR(2) needs at least two values");
    const double y1 = window[window.size() - 1];
    const double y2 = window[window.size() - 2];
    return params_.intercept + params_.a1 * y1 + params_.a2 * y2 + params_.quadratic * y1 * y1;
}

Series generate_benchmark_series(std::size_t n, std::uint64_t seed, const QuadraticARParams& p) {
    if (n < 2) throw ConfigError("benchmark series needs at least 2 points");
    Rng rng(derive_seed(seed, 0xBE7C));
    const QuadraticARForecaster core(p);
    const std::size_t period = std::max<std::size_t>(p.season_length, 1);
    const std::size_t burn_in = 2 * period;
    std::vector<double> y;
    y.reserve(n + burn_in);
    // Start from the noise-free fixed point of the recursion.
    const double a = p.quadratic;
    const double b = p.a1 + p.a2 - 1.0;
    double start = 0.0;
    if (a != 0.0) {
        const double disc = b * b - 4.0 * a * p.intercept;
        start = disc >= 0.0 ? (-b - std::sqrt(disc)) / (2.0 * a) : 0.0;
    } else if (b != 0.0) {
        start = -p.intercept / b;
    }
    y.push_back(start);
    y.push_back(start);
    for (std::size_t t = 2; t < n + burn_in; ++t) {
        const double season =
            p.season_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period));
        y.push_back(core.predict(std::span<const double>(y).last(2)) + season + p.noise_sd * rng.normal());
    }
    y.erase(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(burn_in));
    return Series::monthly(std::move(y));
}

std::vector<std::vector<double>> query_windows(std::span<const double> values, std::size_t q, std::size_t count,
                                               double test_fraction) {
    if (q == 0 || q > values.size()) throw InsufficientHistoryError("query window longer than the series");
    if (count == 0) return {};
    const std::size_t n = values.size();
    const auto test_len = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n)));
    // Window end positions (exclusive) range over [first_end, n].
    const std::size_t first_end = std::max(q, n - std::min(n, test_len));
    const std::size_t span = n - first_end;
    const std::size_t k = std::min(count, span + 1);
    std::vector<std::vector<double>> out;
    std::size_t last_end = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t end = k == 1 ? n : first_end + (span * i) / (k - 1);
        if (end == last_end) continue;
        last_end = end;
        out.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(end - q),
                         values.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

}  // namespace tsfl
