#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsfeatlime/forecaster.hpp"
#include "tsfeatlime/series.hpp"

namespace tsfl {

/// Nonlinear AR(2) recursion with a quadratic term:
///   y_t = c + a1 y_{t-1} + a2 y_{t-2} + b y_{t-1}^2
/// The benchmark series adds a 12-period sinusoid and Gaussian noise.
struct QuadraticARParams {
    double intercept = 0.3;
    double a1 = 0.9;
    double a2 = -0.3;
    double quadratic = -0.6;
    double season_amplitude = 0.1;
    std::size_t season_length = 12;
    double noise_sd = 0.02;
};

/// Noise-free one-step recursion on the last two values of a window.
class QuadraticARForecaster final : public Forecaster {
public:
    explicit QuadraticARForecaster(QuadraticARParams params = {}) : params_(params) {}
    [[nodiscard]] double predict(std::span<const double> window) const override;
    [[nodiscard]] std::string describe() const override { return "quad"; }

private:
    QuadraticARParams params_;
};

/// Monthly benchmark series of length n starting 2000-01-01.
Series generate_benchmark_series(std::size_t n, std::uint64_t seed, const QuadraticARParams& params = {});

/// Windows of length q ending at evenly spaced positions in the final
/// `fraction` of the series (at most `count` of them, distinct end points).
std::vector<std::vector<double>> query_windows(std::span<const double> values, std::size_t q,
                                               std::size_t count, double test_fraction = 0.5);

}  // namespace tsfl
