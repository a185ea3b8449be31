#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>

namespace tsfl {

/// Black-box one-step-ahead forecaster. Implementations must be
/// deterministic: the same window always yields the same prediction.
class Forecaster {
public:
    virtual ~Forecaster() = default;

    /// Forecast for the step after `window`.
    [[nodiscard]] virtual double predict(std::span<const double> window) const = 0;

    [[nodiscard]] virtual std::string describe() const { return "forecaster"; }
};

/// Adapts any callable. Handy for tests and for bindings.
class FunctionForecaster final : public Forecaster {
public:
    using Fn = std::function<double(std::span<const double>)>;

    explicit FunctionForecaster(Fn fn, std::string name = "function")
        : fn_(std::move(fn)), name_(std::move(name)) {}

    [[nodiscard]] double predict(std::span<const double> window) const override { return fn_(window); }
    [[nodiscard]] std::string describe() const override { return name_; }

private:
    Fn fn_;
    std::string name_;
};

}  // namespace tsfl
