#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsfeatlime/forecaster.hpp"

namespace tsfl {

// ---------------------------------------------------------------------------
// Autoregressive model

struct ARModel {
    std::vector<double> coefficients;  ///< coefficients[i] pairs with the (i+1)-th most recent value
    double intercept = 0.0;

    [[nodiscard]] std::size_t order() const noexcept { return coefficients.size(); }
};

/// Least-squares AR(p) fit with intercept. Collinear designs (e.g. a constant
/// series) resolve to the minimum-norm solution. Throws FitError when the
/// training series is too short.
ARModel ar_fit(std::span<const double> train, std::size_t order);

/// intercept + sum_i coefficients[i] * window[q - 1 - i]. DimensionError when
/// the window is shorter than the order.
double ar_predict(const ARModel& m, std::span<const double> window);

class ARForecaster final : public Forecaster {
public:
    explicit ARForecaster(ARModel model) : model_(std::move(model)) {}
    [[nodiscard]] double predict(std::span<const double> window) const override {
        return ar_predict(model_, window);
    }
    [[nodiscard]] std::string describe() const override;
    [[nodiscard]] const ARModel& model() const noexcept { return model_; }

private:
    ARModel model_;
};

// ---------------------------------------------------------------------------
// Additive Holt-Winters

struct HoltWintersParams {
    double alpha = 0.5;
    double beta = 0.1;
    std::optional<double> gamma = 0.1;  ///< nullopt disables the seasonal component
    std::size_t season_length = 12;

    void validate() const;
};

struct HoltWintersState {
    double level = 0.0;
    double trend = 0.0;
    std::vector<double> seasonals;  ///< seasonals[phase], empty without a seasonal component
    std::size_t phase = 0;          ///< seasonal phase of the next observation
};

/// Initialises from the first two seasons (first-season mean level,
/// first-vs-second-season trend, first-season offsets) and filters the whole
/// training series. Without a seasonal component the level starts at y_1 and
/// the trend at y_2 - y_1.
HoltWintersState hw_fit(std::span<const double> train, const HoltWintersParams& params);

/// Continues the recursion from `state` over `values`; returns the new state.
HoltWintersState hw_filter(HoltWintersState state, std::span<const double> values,
                           const HoltWintersParams& params);

/// level + trend + seasonal for the next phase.
double hw_forecast(const HoltWintersState& state) noexcept;

/// Fits on `train`, then treats `window` as the observations that follow it
/// and forecasts the next step.
double hw_fit_predict(std::span<const double> train, const HoltWintersParams& params,
                      std::span<const double> window);

class HoltWintersForecaster final : public Forecaster {
public:
    HoltWintersForecaster(std::span<const double> train, HoltWintersParams params);
    [[nodiscard]] double predict(std::span<const double> window) const override;
    [[nodiscard]] std::string describe() const override;

private:
    HoltWintersParams params_;
    HoltWintersState fitted_;
};

// ---------------------------------------------------------------------------
// External process adapter
//
// Protocol: UTF-8, '\n'-terminated lines over the child's stdin/stdout.
// Request `v1,v2,...,vq`; response one decimal real. A response starting with
// `ERR ` reports an adapter-side failure.

struct ExternalAdapterConfig {
    std::string command;  ///< run through /bin/sh -c
    std::chrono::milliseconds timeout{10'000};
};

class ExternalForecaster final : public Forecaster {
public:
    explicit ExternalForecaster(ExternalAdapterConfig cfg);
    ~ExternalForecaster() override;
    ExternalForecaster(const ExternalForecaster&) = delete;
    ExternalForecaster& operator=(const ExternalForecaster&) = delete;

    /// Calls are serialised per instance. The child is started lazily and
    /// restarted after a failure.
    [[nodiscard]] double predict(std::span<const double> window) const override;
    [[nodiscard]] std::string describe() const override { return "ext:" + cfg_.command; }

private:
    struct Process;
    void start() const;
    void stop() const;

    ExternalAdapterConfig cfg_;
    mutable std::mutex mutex_;
    mutable std::unique_ptr<Process> proc_;
};

double external_forecast(const ExternalForecaster& adapter, std::span<const double> window);

/// Formats a request line (without the trailing newline).
std::string format_adapter_request(std::span<const double> window);
/// Parses a response line; throws AdapterError on `ERR ...` or non-numeric text.
double parse_adapter_response(std::string_view line);

// ---------------------------------------------------------------------------
// Simple reference forecasters

/// Returns the window's last value.
class LastValueForecaster final : public Forecaster {
public:
    [[nodiscard]] double predict(std::span<const double> window) const override;
    [[nodiscard]] std::string describe() const override { return "last"; }
};

// ---------------------------------------------------------------------------
// Model spec mini-language: `ar:p`, `hw:alpha,beta,gamma,season`,
// `ext:command line`, `last`, `quad`. For hw, gamma = 0 disables seasonality.

struct ARSpec { std::size_t order = 1; };
struct ExternalSpec { ExternalAdapterConfig config; };
struct LastValueSpec {};
struct QuadraticARSpec {};

using ModelSpec = std::variant<ARSpec, HoltWintersParams, ExternalSpec, LastValueSpec, QuadraticARSpec>;

ModelSpec parse_model_spec(std::string_view text);

/// Builds the forecaster; `train` is used by fitted models (ar, hw).
std::unique_ptr<Forecaster> make_forecaster(const ModelSpec& spec, std::span<const double> train);

}  // namespace tsfl
