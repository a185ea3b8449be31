#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsfeatlime/features.hpp"
#include "tsfeatlime/forecaster.hpp"
#include "tsfeatlime/perturbation.hpp"

namespace tsfl {

/// Euclidean distance between two equal-length windows. Throws DimensionError
/// on a length mismatch.
double euclidean_distance(std::span<const double> window, std::span<const double> sample);

std::vector<double> distances(std::span<const double> window, const SampleSet& samples);

enum class KernelKind { None, Exponential };

std::string_view to_string(KernelKind kind) noexcept;
KernelKind parse_kernel_kind(std::string_view text);

struct KernelConfig {
    KernelKind kind = KernelKind::Exponential;
    /// Bandwidth sigma; nullopt selects the median positive distance.
    std::optional<double> bandwidth;

    void validate() const;

    friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

/// Bandwidth actually used for `d` under `cfg` (1.0 when every distance is 0).
double resolve_bandwidth(std::span<const double> d, const KernelConfig& cfg);

/// None: all ones. Exponential: exp(-d^2 / sigma^2).
std::vector<double> kernel_weights(std::span<const double> d, const KernelConfig& cfg);

/// Local linear surrogate g(x) = intercept + coefficients . x.
struct SurrogateModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    std::vector<FeatureSpec> feature_specs;
    KernelConfig kernel;
    double ridge = 0.0;
    double weighted_rmse = 0.0;  ///< in-sample, weights normalised to sum 1

    [[nodiscard]] double predict_features(std::span<const double> x) const;
};

/// Weighted ridge least squares with an unpenalised intercept:
///   minimise sum_i w_i (y_i - b - L.x_i)^2 + ridge * |L|^2.
/// Throws SingularSystemError for a rank-deficient design when ridge == 0,
/// DimensionError on shape mismatches, ConfigError for non-positive weights
/// or p < F + 1.
SurrogateModel fit_wls(const FeatureMatrix& x, std::span<const double> y, std::span<const double> weights,
                       double ridge);

/// g evaluated on the window's own feature vector at t = q + 1.
double surrogate_predict(const SurrogateModel& g, std::span<const double> window);

struct FeatureContribution {
    std::string label;
    double coefficient = 0.0;
    int sign = 0;  ///< -1, 0, +1
};

struct Explanation {
    std::vector<FeatureContribution> contributions;
    double intercept = 0.0;
    double black_box_prediction = 0.0;
    double surrogate_prediction = 0.0;
    std::vector<double> window;
    PerturbationConfig perturbation;
    KernelConfig kernel;
    double bandwidth = 0.0;  ///< resolved sigma (0 for kernel None)
    double ridge = 0.0;
    double weighted_rmse = 0.0;
    std::uint64_t sample_hash = 0;
    std::vector<double> training_targets;  ///< f(B_1) .. f(B_p)
};

struct ExplainResult {
    SurrogateModel model;
    Explanation explanation;
};

inline constexpr double kDefaultRidge = 1e-8;

/// Perturb, weight, query the black box, featurise and fit, in that order.
ExplainResult tsfeatlime_explain(std::span<const double> window, const Forecaster& f,
                                 std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                                 const KernelConfig& kcfg, double ridge = kDefaultRidge);

/// Variant taking pre-generated samples; used to pair evaluation arms.
ExplainResult tsfeatlime_explain(std::span<const double> window, const Forecaster& f,
                                 std::span<const FeatureSpec> specs, const SampleSet& samples,
                                 std::span<const double> black_box_outputs, const KernelConfig& kcfg,
                                 double ridge = kDefaultRidge);

/// Sign-rule sentence shown alongside coefficients.
std::string_view sign_rule_text() noexcept;

/// "increasing its value will raise/lower the predicted output" for one feature.
std::string describe_contribution(const FeatureContribution& c);

/// JSON document with stable field names. Coefficients keep full precision.
std::string explanation_to_json(const Explanation& e, int indent = 2);

/// Horizontal signed bar chart of the coefficients.
std::string explanation_to_svg(const Explanation& e);

}  // namespace tsfl
