#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "tsfeatlime/features.hpp"
#include "tsfeatlime/forecaster.hpp"
#include "tsfeatlime/perturbation.hpp"
#include "tsfeatlime/surrogate.hpp"

namespace tsfl {

enum class Metric { MAE, RMSE, MAPE };

inline constexpr std::array kAllMetrics{Metric::MAE, Metric::RMSE, Metric::MAPE};

std::string_view to_string(Metric m) noexcept;

/// (f value, g value) pair.
using FidelityPair = std::pair<double, double>;

/// MAE = mean |f-g|; RMSE = sqrt(mean (f-g)^2); MAPE = 100 * mean |f-g|/|f|.
/// Throws MetricError on an empty input or, for MAPE, a zero f value.
double fidelity(std::span<const FidelityPair> pairs, Metric metric);

struct FidelityRecord {
    std::size_t query_id = 0;
    std::size_t iteration = 0;
    double black_box = 0.0;  ///< f(O_i)
    double surrogate = 0.0;  ///< g_i(O_i)
    std::uint64_t sample_hash = 0;
};

struct FidelityReport {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;  ///< percent; NaN when some f value is zero
    std::vector<FidelityRecord> records;
    PerturbationConfig perturbation;
    KernelConfig kernel;
    std::vector<FeatureSpec> specs;
    std::size_t iterations = 0;
    double ridge = kDefaultRidge;

    [[nodiscard]] double metric(Metric m) const noexcept;
};

/// Seed used for query `query_id`, iteration `iteration` under `master_seed`.
std::uint64_t evaluation_seed(std::uint64_t master_seed, std::size_t query_id, std::size_t iteration) noexcept;

/// Fits a fresh local surrogate per (query, iteration) and scores g_i(O_i)
/// against f(O_i). pcfg.rng_seed is the master seed.
FidelityReport evaluate_fidelity(const Forecaster& f, std::span<const std::vector<double>> queries,
                                 std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                                 const KernelConfig& kcfg, std::size_t iterations, double ridge = kDefaultRidge);

struct AblationResult {
    FidelityReport without_distance;  ///< kernel None
    FidelityReport with_distance;     ///< the supplied (exponential) kernel
};

/// Paired comparison: each (query, iteration) draws one sample set and one
/// set of black-box outputs, then both arms fit on them.
AblationResult distance_ablation(const Forecaster& f, std::span<const std::vector<double>> queries,
                                 std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                                 const KernelConfig& with_kernel, std::size_t iterations,
                                 double ridge = kDefaultRidge);

struct GridOptions {
    std::string dataset = "dataset";
    std::vector<std::size_t> block_lengths{3, 4, 5};
    std::vector<std::size_t> block_swaps{2, 3, 4};
    std::vector<FeatureFamily> families{FeatureFamily::Lag, FeatureFamily::RollingWindow,
                                        FeatureFamily::ExpandingWindow};
    std::size_t iterations = 5;
    PerturbationConfig base;  ///< sample count, MA window, seed
    KernelConfig kernel;
    double ridge = kDefaultRidge;
};

struct GridKey {
    std::size_t block_length = 0;
    std::size_t block_swap = 0;
    FeatureFamily family = FeatureFamily::Lag;

    friend auto operator<=>(const GridKey&, const GridKey&) = default;
};

struct GridCell {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;

    [[nodiscard]] double metric(Metric m) const noexcept;
};

struct GridResult {
    std::string dataset;
    std::map<GridKey, GridCell> cells;

    /// Argmin of `metric` within `family`; ties go to the smaller swap, then
    /// the smaller block length.
    [[nodiscard]] GridKey best(FeatureFamily family, Metric metric) const;
};

/// Every (block length, swap, family) combination, each scored by
/// evaluate_fidelity over `queries`. Cell metrics are the mean of the
/// per-iteration metrics.
GridResult run_grid(const Forecaster& f, std::span<const std::vector<double>> queries, const GridOptions& opts);

/// Table-shaped CSV: dataset,block_length,block_swap,family,MAE,RMSE,MAPE,best
void write_grid_csv(std::ostream& out, const GridResult& grid, bool header = true);

/// dataset,family,distance,MAE,RMSE,MAPE
void write_ablation_csv(std::ostream& out, std::string_view dataset,
                        std::span<const std::pair<FeatureFamily, AblationResult>> rows, bool header = true);

std::string report_to_json(const FidelityReport& r, int indent = 2);

// ---------------------------------------------------------------------------
// Mann-Whitney U

struct MannWhitneyResult {
    double u_a = 0.0;  ///< pairs (a, b) with a > b, plus half of the ties
    double u_b = 0.0;
    double z = 0.0;
    double p_value = 1.0;  ///< two-sided, normal approximation
};

/// Rank-sum U with midranks; p from the tie-corrected normal approximation
/// with continuity correction. Throws MetricError for empty inputs or when
/// every value is identical.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Two-sided p for a given U. `tie_term` is sum(t^3 - t) over tie groups.
double mann_whitney_p_value(double u, std::size_t n1, std::size_t n2, double tie_term = 0.0);

}  // namespace tsfl
