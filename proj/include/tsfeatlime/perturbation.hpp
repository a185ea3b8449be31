#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tsfl {

/// Moving block bootstrap parameters.
struct PerturbationConfig {
    std::size_t block_length = 5;   ///< residual block width
    std::size_t block_swap = 2;     ///< number of pairwise swap rounds per sample
    std::size_t sample_count = 1000;
    std::size_t ma_window = 3;      ///< centered moving-average width, odd
    std::uint64_t rng_seed = 42;

    /// Throws ConfigError unless the configuration is usable on a window of
    /// length q: l <= q, m odd, p > 0, and 2l <= q whenever swaps are requested.
    void validate(std::size_t q) const;

    friend bool operator==(const PerturbationConfig&, const PerturbationConfig&) = default;
};

/// Window split into moving average and residual, both of the window's length.
struct Decomposition {
    std::vector<double> moving_average;
    std::vector<double> residual;
};

/// Centered moving average of nominal width m (odd). Near the edges the
/// averaging window is clipped to the available observations.
Decomposition decompose(std::span<const double> window, std::size_t ma_window);

/// 1-based start indices of every contiguous residual block of length l
/// (q - l + 1 of them).
std::vector<std::size_t> enumerate_blocks(std::span<const double> residual, std::size_t block_length);

/// One bootstrap sample. Runs `block_swap` rounds; each round draws an
/// unordered pair of non-overlapping block starts uniformly (rejection
/// sampling) and exchanges the two residual segments. The result is
/// M + swapped R. Depends only on (cfg.rng_seed, draw_index).
std::vector<double> mbb_sample(std::span<const double> window, const PerturbationConfig& cfg,
                               std::uint64_t draw_index);

/// Same as above with a precomputed decomposition.
std::vector<double> mbb_sample(const Decomposition& dec, const PerturbationConfig& cfg,
                               std::uint64_t draw_index);

struct SampleSet {
    std::vector<std::vector<double>> samples;
    PerturbationConfig config;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    /// FNV-1a over the raw bytes of every sample; used to prove that two
    /// evaluation arms saw the same perturbations.
    [[nodiscard]] std::uint64_t hash() const noexcept;
};

/// p samples; sample i is mbb_sample(window, cfg, i).
SampleSet generate_samples(std::span<const double> window, const PerturbationConfig& cfg);

/// Header t1..tq, then one sample per line at round-trip precision.
void write_samples_csv(std::ostream& out, const SampleSet& set);

}  // namespace tsfl
