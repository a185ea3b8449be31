#include "tsfeatlime/perturbation.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <ostream>

#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/rng.hpp"

namespace tsfl {

void PerturbationConfig::validate(std::size_t q) const {
    if (q == 0) throw ConfigError("queried window is empty");
    if (block_length == 0) throw ConfigError("block length must be positive");
    if (sample_count == 0) throw ConfigError("sample count must be positive");
    if (ma_window == 0 || ma_window % 2 == 0) {
        throw ConfigError("moving-average window must be a positive odd number, got " +
                          std::to_string(ma_window));
    }
    if (block_length > q) {
        throw ConfigError("block length " + std::to_string(block_length) + " exceeds window length " +
                          std::to_string(q));
    }
    if (block_swap > 0 && 2 * block_length > q) {
        throw ConfigError("no non-overlapping block pair exists: need 2*block_length <= " +
                          std::to_string(q) + ", got block length " + std::to_string(block_length));
    }
}

Decomposition decompose(std::span<const double> window, std::size_t ma_window) {
    if (ma_window == 0 || ma_window % 2 == 0) throw ConfigError("moving-average window must be odd");
    const std::size_t q = window.size();
    const std::size_t half = ma_window / 2;
    Decomposition d;
    d.moving_average.resize(q);
    d.residual.resize(q);
    for (std::size_t t = 0; t < q; ++t) {
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(q - 1, t + half);
        double sum = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) sum += window[i];
        d.moving_average[t] = sum / static_cast<double>(hi - lo + 1);
        d.residual[t] = window[t] - d.moving_average[t];
    }
    return d;
}

std::vector<std::size_t> enumerate_blocks(std::span<const double> residual, std::size_t block_length) {
    if (block_length == 0 || block_length > residual.size()) {
        throw ConfigError("block length must be in [1, " + std::to_string(residual.size()) + "]");
    }
    std::vector<std::size_t> starts(residual.size() - block_length + 1);
    for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = i + 1;
    return starts;
}

std::vector<double> mbb_sample(const Decomposition& dec, const PerturbationConfig& cfg,
                               std::uint64_t draw_index) {
    const std::size_t q = dec.residual.size();
    cfg.validate(q);
    std::vector<double> r = dec.residual;
    if (cfg.block_swap > 0) {
        const std::size_t l = cfg.block_length;
        const std::uint64_t n_blocks = q - l + 1;
        Rng rng(derive_seed(cfg.rng_seed, draw_index));
        for (std::size_t round = 0; round < cfg.block_swap; ++round) {
            std::size_t i = 0;
            std::size_t j = 0;
            do {
                i = rng.below(n_blocks);
                j = rng.below(n_blocks);
            } while ((i > j ? i - j : j - i) < l);
            std::swap_ranges(r.begin() + static_cast<std::ptrdiff_t>(i),
                             r.begin() + static_cast<std::ptrdiff_t>(i + l),
                             r.begin() + static_cast<std::ptrdiff_t>(j));
        }
    }
    for (std::size_t t = 0; t < q; ++t) r[t] += dec.moving_average[t];
    return r;
}

std::vector<double> mbb_sample(std::span<const double> window, const PerturbationConfig& cfg,
                               std::uint64_t draw_index) {
    cfg.validate(window.size());
    if (cfg.block_swap == 0) return {window.begin(), window.end()};
    return mbb_sample(decompose(window, cfg.ma_window), cfg, draw_index);
}

std::uint64_t SampleSet::hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& s : samples) {
        for (double v : s) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof v);
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
        h ^= 0xff;  // sample boundary
        h *= 0x100000001b3ULL;
    }
    return h;
}

SampleSet generate_samples(std::span<const double> window, const PerturbationConfig& cfg) {
    cfg.validate(window.size());
    SampleSet set;
    set.config = cfg;
    set.samples.reserve(cfg.sample_count);
    if (cfg.block_swap == 0) {
        set.samples.assign(cfg.sample_count, std::vector<double>(window.begin(), window.end()));
        return set;
    }
    const Decomposition dec = decompose(window, cfg.ma_window);
    for (std::size_t i = 0; i < cfg.sample_count; ++i) set.samples.push_back(mbb_sample(dec, cfg, i));
    return set;
}

void write_samples_csv(std::ostream& out, const SampleSet& set) {
    const std::size_t q = set.samples.empty() ? 0 : set.samples.front().size();
    for (std::size_t j = 1; j <= q; ++j) out << (j > 1 ? "," : "") << 't' << j;
    out << '\n';
    char buf[32];
    for (const auto& s : set.samples) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", s[j]);
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace tsfl
