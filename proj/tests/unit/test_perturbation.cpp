#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "../oracles/oracles.hpp"
#include "doctest.h"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/perturbation.hpp"
#include "tsfeatlime/rng.hpp"
#include "tsfeatlime/surrogate.hpp"

using namespace tsfl;

namespace {

const std::vector<double> kWindow{0.31, 0.42, 0.38, 0.55, 0.61, 0.47, 0.52, 0.70, 0.66, 0.58, 0.74, 0.81};

bool same_multiset(std::vector<double> a, std::vector<double> b, double tol) {
    if (a.size() != b.size()) return false;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("decompose") {
    SUBCASE("constant window") {
        const auto d = decompose(std::vector<double>{7, 7, 7, 7}, 3);
        CHECK(d.moving_average == std::vector<double>{7, 7, 7, 7});
        CHECK(d.residual == std::vector<double>{0, 0, 0, 0});
    }
    SUBCASE("edge clipping on (10, 20, 30)") {
        const std::vector<double> w{10, 20, 30};
        const auto d = decompose(w, 3);
        const auto expected = oracle::moving_average(w, 3);
        REQUIRE(expected == std::vector<double>{15, 20, 25});
        CHECK(d.moving_average == expected);
        CHECK(d.residual == std::vector<double>{-5, 0, 5});
    }
    SUBCASE("m = 1 is the identity") {
        const auto d = decompose(kWindow, 1);
        CHECK(d.moving_average == kWindow);
        CHECK(std::all_of(d.residual.begin(), d.residual.end(), [](double r) { return r == 0.0; }));
    }
    SUBCASE("matches the oracle and reconstructs") {
        for (std::size_t m : {1u, 3u, 5u, 7u, 13u}) {
            const auto d = decompose(kWindow, m);
            const auto ma = oracle::moving_average(kWindow, m);
            for (std::size_t i = 0; i < kWindow.size(); ++i) {
                CHECK(d.moving_average[i] == doctest::Approx(ma[i]).epsilon(1e-14));
                CHECK(std::abs(d.moving_average[i] + d.residual[i] - kWindow[i]) <= 1e-12);
            }
        }
    }
    SUBCASE("even width rejected") { CHECK_THROWS_AS(decompose(kWindow, 2), ConfigError); }
}

TEST_CASE("enumerate_blocks") {
    CHECK(enumerate_blocks(std::vector<double>(12), 5).size() == 8);
    CHECK(enumerate_blocks(std::vector<double>(6), 6) == std::vector<std::size_t>{1});
    CHECK(enumerate_blocks(std::vector<double>(6), 1) == std::vector<std::size_t>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("PerturbationConfig validation") {
    PerturbationConfig c{5, 2, 10, 3, 1};
    CHECK_NOTHROW(c.validate(12));
    CHECK_NOTHROW(c.validate(10));
    CHECK_THROWS_AS(c.validate(9), ConfigError);  // no non-overlapping pair
    c.block_swap = 0;
    CHECK_NOTHROW(c.validate(5));
    CHECK_THROWS_AS(c.validate(4), ConfigError);  // l > q
    c.ma_window = 4;
    CHECK_THROWS_AS(c.validate(12), ConfigError);
}

TEST_CASE("mbb_sample") {
    PerturbationConfig cfg{5, 2, 1, 3, 42};
    SUBCASE("s = 0 returns the window exactly") {
        cfg.block_swap = 0;
        CHECK(mbb_sample(kWindow, cfg, 3) == kWindow);
    }
    SUBCASE("deterministic per draw index") {
        CHECK(mbb_sample(kWindow, cfg, 17) == mbb_sample(kWindow, cfg, 17));
        std::set<std::vector<double>> distinct;
        for (std::uint64_t i = 0; i < 20; ++i) distinct.insert(mbb_sample(kWindow, cfg, i));
        CHECK(distinct.size() > 1);
    }
    SUBCASE("residual multiset preserved for any swap count") {
        const auto dec = decompose(kWindow, 3);
        for (std::size_t s = 0; s <= 6; ++s) {
            cfg.block_swap = s;
            for (std::uint64_t i = 0; i < 50; ++i) {
                const auto sample = mbb_sample(kWindow, cfg, i);
                REQUIRE(sample.size() == kWindow.size());
                std::vector<double> r(sample.size());
                for (std::size_t t = 0; t < r.size(); ++t) r[t] = sample[t] - dec.moving_average[t];
                CHECK(same_multiset(r, dec.residual, 1e-12));
            }
        }
    }
    SUBCASE("impossible pair is a configuration error") {
        cfg.block_length = 7;
        CHECK_THROWS_AS(mbb_sample(kWindow, cfg, 0), ConfigError);
    }
}

TEST_CASE("generate_samples") {
    PerturbationConfig cfg{5, 2, 1000, 3, 42};
    const SampleSet set = generate_samples(kWindow, cfg);
    CHECK(set.size() == 1000);
    CHECK(std::all_of(set.samples.begin(), set.samples.end(), [](const auto& s) { return s.size() == 12; }));
    CHECK(set.samples[123] == mbb_sample(kWindow, cfg, 123));
    const SampleSet again = generate_samples(kWindow, cfg);
    CHECK(again.samples == set.samples);
    CHECK(again.hash() == set.hash());

    cfg.rng_seed = 43;
    CHECK(generate_samples(kWindow, cfg).hash() != set.hash());

    cfg.block_swap = 0;
    cfg.sample_count = 3;
    const SampleSet copies = generate_samples(kWindow, cfg);
    CHECK(copies.samples == std::vector<std::vector<double>>(3, kWindow));
}

TEST_CASE("locality: mean distance grows with the swap count") {
    // Medians over 5 seeds of the mean sample-to-window distance.
    const std::vector<double> window{0.10, 0.80, 0.25, 0.90, 0.05, 0.70, 0.30, 0.95, 0.15, 0.60, 0.40, 0.85};
    std::vector<double> medians;
    for (std::size_t s = 0; s <= 4; ++s) {
        std::vector<double> per_seed;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const SampleSet set = generate_samples(window, {3, s, 400, 3, seed});
            double total = 0.0;
            for (const auto& sample : set.samples) total += euclidean_distance(window, sample);
            per_seed.push_back(total / static_cast<double>(set.size()));
        }
        std::sort(per_seed.begin(), per_seed.end());
        medians.push_back(per_seed[2]);
    }
    CHECK(medians[0] == 0.0);
    for (std::size_t s = 1; s < medians.size(); ++s) CHECK(medians[s] >= medians[s - 1]);
}

TEST_CASE("sample export writes a header and one line per sample") {
    const SampleSet set = generate_samples(kWindow, {5, 2, 4, 3, 9});
    std::ostringstream out;
    write_samples_csv(out, set);
    std::istringstream in(out.str());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(std::count(line.begin(), line.end(), ',') == 11);
    }
    CHECK(lines == 5);
    CHECK(out.str().rfind("t1,t2,t3,t4,t5,t6,t7,t8,t9,t10,t11,t12\n", 0) == 0);
    // Round-trip precision.
    std::istringstream first(out.str());
    std::getline(first, line);
    std::getline(first, line);
    CHECK(std::stod(line.substr(0, line.find(','))) == set.samples[0][0]);
}

TEST_CASE("rng bounded draws are uniform enough") {
    Rng rng(1);
    std::vector<int> counts(8, 0);
    for (int i = 0; i < 80000; ++i) ++counts[rng.below(8)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}
