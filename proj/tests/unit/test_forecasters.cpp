#include <cmath>

#include "../oracles/oracles.hpp"
#include "doctest.h"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/forecasters.hpp"
#include "tsfeatlime/synthetic.hpp"

using namespace tsfl;

namespace {

std::vector<double> ar_series(const std::vector<double>& coef, double intercept, std::vector<double> start,
                              std::size_t n) {
    std::vector<double> y = std::move(start);
    while (y.size() < n) {
        double v = intercept;
        for (std::size_t i = 0; i < coef.size(); ++i) v += coef[i] * y[y.size() - 1 - i];
        y.push_back(v);
    }
    return y;
}

const std::string kEchoLast = std::string(TSFL_SOURCE_DIR) + "/tools/adapters/echo_last.sh";

}  // namespace

TEST_CASE("ar_fit recovers generating coefficients") {
    SUBCASE("AR(1) with coefficient 0.5") {
        const auto y = ar_series({0.5}, 0.0, {1.0}, 30);
        const ARModel m = ar_fit(y, 1);
        CHECK(std::abs(m.coefficients[0] - 0.5) < 1e-8);
        CHECK(std::abs(m.intercept) < 1e-8);
    }
    SUBCASE("orders up to three") {
        const std::vector<std::vector<double>> cases{{1.6, -0.9}, {0.4, 0.3, -0.5}, {-0.7}};
        for (const auto& coef : cases) {
            const std::vector<double> start{0.3, -1.1, 0.8};
            const auto y = ar_series(coef, 0.2, {start.begin(), start.begin() + static_cast<long>(coef.size())}, 60);
            const ARModel m = ar_fit(y, coef.size());
            for (std::size_t i = 0; i < coef.size(); ++i) CHECK(std::abs(m.coefficients[i] - coef[i]) < 1e-6);
            CHECK(std::abs(m.intercept - 0.2) < 1e-6);
        }
    }
    SUBCASE("constant series forecasts its value") {
        const ARModel m = ar_fit(std::vector<double>(20, 3.0), 1);
        CHECK(std::abs(ar_predict(m, std::vector<double>(5, 3.0)) - 3.0) < 1e-8);
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS(ar_fit(std::vector<double>{1, 2, 3}, 3), FitError);
        CHECK_THROWS_AS(ar_fit(std::vector<double>{1, 2}, 1), FitError);
    }
}

TEST_CASE("ar_predict") {
    CHECK(ar_predict({{1.0}, 0.0}, std::vector<double>{1, 2, 3}) == 3.0);
    CHECK(ar_predict({{0.5}, 0.0}, std::vector<double>{4, 10}) == 5.0);
    CHECK(ar_predict({{0.0, 1.0}, 0.0}, std::vector<double>{1, 7, 9}) == 7.0);
    CHECK_THROWS_AS(ar_predict({{0.0, 1.0}, 0.0}, std::vector<double>{1}), DimensionError);
}

TEST_CASE("Holt-Winters") {
    SUBCASE("linear trend without seasonality") {
        const std::size_t n = 48;
        std::vector<double> y;
        for (std::size_t t = 1; t <= n; ++t) y.push_back(2.0 * static_cast<double>(t));
        const HoltWintersParams p{0.9, 0.9, std::nullopt, 0};
        const double f = hw_fit_predict(std::span<const double>(y).first(n - 12), p,
                                        std::span<const double>(y).last(12));
        CHECK(std::abs(f - 2.0 * (n + 1)) <= 0.02 * 2.0 * (n + 1));
        CHECK(f == doctest::Approx(oracle::holt_linear_forecast(y, 0.9, 0.9)).epsilon(1e-12));
    }
    SUBCASE("constant series") {
        const std::vector<double> y(36, 5.0);
        const HoltWintersParams p{0.3, 0.2, 0.4, 12};
        CHECK(std::abs(hw_fit_predict(y, p, std::vector<double>(12, 5.0)) - 5.0) < 1e-6);
    }
    SUBCASE("pure seasonal pattern is continued") {
        std::vector<double> y;
        for (int t = 0; t < 48; ++t) y.push_back(10.0 + (t % 4 == 0 ? 3.0 : -1.0));
        const HoltWintersParams p{0.2, 0.1, 0.3, 4};
        const HoltWintersForecaster f(y, p);
        CHECK(f.predict(std::vector<double>{}) == doctest::Approx(13.0).epsilon(1e-9));
    }
    SUBCASE("needs two seasons") {
        CHECK_THROWS_AS(hw_fit(std::vector<double>(12, 1.0), {0.5, 0.5, 0.5, 12}), FitError);
    }
    SUBCASE("parameters must lie inside (0, 1)") {
        CHECK_THROWS_AS(hw_fit(std::vector<double>(30, 1.0), {1.0, 0.5, 0.5, 12}), ConfigError);
    }
}

TEST_CASE("external adapter") {
    const std::vector<double> window{0.1, 0.25, 0.5};
    SUBCASE("reference adapter echoes the last value") {
        const ExternalForecaster f({kEchoLast, std::chrono::milliseconds{5000}});
        CHECK(external_forecast(f, window) == 0.5);
        CHECK(f.predict(std::vector<double>{1.0, 2.0 / 3.0}) == 2.0 / 3.0);  // full precision on the wire
        CHECK(f.predict(window) == 0.5);  // process is reused
    }
    SUBCASE("non-numeric response") {
        const ExternalForecaster f({"while read l; do echo nope; done", std::chrono::milliseconds{5000}});
        CHECK_THROWS_AS((void)f.predict(window), AdapterError);
    }
    SUBCASE("adapter-side error line") {
        const ExternalForecaster f({"while read l; do echo 'ERR model not loaded'; done", std::chrono::milliseconds{5000}});
        try {
            [[maybe_unused]] const double v = f.predict(window);
            FAIL("expected AdapterError");
        } catch (const AdapterError& e) {
            CHECK(std::string(e.what()).find("model not loaded") != std::string::npos);
        }
    }
    SUBCASE("timeout") {
        const ExternalForecaster f({"sleep 5", std::chrono::milliseconds{200}});
        CHECK_THROWS_AS((void)f.predict(window), AdapterTimeout);
    }
    SUBCASE("nonzero exit") {
        const ExternalForecaster f({"read l; exit 3", std::chrono::milliseconds{5000}});
        try {
            [[maybe_unused]] const double v = f.predict(window);
            FAIL("expected AdapterError");
        } catch (const AdapterError& e) {
            CHECK(std::string(e.what()).find("status 3") != std::string::npos);
        }
    }
    SUBCASE("wire format") {
        CHECK(format_adapter_request(std::vector<double>{1, 0.5, -2}) == "1,0.5,-2");
        CHECK(parse_adapter_response(" 1.5e-3\r") == 1.5e-3);
        CHECK_THROWS_AS(parse_adapter_response(""), AdapterError);
    }
}

TEST_CASE("model specs") {
    CHECK(std::get<ARSpec>(parse_model_spec("ar:3")).order == 3);
    const auto hw = std::get<HoltWintersParams>(parse_model_spec("hw:0.5,0.1,0.2,12"));
    CHECK(hw.gamma == 0.2);
    CHECK(hw.season_length == 12);
    CHECK_FALSE(std::get<HoltWintersParams>(parse_model_spec("hw:0.9,0.9,0,0")).gamma.has_value());
    CHECK(std::get<ExternalSpec>(parse_model_spec("ext:python3 model.py --flag")).config.command ==
          "python3 model.py --flag");
    CHECK(std::holds_alternative<LastValueSpec>(parse_model_spec("last")));
    CHECK_THROWS_AS(parse_model_spec("ar:0"), ConfigError);
    CHECK_THROWS_AS(parse_model_spec("lstm:3"), ConfigError);
    CHECK_THROWS_AS(parse_model_spec("hw:0.5,0.1"), ConfigError);
}

TEST_CASE("every forecaster is deterministic") {
    std::vector<double> train;
    for (int t = 0; t < 40; ++t) train.push_back(std::sin(t * 0.5) + 0.01 * t);
    const std::vector<double> window(train.end() - 12, train.end());
    for (const char* spec : {"ar:2", "hw:0.4,0.2,0.3,6", "last", "quad"}) {
        const auto f = make_forecaster(parse_model_spec(spec), train);
        CHECK(f->predict(window) == f->predict(window));
    }
    const auto ext = make_forecaster(parse_model_spec("ext:" + kEchoLast), train);
    CHECK(ext->predict(window) == ext->predict(window));
}

TEST_CASE("benchmark series stays bounded and is seed-reproducible") {
    const Series a = generate_benchmark_series(240, 5);
    const Series b = generate_benchmark_series(240, 5);
    CHECK(a == b);
    for (double v : a.values()) {
        CHECK(v > -0.5);
        CHECK(v < 1.5);
    }
    CHECK_FALSE(generate_benchmark_series(240, 6) == a);
    const auto q = query_windows(a.values(), 12, 20);
    CHECK(q.size() == 20);
    CHECK(q.back() == std::vector<double>(a.values().end() - 12, a.values().end()));
}
