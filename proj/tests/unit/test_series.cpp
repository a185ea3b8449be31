#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/rng.hpp"
#include "tsfeatlime/series.hpp"

using namespace tsfl;

namespace {

std::vector<double> vals(const Series& s) { return {s.values().begin(), s.values().end()}; }

const char* kToyCsv =
    "date,value\n"
    "2016-01-01,10\n2016-02-01,20\n2016-03-01,30\n2016-04-01,40\n2016-05-01,50\n2016-06-01,60\n";

}  // namespace

TEST_CASE("load_csv reads the toy series") {
    const auto path = std::filesystem::temp_directory_path() / "tsfl_toy.csv";
    {
        std::ofstream out(path);
        out << kToyCsv;
    }
    const Series s = load_csv(path.string(), "date", "value");
    CHECK(vals(s) == std::vector<double>{10, 20, 30, 40, 50, 60});
    CHECK(format_date(s.timestamps().front()) == "2016-01-01");
    std::filesystem::remove(path);
}

TEST_CASE("CSV rows are sorted by timestamp") {
    const Series s = parse_series_csv("value,date\n30,2016-03-01\n10,2016-01-01\n20,2016-02-01\n", "date", "value");
    CHECK(vals(s) == std::vector<double>{10, 20, 30});
}

TEST_CASE("CSV quoting follows RFC 4180") {
    const Series s =
        parse_series_csv("\"date\",\"note\",value\r\n2016-01-01,\"a, \"\"quoted\"\" note\",1.5\r\n", "date", "value");
    CHECK(vals(s) == std::vector<double>{1.5});
}

TEST_CASE("CSV ingestion errors") {
    SUBCASE("non-numeric value names the row") {
        try {
            parse_series_csv("date,value\n2016-01-01,1\n2016-02-01,abc\n", "date", "value");
            FAIL("expected IngestionError");
        } catch (const IngestionError& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }
    SUBCASE("thousands separators are not numbers") {
        CHECK_THROWS_AS(parse_series_csv("date,value\n2016-01-01,\"1,000\"\n", "date", "value"), IngestionError);
    }
    SUBCASE("missing column is a configuration error") {
        CHECK_THROWS_AS(parse_series_csv("date,value\n2016-01-01,1\n", "date", "sales"), ConfigError);
    }
    SUBCASE("duplicate timestamps") {
        CHECK_THROWS_AS(parse_series_csv("date,value\n2016-01-01,1\n2016-01-01,2\n", "date", "value"),
                        IngestionError);
    }
    SUBCASE("bad date") {
        CHECK_THROWS_AS(parse_series_csv("date,value\n2016-02-30,1\n", "date", "value"), IngestionError);
        CHECK_THROWS_AS(parse_series_csv("date,value\n01/02/2016,1\n", "date", "value"), IngestionError);
    }
}

TEST_CASE("resample_monthly averages each calendar month") {
    using namespace std::chrono;
    SUBCASE("two January days") {
        const Series s({Date{2016y / 1 / 3}, Date{2016y / 1 / 20}}, {2, 4});
        const Series m = resample_monthly(s);
        REQUIRE(m.size() == 1);
        CHECK(m.values()[0] == 3.0);
        CHECK(format_date(m.timestamps()[0]) == "2016-01-01");
    }
    SUBCASE("constant month") {
        std::vector<Date> ts;
        for (unsigned d = 1; d <= 31; ++d) ts.emplace_back(2016y / 3 / day{d});
        const Series m = resample_monthly(Series(ts, std::vector<double>(31, 7.0)));
        REQUIRE(m.size() == 1);
        CHECK(m.values()[0] == 7.0);
    }
    SUBCASE("idempotent on monthly data") {
        const Series s = Series::monthly({1, 5, 2, 8, 3}, Date{2015y / 11 / 1});
        CHECK(resample_monthly(s) == s);
        CHECK(resample_monthly(resample_monthly(s)) == s);
    }
    SUBCASE("a missing month is a gap") {
        const Series s({Date{2016y / 1 / 5}, Date{2016y / 3 / 5}}, {1, 2});
        CHECK_THROWS_AS(resample_monthly(s), GapError);
    }
}

TEST_CASE("minmax_normalize") {
    const Series s = Series::monthly({10, 20, 30, 40, 50, 60});
    const auto [n, state] = minmax_normalize(s);
    const std::vector<double> expected{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(n.values()[i] == doctest::Approx(expected[i]).epsilon(1e-15));
    CHECK_THROWS_AS(minmax_normalize(Series::monthly({3, 3, 3})), DegenerateRangeError);
}

TEST_CASE("normalization round trip property") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(2 + rng.below(40));
        for (double& x : v) x = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(7)));
        if (v[0] == v[1]) v[1] += 1.0;
        const Series s = Series::monthly(v);
        const auto [n, state] = minmax_normalize(s);
        const Series back = denormalize(n, state);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(n.values()[i] >= 0.0);
            CHECK(n.values()[i] <= 1.0);
            CHECK(std::abs(back.values()[i] - v[i]) <= 1e-12 * std::max(1.0, std::abs(state.max - state.min)));
        }
    }
}

TEST_CASE("last_window") {
    const Series s = Series::monthly({10, 20, 30, 40, 50, 60});
    CHECK(last_window(s, 6) == s);
    CHECK(vals(last_window(s, 3)) == std::vector<double>{40, 50, 60});
    CHECK_THROWS_AS(last_window(s, 7), InsufficientHistoryError);
}

TEST_CASE("series invariants are enforced") {
    using namespace std::chrono;
    CHECK_THROWS_AS(Series({Date{2016y / 1 / 1}}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Series({Date{2016y / 2 / 1}, Date{2016y / 1 / 1}}, {1.0, 2.0}), IngestionError);
    CHECK_THROWS_AS(Series::monthly({1.0, std::nan("")}), IngestionError);
}
