#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "tsfeatlime/csv.hpp"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/evaluation.hpp"
#include "tsfeatlime/forecasters.hpp"
#include "tsfeatlime/http_service.hpp"
#include "tsfeatlime/synthetic.hpp"

using namespace tsfl;
using nlohmann::json;

namespace {

struct StudyFixture {
    std::int64_t clock_ms = 1'000'000;

    std::unique_ptr<ExerciseStudy> make(std::shared_ptr<const Forecaster> f = nullptr, StudyConfig cfg = {}) {
        const Series raw = generate_benchmark_series(60, 17);
        auto [norm, scale] = minmax_normalize(raw);
        if (!f) f = std::make_shared<QuadraticARForecaster>();
        cfg.perturbation.sample_count = 150;
        return std::make_unique<ExerciseStudy>(norm, scale, std::move(f), cfg, [this] { return clock_ms += 1500; });
    }
};

std::filesystem::path temp_log(const char* name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST_CASE("classify_change") {
    CHECK(classify_change(0.2, 0.1) == Verdict::GoUp);
    CHECK(classify_change(-0.2, 0.1) == Verdict::GoDown);
    CHECK(classify_change(0.1, 0.1) == Verdict::RemainStable);
    CHECK(classify_change(0.0, 0.0) == Verdict::RemainStable);
}

TEST_CASE("what-if with a last-value forecaster") {
    const std::vector<double> window{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const LastValueForecaster f;
    SurrogateModel g;
    g.feature_specs = {FeatureSpec::make_lag(1)};
    g.coefficients = {1.0};
    const auto up = evaluate_whatif(window, f, g, {12, Direction::Increase, 1.0}, 0.005);
    CHECK(up.verdict == Verdict::GoUp);
    CHECK(up.delta_black_box == 1.0);
    CHECK(up.delta_surrogate == 1.0);
    CHECK(evaluate_whatif(window, f, g, {12, Direction::Decrease, 1.0}, 0.005).verdict == Verdict::GoDown);
    const auto stable = evaluate_whatif(window, f, g, {1, Direction::Increase, 1.0}, 0.005);
    CHECK(stable.verdict == Verdict::RemainStable);
    CHECK(stable.delta_black_box == 0.0);
    CHECK_THROWS_AS(evaluate_whatif(window, f, g, {13, Direction::Increase, 1.0}, 0.005), ValidationError);
    CHECK_THROWS_AS(evaluate_whatif(window, f, g, {0, Direction::Increase, 1.0}, 0.005), ValidationError);
    CHECK_THROWS_AS(evaluate_whatif(window, f, g, {3, Direction::Increase, 0.0}, 0.005), ValidationError);
}

TEST_CASE_FIXTURE(StudyFixture, "sessions and rounds") {
    auto study = make();
    const auto control = study->create_session(Group::Control, "p-1", Background::CS);
    const auto treatment = study->create_session(Group::Treatment, "p-2");
    CHECK(control.id != treatment.id);
    CHECK(control.rounds.size() == 4);
    for (const auto& r : control.rounds) {
        CHECK(r.questions.size() == 2);
        CHECK(r.questions[0].query.month != r.questions[1].query.month);
        CHECK(r.questions[0].text.find("would the prediction result go up, remain stable or go down?") !=
              std::string::npos);
    }
    CHECK(control.rounds[0].family == FeatureFamily::Lag);
    CHECK(control.rounds[1].family == FeatureFamily::RollingWindow);

    SUBCASE("control sees no explanation") {
        const auto v = study->round_view(control.id, 1);
        CHECK_FALSE(v.explanation.has_value());
        CHECK(v.history.size() == 12);
        const auto j = json::parse(round_view_to_json(v));
        CHECK_FALSE(j.contains("explanation"));
        CHECK(j["chart"]["history"].size() == 12);
    }
    SUBCASE("treatment sees coefficients and the sign rule") {
        const auto v = study->round_view(treatment.id, 1);
        REQUIRE(v.explanation.has_value());
        CHECK(v.explanation->contributions.size() == 12);
        CHECK(v.explanation->contributions[0].label == "Lag_1");
        CHECK(v.explanation->rule_text == sign_rule_text());
        const auto j = json::parse(round_view_to_json(v));
        CHECK(j["explanation"]["features"].size() == 12);
        CHECK(j["explanation"]["features"][0].contains("coefficient"));
    }
    SUBCASE("same participant seed gives the same questions") {
        const auto again = study->create_session(Group::Treatment, "p-1");
        for (std::size_t r = 0; r < 4; ++r) {
            CHECK(again.rounds[r].window_end == control.rounds[r].window_end);
            CHECK(again.rounds[r].questions[0].text == control.rounds[r].questions[0].text);
        }
        const auto seeded_a = study->create_session(Group::Control, "x", Background::NonCS, 5);
        const auto seeded_b = study->create_session(Group::Control, "y", Background::NonCS, 5);
        CHECK(seeded_a.rounds[2].questions[1].text == seeded_b.rounds[2].questions[1].text);
    }
    SUBCASE("unknown session and bad round") {
        CHECK_THROWS_AS((void)study->round_view("nope", 1), NotFoundError);
        CHECK_THROWS_AS((void)study->round_view(control.id, 5), ValidationError);
    }
}

TEST_CASE_FIXTURE(StudyFixture, "answers, scoring and export") {
    auto study = make();
    SUBCASE("export of an empty study is header-only") {
        CHECK(study->export_results() == "session,participant,group,background,score,answered,duration_s\n");
    }
    const auto t = study->create_session(Group::Treatment, "alice");
    const auto c = study->create_session(Group::Control, "bob");

    std::size_t expected_score = 0;
    for (std::size_t r = 1; r <= 4; ++r) {
        for (std::size_t q = 1; q <= 2; ++q) {
            const auto& query = t.rounds[r - 1].questions[q - 1].query;
            const auto truth = study->whatif(t.id, r, query.month, query.direction, query.magnitude).verdict;
            const Verdict pick = (r + q) % 2 == 0 ? truth : (truth == Verdict::GoUp ? Verdict::GoDown : Verdict::GoUp);
            const auto res = study->answer(t.id, r, q, pick);
            CHECK(res.correct == (pick == truth));
            CHECK(res.expected == truth);
            expected_score += res.correct;
            CHECK(res.score == expected_score);
            CHECK(res.feedback == sign_rule_text());
        }
    }
    CHECK(study->session(t.id).score() == expected_score);
    CHECK_THROWS_AS(study->answer(t.id, 1, 1, Verdict::GoUp), ConflictError);
    CHECK_THROWS_AS(study->answer(t.id, 1, 3, Verdict::GoUp), ValidationError);

    const auto control_answer = study->answer(c.id, 1, 1, Verdict::RemainStable);
    CHECK(control_answer.feedback.empty());

    const std::string csv = study->export_results();
    CHECK(csv.find(t.id + ",alice,Treatment,NonCS," + std::to_string(expected_score) + ",8,") != std::string::npos);
    CHECK(csv.find(c.id + ",bob,Control,NonCS,") != std::string::npos);
}

TEST_CASE_FIXTURE(StudyFixture, "exported scores feed the Mann-Whitney test") {
    auto study = make();
    std::vector<double> control_scores;
    std::vector<double> treatment_scores;
    for (int i = 0; i < 6; ++i) {
        for (Group g : {Group::Control, Group::Treatment}) {
            const auto s = study->create_session(g, "p" + std::to_string(i) + std::string(to_string(g)));
            // treatment answers truthfully on every question, control only on the first
            for (std::size_t r = 1; r <= 4; ++r) {
                for (std::size_t q = 1; q <= 2; ++q) {
                    const auto& query = s.rounds[r - 1].questions[q - 1].query;
                    const auto truth = study->whatif(s.id, r, query.month, query.direction, query.magnitude).verdict;
                    const bool honest = g == Group::Treatment || (r == 1 && q == 1) || (i % 2 == 0 && r == 2);
                    study->answer(s.id, r, q, honest ? truth : (truth == Verdict::GoDown ? Verdict::GoUp : Verdict::GoDown));
                }
            }
        }
    }
    const auto table = csv::parse(study->export_results());
    const auto groups = table.column("group");
    const auto scores = table.column("score");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        (row[groups] == "Control" ? control_scores : treatment_scores).push_back(std::stod(row[scores]));
    }
    REQUIRE(control_scores.size() == 6);
    const auto mw = mann_whitney_u(treatment_scores, control_scores);
    CHECK(mw.u_a == 36.0);
    CHECK(mw.p_value < 0.05);
}

TEST_CASE_FIXTURE(StudyFixture, "session log is append-only and replayed") {
    const auto path = temp_log("tsfl_service_log_test.jsonl");
    StudyConfig cfg;
    cfg.log_path = path.string();
    std::string first_id;
    std::string before;
    {
        auto study = make(nullptr, cfg);
        first_id = study->create_session(Group::Treatment, "carol", Background::CS).id;
        study->answer(first_id, 2, 1, Verdict::GoUp);
        study->answer(first_id, 3, 2, Verdict::GoDown);
        before = study->export_results();
    }
    std::string log_before;
    {
        std::ifstream in(path);
        log_before.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
        auto study = make(nullptr, cfg);
        CHECK(study->export_results() == before);
        CHECK(study->session(first_id).answers.size() == 2);
        CHECK_THROWS_AS(study->answer(first_id, 2, 1, Verdict::GoDown), ConflictError);
        study->answer(first_id, 4, 1, Verdict::RemainStable);
    }
    std::ifstream in(path);
    const std::string log_after(std::istreambuf_iterator<char>(in), {});
    CHECK(log_after.size() > log_before.size());
    CHECK(log_after.compare(0, log_before.size(), log_before) == 0);
    std::filesystem::remove(path);
}

TEST_CASE_FIXTURE(StudyFixture, "HTTP interface") {
    auto study = make();
    StudyServer server(*study);
    const int port = server.bind_any_port();
    REQUIRE(port > 0);
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto post = [&](const std::string& path, const json& body) { return cli.Post(path, body.dump(), "application/json"); };

    const auto created = post("/api/session", {{"group", "Treatment"}, {"participant", "dana"}, {"background", "CS"}});
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = json::parse(created->body)["session"];

    const auto control = post("/api/session", {{"group", "Control"}, {"participant", "eve"}});
    const std::string control_id = json::parse(control->body)["session"];

    SUBCASE("session and rounds") {
        const auto s = cli.Get("/api/session/" + id);
        REQUIRE(s);
        CHECK(s->status == 200);
        CHECK(json::parse(s->body)["background"] == "CS");
        const auto round = cli.Get("/api/session/" + id + "/round/2");
        const auto rj = json::parse(round->body);
        CHECK(rj["family"] == "RW");
        CHECK(rj["explanation"]["features"].size() == 3);
        CHECK_FALSE(json::parse(cli.Get("/api/session/" + control_id + "/round/1")->body).contains("explanation"));
    }
    SUBCASE("what-if") {
        const auto w = post("/api/whatif", {{"session", id}, {"round", 1}, {"t*", 12}, {"direction", "Increase"}, {"delta", 0.05}});
        REQUIRE(w);
        CHECK(w->status == 200);
        const auto wj = json::parse(w->body);
        CHECK(wj.contains("verdict"));
        CHECK(wj.contains("delta_surrogate"));
        const auto wc = post("/api/whatif", {{"session", control_id}, {"month", 3}, {"direction", "Decrease"}});
        CHECK_FALSE(json::parse(wc->body).contains("delta_surrogate"));
        const auto bad = post("/api/whatif", {{"session", id}, {"t*", 40}, {"direction", "Increase"}});
        CHECK(bad->status == 400);
        CHECK(json::parse(bad->body)["code"] == "validation");
    }
    SUBCASE("answers") {
        const json body{{"round", 1}, {"question", 1}, {"choice", "GoUp"}};
        const auto a = post("/api/session/" + id + "/answer", body);
        REQUIRE(a);
        CHECK(a->status == 200);
        CHECK(json::parse(a->body)["feedback"] == std::string(sign_rule_text()));
        const auto ca = post("/api/session/" + control_id + "/answer", body);
        CHECK(json::parse(ca->body)["feedback"] == "");
        CHECK(ca->body.find("coefficient") == std::string::npos);
        const auto dup = post("/api/session/" + id + "/answer", body);
        CHECK(dup->status == 409);
        CHECK(json::parse(dup->body)["code"] == "conflict");
        const auto bad_choice = post("/api/session/" + id + "/answer", {{"round", 1}, {"question", 2}, {"choice", "Maybe"}});
        CHECK(bad_choice->status == 400);
        const auto csv = cli.Get("/api/export");
        CHECK(csv->get_header_value("Content-Type") == "text/csv");
        CHECK(csv->body.find(id + ",dana,Treatment,CS,") != std::string::npos);
    }
    SUBCASE("errors") {
        CHECK(cli.Get("/api/session/missing")->status == 404);
        CHECK(json::parse(cli.Get("/api/session/missing")->body)["code"] == "not_found");
        CHECK(cli.Post("/api/session", "not json", "application/json")->status == 400);
        CHECK(post("/api/session", {{"group", "Placebo"}, {"participant", "x"}})->status == 400);
    }
    server.stop();
    thread.join();
}
