#include "tsfeatlime/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "json.hpp"
#include "tsfeatlime/csv.hpp"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/rng.hpp"

namespace tsfl {

using nlohmann::ordered_json;

std::string_view to_string(Group g) noexcept { return g == Group::Control ? "Control" : "Treatment"; }
std::string_view to_string(Background b) noexcept { return b == Background::CS ? "CS" : "NonCS"; }
std::string_view to_string(Direction d) noexcept { return d == Direction::Increase ? "Increase" : "Decrease"; }

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::GoUp: return "GoUp";
        case Verdict::RemainStable: return "RemainStable";
        case Verdict::GoDown: return "GoDown";
    }
    return "?";
}

Group parse_group(std::string_view text) {
    if (text == "Control" || text == "control") return Group::Control;
    if (text == "Treatment" || text == "treatment") return Group::Treatment;
    throw ValidationError("unknown group '" + std::string(text) + "' (expected Control or Treatment)");
}

Background parse_background(std::string_view text) {
    if (text == "CS" || text == "cs") return Background::CS;
    if (text == "NonCS" || text == "noncs" || text == "non-cs") return Background::NonCS;
    throw ValidationError("unknown background '" + std::string(text) + "' (expected CS or NonCS)");
}

Direction parse_direction(std::string_view text) {
    if (text == "Increase" || text == "increase" || text == "up") return Direction::Increase;
    if (text == "Decrease" || text == "decrease" || text == "down") return Direction::Decrease;
    throw ValidationError("unknown direction '" + std::string(text) + "' (expected Increase or Decrease)");
}

Verdict parse_verdict(std::string_view text) {
    if (text == "GoUp" || text == "go_up" || text == "up") return Verdict::GoUp;
    if (text == "RemainStable" || text == "remain_stable" || text == "stable") return Verdict::RemainStable;
    if (text == "GoDown" || text == "go_down" || text == "down") return Verdict::GoDown;
    throw ValidationError("unknown choice '" + std::string(text) + "' (expected GoUp, RemainStable or GoDown)");
}

Verdict classify_change(double delta, double eps) noexcept {
    if (delta > eps) return Verdict::GoUp;
    if (delta < -eps) return Verdict::GoDown;
    return Verdict::RemainStable;
}

WhatIfResult evaluate_whatif(std::span<const double> window, const Forecaster& f, const SurrogateModel& g,
                             const WhatIfQuery& query, double stability_fraction) {
    if (query.month < 1 || query.month > window.size()) {
        throw ValidationError("month " + std::to_string(query.month) + " is outside the displayed window 1.." +
                              std::to_string(window.size()));
    }
    if (!(query.magnitude > 0.0) || !std::isfinite(query.magnitude)) {
        throw ValidationError("perturbation magnitude must be positive");
    }
    std::vector<double> perturbed(window.begin(), window.end());
    perturbed[query.month - 1] += query.direction == Direction::Increase ? query.magnitude : -query.magnitude;

    WhatIfResult r;
    r.black_box_original = f.predict(window);
    r.black_box_perturbed = f.predict(perturbed);
    r.delta_black_box = r.black_box_perturbed - r.black_box_original;
    r.delta_surrogate = surrogate_predict(g, perturbed) - surrogate_predict(g, window);
    r.threshold = stability_fraction * std::abs(r.black_box_original);
    r.verdict = classify_change(r.delta_black_box, r.threshold);
    return r;
}

std::size_t ExerciseSession::score() const noexcept {
    return static_cast<std::size_t>(std::count_if(answers.begin(), answers.end(), [](const auto& a) { return a.correct; }));
}

const AnswerRecord* ExerciseSession::find_answer(std::size_t round, std::size_t question) const noexcept {
    for (const auto& a : answers) {
        if (a.round == round && a.question == question) return &a;
    }
    return nullptr;
}

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string month_label(Date d) {
    static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    const std::chrono::year_month_day ymd{d};
    return std::string(kMonths[static_cast<unsigned>(ymd.month()) - 1]) + " " +
           std::to_string(static_cast<int>(ymd.year()));
}

Date next_month(Date d) {
    const std::chrono::year_month_day ymd{d};
    const auto ym = std::chrono::year_month{ymd.year(), ymd.month()} + std::chrono::months{1};
    return Date{ym / std::chrono::day{1}};
}

}  // namespace

ExerciseStudy::ExerciseStudy(Series series, NormalizationState scale, std::shared_ptr<const Forecaster> f,
                             StudyConfig cfg, Clock clock)
    : series_(std::move(series)), scale_(scale), f_(std::move(f)), cfg_(std::move(cfg)), clock_(std::move(clock)) {
    if (!f_) throw ConfigError("study needs a forecaster");
    if (cfg_.window_length == 0 || series_.size() < cfg_.window_length) {
        throw InsufficientHistoryError("study series is shorter than the displayed window");
    }
    if (cfg_.rounds == 0 || cfg_.questions_per_round == 0) throw ConfigError("study needs rounds and questions");
    if (cfg_.questions_per_round > cfg_.window_length) {
        throw ConfigError("more questions per round than months in the window");
    }
    cfg_.perturbation.validate(cfg_.window_length);
    cfg_.kernel.validate();
    id_salt_ = std::random_device{}();
    id_salt_ = (id_salt_ << 32) ^ std::random_device{}();
    if (!cfg_.log_path.empty()) {
        replay_log();
        log_.open(cfg_.log_path, std::ios::app | std::ios::binary);
        if (!log_) throw StorageError("cannot open session log '" + cfg_.log_path + "'");
    }
}

ExerciseStudy::~ExerciseStudy() = default;

std::int64_t ExerciseStudy::now() const {
    if (clock_) return clock_();
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string ExerciseStudy::new_session_id() {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(id_salt_ + ++id_counter_)));
    return buf;
}

std::vector<Round> ExerciseStudy::plan_rounds(std::uint64_t seed) const {
    const std::size_t q = cfg_.window_length;
    const std::size_t ends = series_.size() - q + 1;  // window ends in [q, n]
    std::vector<Round> rounds;
    for (std::size_t r = 0; r < cfg_.rounds; ++r) {
        Rng rng(derive_seed(seed, r));
        Round round;
        round.index = r + 1;
        round.window_end = q + static_cast<std::size_t>(rng.below(ends));
        round.family = r % 2 == 0 ? FeatureFamily::Lag : FeatureFamily::RollingWindow;
        const auto window = series_.values().subspan(round.window_end - q, q);
        const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
        double magnitude = cfg_.magnitude_fraction * (*hi - *lo);
        if (!(magnitude > 0.0)) magnitude = cfg_.magnitude_fraction;
        std::vector<std::size_t> used;
        for (std::size_t k = 0; k < cfg_.questions_per_round; ++k) {
            std::size_t month = 0;
            do {
                month = 1 + static_cast<std::size_t>(rng.below(q));
            } while (std::find(used.begin(), used.end(), month) != used.end());
            used.push_back(month);
            const Direction dir = rng.below(2) == 0 ? Direction::Increase : Direction::Decrease;
            const Date when = series_.timestamps()[round.window_end - q + month - 1];
            Question question;
            question.query = {month, dir, magnitude};
            question.text = "If the value of " + month_label(when) + " was " +
                            (dir == Direction::Increase ? "increased" : "decreased") +
                            ", would the prediction result go up, remain stable or go down?";
            round.questions.push_back(std::move(question));
        }
        rounds.push_back(std::move(round));
    }
    return rounds;
}

ExerciseSession ExerciseStudy::create_session(Group group, std::string participant, Background background,
                                              std::optional<std::uint64_t> seed) {
    ExerciseSession s;
    s.group = group;
    s.background = background;
    s.seed = seed ? *seed : fnv1a(participant);
    s.participant = std::move(participant);
    s.rounds = plan_rounds(s.seed);

    std::lock_guard lock(mutex_);
    s.id = new_session_id();
    while (sessions_.contains(s.id)) s.id = new_session_id();
    s.created_at_ms = now();
    ordered_json rec = {{"type", "session"},
                        {"id", s.id},
                        {"group", to_string(s.group)},
                        {"participant", s.participant},
                        {"background", to_string(s.background)},
                        {"seed", s.seed},
                        {"created_at", s.created_at_ms}};
    append_log(rec.dump());
    sessions_.emplace(s.id, s);
    order_.push_back(s.id);
    return s;
}

const ExerciseSession& ExerciseStudy::find(const std::string& id) const {
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
}

const Round& ExerciseStudy::find_round(const ExerciseSession& s, std::size_t round) const {
    if (round < 1 || round > s.rounds.size()) {
        throw ValidationError("round must be in 1.." + std::to_string(s.rounds.size()));
    }
    return s.rounds[round - 1];
}

ExerciseSession ExerciseStudy::session(const std::string& id) const {
    std::lock_guard lock(mutex_);
    return find(id);
}

std::vector<ExerciseSession> ExerciseStudy::sessions() const {
    std::lock_guard lock(mutex_);
    std::vector<ExerciseSession> out;
    for (const auto& id : order_) out.push_back(sessions_.at(id));
    return out;
}

std::vector<double> ExerciseStudy::round_window(const Round& r) const {
    const auto v = series_.values().subspan(r.window_end - cfg_.window_length, cfg_.window_length);
    return {v.begin(), v.end()};
}

const SurrogateModel& ExerciseStudy::round_surrogate(const ExerciseSession&, const Round& r) const {
    const auto key = std::make_pair(static_cast<std::uint64_t>(r.window_end), static_cast<std::size_t>(r.family));
    const auto it = surrogate_cache_.find(key);
    if (it != surrogate_cache_.end()) return it->second;
    const auto window = round_window(r);
    const auto specs = default_family(r.family, cfg_.window_length);
    PerturbationConfig pcfg = cfg_.perturbation;
    pcfg.rng_seed = derive_seed(cfg_.perturbation.rng_seed, r.window_end);
    auto result = tsfeatlime_explain(window, *f_, specs, pcfg, cfg_.kernel, cfg_.ridge);
    return surrogate_cache_.emplace(key, std::move(result.model)).first->second;
}

RoundView ExerciseStudy::round_view(const std::string& id, std::size_t round) const {
    std::lock_guard lock(mutex_);
    const ExerciseSession& s = find(id);
    const Round& r = find_round(s, round);
    RoundView v;
    v.round = r.index;
    v.family = r.family;
    v.questions = r.questions;
    const std::size_t first = r.window_end - cfg_.window_length;
    for (std::size_t i = first; i < r.window_end; ++i) {
        v.history.push_back({format_date(series_.timestamps()[i]), scale_.denormalize(series_.values()[i])});
    }
    const auto window = round_window(r);
    v.predicted = {format_date(next_month(series_.timestamps()[r.window_end - 1])),
                   scale_.denormalize(f_->predict(window))};
    if (s.group == Group::Treatment) {
        const SurrogateModel& g = round_surrogate(s, r);
        ExplanationPayload p;
        for (std::size_t j = 0; j < g.coefficients.size(); ++j) {
            const double c = g.coefficients[j];
            p.contributions.push_back({g.feature_specs[j].label, c, (c > 0.0) - (c < 0.0)});
        }
        p.intercept = g.intercept;
        p.rule_text = std::string(sign_rule_text());
        v.explanation = std::move(p);
    }
    return v;
}

WhatIfResult ExerciseStudy::whatif(const std::string& id, std::size_t round, std::size_t month, Direction direction,
                                   std::optional<double> magnitude) const {
    std::lock_guard lock(mutex_);
    const ExerciseSession& s = find(id);
    const Round& r = find_round(s, round);
    const auto window = round_window(r);
    double delta = 0.0;
    if (magnitude) {
        delta = *magnitude;
    } else {
        const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
        delta = cfg_.magnitude_fraction * (*hi - *lo);
    }
    return evaluate_whatif(window, *f_, round_surrogate(s, r), {month, direction, delta}, cfg_.stability_fraction);
}

AnswerResult ExerciseStudy::answer(const std::string& id, std::size_t round, std::size_t question, Verdict choice) {
    std::lock_guard lock(mutex_);
    const ExerciseSession& s = find(id);
    const Round& r = find_round(s, round);
    if (question < 1 || question > r.questions.size()) {
        throw ValidationError("question must be in 1.." + std::to_string(r.questions.size()));
    }
    if (s.find_answer(round, question)) {
        throw ConflictError("round " + std::to_string(round) + " question " + std::to_string(question) +
                            " was already answered");
    }
    const auto window = round_window(r);
    const WhatIfResult w = evaluate_whatif(window, *f_, round_surrogate(s, r), r.questions[question - 1].query,
                                           cfg_.stability_fraction);
    AnswerRecord rec{round, question, choice, choice == w.verdict, now()};
    ordered_json line = {{"type", "answer"},   {"session", id},           {"round", round},
                         {"question", question}, {"choice", to_string(choice)}, {"correct", rec.correct},
                         {"at", rec.answered_at_ms}};
    append_log(line.dump());
    ExerciseSession& mut = sessions_.at(id);
    mut.answers.push_back(rec);

    AnswerResult out;
    out.correct = rec.correct;
    out.expected = w.verdict;
    out.score = mut.score();
    if (mut.group == Group::Treatment) {
        out.feedback = std::string(sign_rule_text());
    }
    return out;
}

std::string ExerciseStudy::export_results() const {
    std::lock_guard lock(mutex_);
    std::ostringstream out;
    out << "session,participant,group,background,score,answered,duration_s\n";
    for (const auto& id : order_) {
        const ExerciseSession& s = sessions_.at(id);
        std::int64_t last = s.created_at_ms;
        for (const auto& a : s.answers) last = std::max(last, a.answered_at_ms);
        char dur[32];
        std::snprintf(dur, sizeof dur, "%.3f", static_cast<double>(last - s.created_at_ms) / 1000.0);
        out << s.id << ',' << csv::escape(s.participant) << ',' << to_string(s.group) << ','
            << to_string(s.background) << ',' << s.score() << ',' << s.answers.size() << ',' << dur << '\n';
    }
    return out.str();
}

void ExerciseStudy::append_log(const std::string& line) {
    if (!log_.is_open()) return;
    log_ << line << '\n';
    log_.flush();
    if (!log_) throw StorageError("failed to append to session log '" + cfg_.log_path + "'");
}

void ExerciseStudy::replay_log() {
    std::ifstream in(cfg_.log_path, std::ios::binary);
    if (!in) return;  // fresh log
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const std::string type = j.at("type");
            if (type == "session") {
                ExerciseSession s;
                s.id = j.at("id");
                s.group = parse_group(j.at("group").get<std::string>());
                s.participant = j.at("participant");
                s.background = parse_background(j.at("background").get<std::string>());
                s.seed = j.at("seed");
                s.created_at_ms = j.at("created_at");
                s.rounds = plan_rounds(s.seed);
                order_.push_back(s.id);
                sessions_.emplace(s.id, std::move(s));
            } else if (type == "answer") {
                auto& s = sessions_.at(j.at("session").get<std::string>());
                s.answers.push_back({j.at("round"), j.at("question"),
                                     parse_verdict(j.at("choice").get<std::string>()), j.at("correct"),
                                     j.at("at")});
            }
        } catch (const std::exception& e) {
            throw StorageError("session log '" + cfg_.log_path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

// ---------------------------------------------------------------------------

std::string session_to_json(const ExerciseSession& s) {
    ordered_json answers = ordered_json::array();
    for (const auto& a : s.answers) {
        answers.push_back({{"round", a.round}, {"question", a.question}, {"choice", to_string(a.choice)},
                           {"correct", a.correct}});
    }
    ordered_json doc = {{"session", s.id},
                        {"group", to_string(s.group)},
                        {"participant", s.participant},
                        {"background", to_string(s.background)},
                        {"rounds", s.rounds.size()},
                        {"questions_per_round", s.rounds.empty() ? 0 : s.rounds.front().questions.size()},
                        {"score", s.score()},
                        {"answers", answers}};
    return doc.dump();
}

std::string round_view_to_json(const RoundView& v) {
    ordered_json history = ordered_json::array();
    for (const auto& p : v.history) history.push_back({{"date", p.date}, {"value", p.value}});
    ordered_json questions = ordered_json::array();
    for (std::size_t i = 0; i < v.questions.size(); ++i) {
        const auto& q = v.questions[i];
        questions.push_back({{"question", i + 1},
                             {"month", q.query.month},
                             {"direction", to_string(q.query.direction)},
                             {"magnitude", q.query.magnitude},
                             {"text", q.text},
                             {"options", {"GoUp", "RemainStable", "GoDown"}}});
    }
    ordered_json doc = {{"round", v.round},
                        {"family", to_string(v.family)},
                        {"chart", {{"history", history},
                                   {"predicted", {{"date", v.predicted.date}, {"value", v.predicted.value}}}}},
                        {"questions", questions}};
    if (v.explanation) {
        ordered_json bars = ordered_json::array();
        for (const auto& c : v.explanation->contributions) {
            bars.push_back({{"feature_label", c.label},
                            {"coefficient", c.coefficient},
                            {"sign", c.sign > 0 ? "positive" : (c.sign < 0 ? "negative" : "zero")}});
        }
        doc["explanation"] = {{"features", bars},
                              {"intercept", v.explanation->intercept},
                              {"text", v.explanation->rule_text}};
    }
    return doc.dump();
}

std::string whatif_to_json(const WhatIfResult& r, bool include_surrogate) {
    ordered_json doc = {{"verdict", to_string(r.verdict)},
                        {"delta_black_box", r.delta_black_box},
                        {"black_box_original", r.black_box_original},
                        {"black_box_perturbed", r.black_box_perturbed},
                        {"threshold", r.threshold}};
    if (include_surrogate) doc["delta_surrogate"] = r.delta_surrogate;
    return doc.dump();
}

std::string answer_to_json(const AnswerResult& r) {
    ordered_json doc = {{"correct", r.correct}, {"feedback", r.feedback}, {"score", r.score}};
    return doc.dump();
}

}  // namespace tsfl
