#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsfeatlime/features.hpp"
#include "tsfeatlime/forecaster.hpp"
#include "tsfeatlime/perturbation.hpp"
#include "tsfeatlime/series.hpp"
#include "tsfeatlime/surrogate.hpp"

namespace tsfl {

enum class Group { Control, Treatment };
enum class Background { CS, NonCS };
enum class Direction { Increase, Decrease };
enum class Verdict { GoUp, RemainStable, GoDown };

std::string_view to_string(Group g) noexcept;
std::string_view to_string(Background b) noexcept;
std::string_view to_string(Direction d) noexcept;
std::string_view to_string(Verdict v) noexcept;
Group parse_group(std::string_view text);
Background parse_background(std::string_view text);
Direction parse_direction(std::string_view text);
Verdict parse_verdict(std::string_view text);

/// A perturbation of one displayed month.
struct WhatIfQuery {
    std::size_t month = 1;  ///< 1-based position inside the displayed window
    Direction direction = Direction::Increase;
    double magnitude = 0.0;  ///< normalised units, > 0
};

struct WhatIfResult {
    Verdict verdict = Verdict::RemainStable;
    double delta_black_box = 0.0;  ///< f(perturbed) - f(original)
    double delta_surrogate = 0.0;  ///< g(perturbed) - g(original)
    double black_box_original = 0.0;
    double black_box_perturbed = 0.0;
    double threshold = 0.0;  ///< stability band half-width
};

/// Three-way verdict: GoUp if delta > eps, GoDown if delta < -eps.
Verdict classify_change(double delta, double eps) noexcept;

/// Shifts window[month - 1] by +/- magnitude and compares f and g before and
/// after. Throws ValidationError for a month outside the window or a
/// non-positive magnitude.
WhatIfResult evaluate_whatif(std::span<const double> window, const Forecaster& f, const SurrogateModel& g,
                             const WhatIfQuery& query, double stability_fraction);

struct Question {
    WhatIfQuery query;
    std::string text;
};

struct Round {
    std::size_t index = 1;       ///< 1-based
    std::size_t window_end = 0;  ///< exclusive end of the displayed window in the study series
    FeatureFamily family = FeatureFamily::Lag;
    std::vector<Question> questions;
};

struct AnswerRecord {
    std::size_t round = 1;
    std::size_t question = 1;
    Verdict choice = Verdict::RemainStable;
    bool correct = false;
    std::int64_t answered_at_ms = 0;
};

struct ExerciseSession {
    std::string id;
    Group group = Group::Control;
    Background background = Background::NonCS;
    std::string participant;
    std::uint64_t seed = 0;
    std::int64_t created_at_ms = 0;
    std::vector<Round> rounds;
    std::vector<AnswerRecord> answers;

    [[nodiscard]] std::size_t score() const noexcept;
    [[nodiscard]] const AnswerRecord* find_answer(std::size_t round, std::size_t question) const noexcept;
};

struct ChartPoint {
    std::string date;  ///< YYYY-MM-DD
    double value = 0.0;  ///< presentation scale
};

struct ExplanationPayload {
    std::vector<FeatureContribution> contributions;
    double intercept = 0.0;
    std::string rule_text;
};

/// Everything needed to render one round.
struct RoundView {
    std::size_t round = 1;
    FeatureFamily family = FeatureFamily::Lag;
    std::vector<ChartPoint> history;
    ChartPoint predicted;
    std::vector<Question> questions;
    std::optional<ExplanationPayload> explanation;  ///< Treatment only
};

struct AnswerResult {
    bool correct = false;
    std::string feedback;  ///< empty for Control
    std::size_t score = 0;
    Verdict expected = Verdict::RemainStable;
};

struct StudyConfig {
    std::size_t window_length = 12;
    std::size_t rounds = 4;
    std::size_t questions_per_round = 2;
    PerturbationConfig perturbation{5, 2, 1000, 3, 42};
    KernelConfig kernel{};
    double ridge = kDefaultRidge;
    double stability_fraction = 0.005;  ///< eps = fraction * |f(original)|
    double magnitude_fraction = 0.10;   ///< default delta = fraction * window range
    std::string log_path;               ///< empty: in-memory only
};

/// Control/treatment counterfactual-simulation exercises over one study
/// series. Thread-safe; answers are append-only and, when a log path is
/// configured, persisted as one JSON document per line.
class ExerciseStudy {
public:
    using Clock = std::function<std::int64_t()>;  ///< milliseconds since epoch

    /// `series` is in model (normalised) units; `scale` maps back to
    /// presentation units.
    ExerciseStudy(Series series, NormalizationState scale, std::shared_ptr<const Forecaster> f,
                  StudyConfig cfg = {}, Clock clock = {});
    ~ExerciseStudy();

    ExerciseStudy(const ExerciseStudy&) = delete;
    ExerciseStudy& operator=(const ExerciseStudy&) = delete;

    /// Seed defaults to a hash of the participant id.
    ExerciseSession create_session(Group group, std::string participant, Background background = Background::NonCS,
                                   std::optional<std::uint64_t> seed = std::nullopt);

    [[nodiscard]] ExerciseSession session(const std::string& id) const;
    [[nodiscard]] std::vector<ExerciseSession> sessions() const;

    [[nodiscard]] RoundView round_view(const std::string& id, std::size_t round) const;

    /// Free what-if exploration on a round's window. Magnitude defaults to the
    /// configured fraction of the window's value range.
    [[nodiscard]] WhatIfResult whatif(const std::string& id, std::size_t round, std::size_t month,
                                      Direction direction, std::optional<double> magnitude = std::nullopt) const;

    /// Records an answer. Throws ConflictError when already answered.
    AnswerResult answer(const std::string& id, std::size_t round, std::size_t question, Verdict choice);

    /// CSV: session,participant,group,background,score,answered,duration_s
    [[nodiscard]] std::string export_results() const;

    [[nodiscard]] const StudyConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const Forecaster& forecaster() const noexcept { return *f_; }

    /// Window displayed in a round (model units).
    [[nodiscard]] std::vector<double> round_window(const Round& r) const;
    /// Surrogate for a round's window; cached.
    [[nodiscard]] const SurrogateModel& round_surrogate(const ExerciseSession& s, const Round& r) const;

private:
    [[nodiscard]] std::vector<Round> plan_rounds(std::uint64_t seed) const;
    [[nodiscard]] const ExerciseSession& find(const std::string& id) const;
    [[nodiscard]] const Round& find_round(const ExerciseSession& s, std::size_t round) const;
    void append_log(const std::string& line);
    void replay_log();
    [[nodiscard]] std::string new_session_id();
    [[nodiscard]] std::int64_t now() const;

    Series series_;
    NormalizationState scale_;
    std::shared_ptr<const Forecaster> f_;
    StudyConfig cfg_;
    Clock clock_;

    mutable std::mutex mutex_;
    std::map<std::string, ExerciseSession> sessions_;
    std::vector<std::string> order_;  ///< creation order
    mutable std::map<std::pair<std::uint64_t, std::size_t>, SurrogateModel> surrogate_cache_;
    std::ofstream log_;
    std::uint64_t id_counter_ = 0;
    std::uint64_t id_salt_ = 0;
};

// JSON views used by the HTTP layer and the bindings.
std::string session_to_json(const ExerciseSession& s);
std::string round_view_to_json(const RoundView& v);
std::string whatif_to_json(const WhatIfResult& r, bool include_surrogate);
std::string answer_to_json(const AnswerResult& r);

}  // namespace tsfl
