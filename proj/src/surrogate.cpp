#include "tsfeatlime/surrogate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "tsfeatlime/errors.hpp"

namespace tsfl {

double euclidean_distance(std::span<const double> window, std::span<const double> sample) {
    if (window.size() != sample.size()) {
        throw DimensionError("distance: lengths differ (" + std::to_string(window.size()) + " vs " +
                             std::to_string(sample.size()) + ")");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < window.size(); ++j) {
        const double diff = window[j] - sample[j];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

std::vector<double> distances(std::span<const double> window, const SampleSet& samples) {
    std::vector<double> d;
    d.reserve(samples.size());
    for (const auto& s : samples.samples) d.push_back(euclidean_distance(window, s));
    return d;
}

std::string_view to_string(KernelKind kind) noexcept {
    return kind == KernelKind::None ? "none" : "exponential";
}

KernelKind parse_kernel_kind(std::string_view text) {
    if (text == "none") return KernelKind::None;
    if (text == "exponential" || text == "exp") return KernelKind::Exponential;
    throw ConfigError("unknown kernel '" + std::string(text) + "' (expected none or exponential)");
}

void KernelConfig::validate() const {
    if (kind == KernelKind::Exponential && bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
        throw ConfigError("kernel bandwidth must be a positive finite number");
    }
}

double resolve_bandwidth(std::span<const double> d, const KernelConfig& cfg) {
    if (cfg.bandwidth) return *cfg.bandwidth;
    std::vector<double> positive;
    for (double v : d) {
        if (v > 0.0) positive.push_back(v);
    }
    if (positive.empty()) return 1.0;
    const std::size_t mid = positive.size() / 2;
    std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid), positive.end());
    if (positive.size() % 2 == 1) return positive[mid];
    const double upper = positive[mid];
    const double lower = *std::max_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::vector<double> kernel_weights(std::span<const double> d, const KernelConfig& cfg) {
    cfg.validate();
    std::vector<double> w(d.size(), 1.0);
    if (cfg.kind == KernelKind::None) return w;
    const double sigma = resolve_bandwidth(d, cfg);
    const double inv = 1.0 / (sigma * sigma);
    for (std::size_t i = 0; i < d.size(); ++i) w[i] = std::exp(-d[i] * d[i] * inv);
    return w;
}

double SurrogateModel::predict_features(std::span<const double> x) const {
    if (x.size() != coefficients.size()) throw DimensionError("surrogate: feature vector has wrong length");
    double out = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) out += coefficients[j] * x[j];
    return out;
}

SurrogateModel fit_wls(const FeatureMatrix& x, std::span<const double> y, std::span<const double> weights,
                       double ridge) {
    const std::size_t p = x.rows;
    const std::size_t nf = x.cols();
    if (y.size() != p || weights.size() != p) {
        throw DimensionError("fit_wls: " + std::to_string(p) + " rows, " + std::to_string(y.size()) +
                             " targets, " + std::to_string(weights.size()) + " weights");
    }
    if (p < nf + 1) {
        throw ConfigError("fit_wls: need at least " + std::to_string(nf + 1) + " samples for " +
                          std::to_string(nf) + " features, got " + std::to_string(p));
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("fit_wls: ridge must be non-negative");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("fit_wls: weights must be positive and finite");
        wsum += w;
    }

    // Centre on weighted means so the intercept drops out of the penalised solve.
    Eigen::VectorXd xbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nf));
    double ybar = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < nf; ++j) xbar[static_cast<Eigen::Index>(j)] += weights[i] * x.at(i, j);
        ybar += weights[i] * y[i];
    }
    xbar /= wsum;
    ybar /= wsum;

    const auto rows = static_cast<Eigen::Index>(p + (ridge > 0.0 ? nf : 0));
    const auto cols = static_cast<Eigen::Index>(nf);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    for (std::size_t i = 0; i < p; ++i) {
        const double sw = std::sqrt(weights[i]);
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < nf; ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            a(r, c) = sw * (x.at(i, j) - xbar[c]);
        }
        b[r] = sw * (y[i] - ybar);
    }
    if (ridge > 0.0) {
        const double s = std::sqrt(ridge);
        for (Eigen::Index j = 0; j < cols; ++j) a(static_cast<Eigen::Index>(p) + j, j) = s;
    }

    SurrogateModel model;
    model.feature_specs = x.columns;
    model.ridge = ridge;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(cols);
    if (nf > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(1e-11);
        if (qr.rank() < cols) {
            throw SingularSystemError("fit_wls: design matrix is rank deficient (rank " +
                                      std::to_string(qr.rank()) + " of " + std::to_string(nf) +
                                      "); use a ridge penalty > 0 or more varied samples");
        }
        coef = qr.solve(b);
    }
    model.coefficients.assign(coef.data(), coef.data() + coef.size());
    model.intercept = ybar - xbar.dot(coef);

    double sse = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        const double r = y[i] - model.predict_features(x.row(i));
        sse += weights[i] * r * r;
    }
    model.weighted_rmse = std::sqrt(sse / wsum);
    return model;
}

double surrogate_predict(const SurrogateModel& g, std::span<const double> window) {
    return g.predict_features(feature_row(window, g.feature_specs));
}

namespace {

ExplainResult assemble(std::span<const double> window, const Forecaster& f, std::span<const FeatureSpec> specs,
                       const SampleSet& samples, std::vector<double> targets, const KernelConfig& kcfg,
                       double ridge) {
    kcfg.validate();
    const std::vector<double> d = distances(window, samples);
    const std::vector<double> w = kernel_weights(d, kcfg);
    const FeatureMatrix a_set = build_feature_matrix(samples, specs);

    ExplainResult out;
    out.model = fit_wls(a_set, targets, w, ridge);
    out.model.kernel = kcfg;

    Explanation& e = out.explanation;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const double c = out.model.coefficients[j];
        e.contributions.push_back({specs[j].label, c, (c > 0.0) - (c < 0.0)});
    }
    e.intercept = out.model.intercept;
    e.black_box_prediction = f.predict(window);
    e.surrogate_prediction = surrogate_predict(out.model, window);
    e.window.assign(window.begin(), window.end());
    e.perturbation = samples.config;
    e.kernel = kcfg;
    e.bandwidth = kcfg.kind == KernelKind::Exponential ? resolve_bandwidth(d, kcfg) : 0.0;
    e.ridge = ridge;
    e.weighted_rmse = out.model.weighted_rmse;
    e.sample_hash = samples.hash();
    e.training_targets = std::move(targets);
    return out;
}

}  // namespace

ExplainResult tsfeatlime_explain(std::span<const double> window, const Forecaster& f,
                                 std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                                 const KernelConfig& kcfg, double ridge) {
    validate_specs(specs);
    for (const auto& s : specs) {
        if (!s.defined_after(window.size())) {
            throw SpecError("feature '" + s.label + "' is undefined at t = " + std::to_string(window.size() + 1));
        }
    }
    const SampleSet samples = generate_samples(window, pcfg);
    std::vector<double> targets;
    targets.reserve(samples.size());
    for (const auto& s : samples.samples) targets.push_back(f.predict(s));
    return assemble(window, f, specs, samples, std::move(targets), kcfg, ridge);
}

ExplainResult tsfeatlime_explain(std::span<const double> window, const Forecaster& f,
                                 std::span<const FeatureSpec> specs, const SampleSet& samples,
                                 std::span<const double> black_box_outputs, const KernelConfig& kcfg,
                                 double ridge) {
    if (black_box_outputs.size() != samples.size()) {
        throw DimensionError("one black-box output per sample required");
    }
    return assemble(window, f, specs, samples, {black_box_outputs.begin(), black_box_outputs.end()}, kcfg,
                    ridge);
}

std::string_view sign_rule_text() noexcept {
    return "If a feature has a positive contribution, increasing its value will raise the predicted "
           "output by the model, while decreasing it will lower the output. Conversely, if a feature "
           "has a negative contribution, increasing its value will lower the predicted output, and "
           "decreasing it will raise the output.";
}

std::string describe_contribution(const FeatureContribution& c) {
    if (c.sign > 0) return c.label + ": positive contribution; increasing its value will raise the predicted output";
    if (c.sign < 0) return c.label + ": negative contribution; increasing its value will lower the predicted output";
    return c.label + ": no contribution; changing its value leaves the predicted output unchanged";
}

std::string explanation_to_json(const Explanation& e, int indent) {
    using nlohmann::ordered_json;
    ordered_json features = ordered_json::array();
    for (const auto& c : e.contributions) {
        features.push_back({{"feature_label", c.label},
                            {"coefficient", c.coefficient},
                            {"sign", c.sign > 0 ? "positive" : (c.sign < 0 ? "negative" : "zero")}});
    }
    ordered_json kernel = {{"kind", to_string(e.kernel.kind)}};
    kernel["bandwidth"] = e.kernel.kind == KernelKind::Exponential ? ordered_json(e.bandwidth) : ordered_json();
    kernel["bandwidth_mode"] = e.kernel.bandwidth ? "fixed" : "median";
    ordered_json doc = {
        {"features", features},
        {"intercept", e.intercept},
        {"black_box_prediction", e.black_box_prediction},
        {"surrogate_prediction", e.surrogate_prediction},
        {"window", e.window},
        {"perturbation",
         {{"block_length", e.perturbation.block_length},
          {"block_swap", e.perturbation.block_swap},
          {"sample_count", e.perturbation.sample_count},
          {"ma_window", e.perturbation.ma_window},
          {"seed", e.perturbation.rng_seed}}},
        {"kernel", kernel},
        {"ridge", e.ridge},
        {"training", {{"weighted_rmse", e.weighted_rmse}, {"sample_hash", e.sample_hash}}},
    };
    return doc.dump(indent);
}

std::string explanation_to_svg(const Explanation& e) {
    const double bar_height = 22.0;
    const double label_width = 140.0;
    const double half_width = 180.0;
    const double height = 40.0 + bar_height * static_cast<double>(e.contributions.size());
    double max_abs = 0.0;
    for (const auto& c : e.contributions) max_abs = std::max(max_abs, std::abs(c.coefficient));
    if (max_abs == 0.0) max_abs = 1.0;
    const double axis = label_width + half_width;

    std::ostringstream svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "font-family=\"sans-serif\" font-size=\"12\">\n",
                  label_width + 2 * half_width + 80.0, height);
    svg << buf;
    svg << "<text x=\"10\" y=\"18\" font-weight=\"bold\">Feature weights</text>\n";
    for (std::size_t i = 0; i < e.contributions.size(); ++i) {
        const auto& c = e.contributions[i];
        const double y = 30.0 + bar_height * static_cast<double>(i);
        const double len = half_width * std::abs(c.coefficient) / max_abs;
        const double x = c.coefficient >= 0.0 ? axis : axis - len;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"10\" y=\"%.1f\">%s</text>\n"
                      "<rect x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" height=\"%.1f\" fill=\"%s\"/>\n",
                      y + 14.0, c.label.c_str(), x, y + 3.0, len, bar_height - 6.0,
                      c.coefficient >= 0.0 ? "#2b8cbe" : "#e34a33");
        svg << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.1f\">%.4g</text>\n",
                      axis + half_width + 8.0, y + 14.0, c.coefficient);
        svg << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"26\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#333\"/>\n</svg>\n", axis,
                  axis, height - 6.0);
    svg << buf;
    return svg.str();
}

}  // namespace tsfl
