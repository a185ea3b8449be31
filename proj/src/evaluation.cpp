#include "tsfeatlime/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "tsfeatlime/csv.hpp"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/rng.hpp"

namespace tsfl {

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::MAE: return "MAE";
        case Metric::RMSE: return "RMSE";
        case Metric::MAPE: return "MAPE";
    }
    return "?";
}

double fidelity(std::span<const FidelityPair> pairs, Metric metric) {
    if (pairs.empty()) throw MetricError("fidelity of an empty record set is undefined");
    double acc = 0.0;
    for (const auto& [f, g] : pairs) {
        const double diff = std::abs(f - g);
        switch (metric) {
            case Metric::MAE: acc += diff; break;
            case Metric::RMSE: acc += diff * diff; break;
            case Metric::MAPE:
                if (f == 0.0) throw MetricError("MAPE is undefined when a black-box value is zero");
                acc += diff / std::abs(f);
                break;
        }
    }
    const double mean = acc / static_cast<double>(pairs.size());
    switch (metric) {
        case Metric::MAE: return mean;
        case Metric::RMSE: return std::sqrt(mean);
        case Metric::MAPE: return 100.0 * mean;
    }
    return mean;
}

double FidelityReport::metric(Metric m) const noexcept {
    switch (m) {
        case Metric::MAE: return mae;
        case Metric::RMSE: return rmse;
        case Metric::MAPE: return mape;
    }
    return 0.0;
}

double GridCell::metric(Metric m) const noexcept {
    switch (m) {
        case Metric::MAE: return mae;
        case Metric::RMSE: return rmse;
        case Metric::MAPE: return mape;
    }
    return 0.0;
}

std::uint64_t evaluation_seed(std::uint64_t master_seed, std::size_t query_id, std::size_t iteration) noexcept {
    return derive_seed(derive_seed(master_seed, query_id), iteration);
}

namespace {

void fill_metrics(FidelityReport& r) {
    std::vector<FidelityPair> pairs;
    pairs.reserve(r.records.size());
    for (const auto& rec : r.records) pairs.emplace_back(rec.black_box, rec.surrogate);
    r.mae = fidelity(pairs, Metric::MAE);
    r.rmse = fidelity(pairs, Metric::RMSE);
    try {
        r.mape = fidelity(pairs, Metric::MAPE);
    } catch (const MetricError&) {
        r.mape = std::numeric_limits<double>::quiet_NaN();
    }
}

FidelityReport empty_report(std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                            const KernelConfig& kcfg, std::size_t iterations, double ridge) {
    FidelityReport r;
    r.perturbation = pcfg;
    r.kernel = kcfg;
    r.specs.assign(specs.begin(), specs.end());
    r.iterations = iterations;
    r.ridge = ridge;
    return r;
}

void check_inputs(std::span<const std::vector<double>> queries, std::size_t iterations) {
    if (iterations == 0) throw ConfigError("iterations must be at least 1");
    if (queries.empty()) throw ConfigError("at least one query window is required");
}

template <typename Fn>
void for_each_run(std::span<const std::vector<double>> queries, std::size_t iterations, Fn&& fn) {
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t it = 0; it < iterations; ++it) {
            try {
                fn(i, it);
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw Error("query " + std::to_string(i) + ", iteration " + std::to_string(it) + ": " + e.what());
            }
        }
    }
}

}  // namespace

FidelityReport evaluate_fidelity(const Forecaster& f, std::span<const std::vector<double>> queries,
                                 std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                                 const KernelConfig& kcfg, std::size_t iterations, double ridge) {
    check_inputs(queries, iterations);
    FidelityReport report = empty_report(specs, pcfg, kcfg, iterations, ridge);
    for_each_run(queries, iterations, [&](std::size_t i, std::size_t it) {
        PerturbationConfig run = pcfg;
        run.rng_seed = evaluation_seed(pcfg.rng_seed, i, it);
        const auto result = tsfeatlime_explain(queries[i], f, specs, run, kcfg, ridge);
        report.records.push_back({i, it, result.explanation.black_box_prediction,
                                  result.explanation.surrogate_prediction, result.explanation.sample_hash});
    });
    fill_metrics(report);
    return report;
}

AblationResult distance_ablation(const Forecaster& f, std::span<const std::vector<double>> queries,
                                 std::span<const FeatureSpec> specs, const PerturbationConfig& pcfg,
                                 const KernelConfig& with_kernel, std::size_t iterations, double ridge) {
    check_inputs(queries, iterations);
    const KernelConfig none{KernelKind::None, std::nullopt};
    AblationResult out{empty_report(specs, pcfg, none, iterations, ridge),
                       empty_report(specs, pcfg, with_kernel, iterations, ridge)};
    for_each_run(queries, iterations, [&](std::size_t i, std::size_t it) {
        PerturbationConfig run = pcfg;
        run.rng_seed = evaluation_seed(pcfg.rng_seed, i, it);
        const SampleSet samples = generate_samples(queries[i], run);
        std::vector<double> outputs;
        outputs.reserve(samples.size());
        for (const auto& s : samples.samples) outputs.push_back(f.predict(s));
        const auto a = tsfeatlime_explain(queries[i], f, specs, samples, outputs, none, ridge);
        const auto b = tsfeatlime_explain(queries[i], f, specs, samples, outputs, with_kernel, ridge);
        out.without_distance.records.push_back({i, it, a.explanation.black_box_prediction,
                                                a.explanation.surrogate_prediction, a.explanation.sample_hash});
        out.with_distance.records.push_back({i, it, b.explanation.black_box_prediction,
                                             b.explanation.surrogate_prediction, b.explanation.sample_hash});
    });
    fill_metrics(out.without_distance);
    fill_metrics(out.with_distance);
    return out;
}

GridKey GridResult::best(FeatureFamily family, Metric metric) const {
    const GridKey* best_key = nullptr;
    double best_value = 0.0;
    // std::map orders keys by (length, swap, family); rank ties explicitly.
    for (const auto& [key, cell] : cells) {
        if (key.family != family) continue;
        const double v = cell.metric(metric);
        const bool better = [&] {
            if (!best_key) return true;
            if (std::isnan(v)) return false;
            if (std::isnan(best_value) || v < best_value) return true;
            if (v > best_value) return false;
            if (key.block_swap != best_key->block_swap) return key.block_swap < best_key->block_swap;
            return key.block_length < best_key->block_length;
        }();
        if (better) {
            best_key = &key;
            best_value = v;
        }
    }
    if (!best_key) throw ConfigError("grid has no cells for family " + std::string(to_string(family)));
    return *best_key;
}

GridResult run_grid(const Forecaster& f, std::span<const std::vector<double>> queries, const GridOptions& opts) {
    if (queries.empty()) throw ConfigError("grid search needs at least one query window");
    if (opts.iterations == 0) throw ConfigError("iterations must be at least 1");
    GridResult grid;
    grid.dataset = opts.dataset;
    const std::size_t q = queries.front().size();
    for (const FeatureFamily family : opts.families) {
        const auto specs = default_family(family, q);
        for (const std::size_t l : opts.block_lengths) {
            for (const std::size_t s : opts.block_swaps) {
                PerturbationConfig pcfg = opts.base;
                pcfg.block_length = l;
                pcfg.block_swap = s;
                const FidelityReport report =
                    evaluate_fidelity(f, queries, specs, pcfg, opts.kernel, opts.iterations, opts.ridge);
                // Mean of per-iteration metrics.
                GridCell cell;
                for (std::size_t it = 0; it < opts.iterations; ++it) {
                    std::vector<FidelityPair> pairs;
                    for (const auto& rec : report.records) {
                        if (rec.iteration == it) pairs.emplace_back(rec.black_box, rec.surrogate);
                    }
                    cell.mae += fidelity(pairs, Metric::MAE);
                    cell.rmse += fidelity(pairs, Metric::RMSE);
                    try {
                        cell.mape += fidelity(pairs, Metric::MAPE);
                    } catch (const MetricError&) {
                        cell.mape = std::numeric_limits<double>::quiet_NaN();
                    }
                }
                const auto n = static_cast<double>(opts.iterations);
                cell.mae /= n;
                cell.rmse /= n;
                cell.mape /= n;
                grid.cells[{l, s, family}] = cell;
            }
        }
    }
    return grid;
}

namespace {

std::string fmt_real(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

void write_grid_csv(std::ostream& out, const GridResult& grid, bool header) {
    if (header) out << "dataset,block_length,block_swap,family,MAE,RMSE,MAPE,best\n";
    std::map<FeatureFamily, std::array<GridKey, 3>> best;
    for (const auto& [key, cell] : grid.cells) {
        if (!best.contains(key.family)) {
            best[key.family] = {grid.best(key.family, Metric::MAE), grid.best(key.family, Metric::RMSE),
                                grid.best(key.family, Metric::MAPE)};
        }
    }
    // Rows grouped by family, then block length, then swap.
    std::vector<std::pair<GridKey, GridCell>> rows(grid.cells.begin(), grid.cells.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tuple(a.first.family, a.first.block_length, a.first.block_swap) <
               std::tuple(b.first.family, b.first.block_length, b.first.block_swap);
    });
    for (const auto& [key, cell] : rows) {
        std::string marks;
        const auto& b = best[key.family];
        for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
            if (b[m] == key) {
                if (!marks.empty()) marks += ';';
                marks += to_string(kAllMetrics[m]);
            }
        }
        out << csv::escape(grid.dataset) << ',' << key.block_length << ',' << key.block_swap << ','
            << to_string(key.family) << ',' << fmt_real(cell.mae) << ',' << fmt_real(cell.rmse) << ','
            << fmt_real(cell.mape) << ',' << marks << '\n';
    }
}

void write_ablation_csv(std::ostream& out, std::string_view dataset,
                        std::span<const std::pair<FeatureFamily, AblationResult>> rows, bool header) {
    if (header) out << "dataset,family,distance,MAE,RMSE,MAPE\n";
    for (const auto& [family, result] : rows) {
        for (const auto* r : {&result.without_distance, &result.with_distance}) {
            out << csv::escape(dataset) << ',' << to_string(family) << ','
                << (r == &result.without_distance ? "without" : "with") << ',' << fmt_real(r->mae) << ','
                << fmt_real(r->rmse) << ',' << fmt_real(r->mape) << '\n';
        }
    }
}

std::string report_to_json(const FidelityReport& r, int indent) {
    using nlohmann::ordered_json;
    auto real = [](double v) { return std::isnan(v) ? ordered_json() : ordered_json(v); };
    ordered_json records = ordered_json::array();
    for (const auto& rec : r.records) {
        records.push_back({{"query", rec.query_id},
                           {"iteration", rec.iteration},
                           {"black_box", rec.black_box},
                           {"surrogate", rec.surrogate},
                           {"sample_hash", rec.sample_hash}});
    }
    ordered_json doc = {
        {"metrics", {{"MAE", real(r.mae)}, {"RMSE", real(r.rmse)}, {"MAPE", real(r.mape)}}},
        {"iterations", r.iterations},
        {"features", format_feature_specs(r.specs)},
        {"perturbation",
         {{"block_length", r.perturbation.block_length},
          {"block_swap", r.perturbation.block_swap},
          {"sample_count", r.perturbation.sample_count},
          {"ma_window", r.perturbation.ma_window},
          {"seed", r.perturbation.rng_seed}}},
        {"kernel",
         {{"kind", to_string(r.kernel.kind)},
          {"bandwidth", r.kernel.bandwidth ? ordered_json(*r.kernel.bandwidth) : ordered_json("median")}}},
        {"ridge", r.ridge},
        {"records", records},
    };
    return doc.dump(indent);
}

// ---------------------------------------------------------------------------

double mann_whitney_p_value(double u, std::size_t n1, std::size_t n2, double tie_term) {
    const double a = static_cast<double>(n1);
    const double b = static_cast<double>(n2);
    const double n = a + b;
    const double variance = a * b / 12.0 * ((n + 1.0) - (n > 1.0 ? tie_term / (n * (n - 1.0)) : 0.0));
    if (!(variance > 0.0)) throw MetricError("Mann-Whitney: zero variance (all values identical)");
    const double z = std::max(0.0, std::abs(u - a * b / 2.0) - 0.5) / std::sqrt(variance);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw MetricError("Mann-Whitney needs two non-empty samples");
    const std::size_t n1 = a.size();
    const std::size_t n2 = b.size();
    std::vector<std::pair<double, bool>> pooled;  // (value, from a)
    pooled.reserve(n1 + n2);
    for (double v : a) pooled.emplace_back(v, true);
    for (double v : b) pooled.emplace_back(v, false);
    std::sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

    double rank_sum_a = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k) {
            if (pooled[k].second) rank_sum_a += midrank;
        }
        i = j;
    }
    MannWhitneyResult r;
    const double na = static_cast<double>(n1);
    const double nb = static_cast<double>(n2);
    r.u_a = rank_sum_a - na * (na + 1.0) / 2.0;
    r.u_b = na * nb - r.u_a;
    const double n = na + nb;
    const double variance = na * nb / 12.0 * ((n + 1.0) - (n > 1.0 ? tie_term / (n * (n - 1.0)) : 0.0));
    if (!(variance > 0.0)) throw MetricError("Mann-Whitney: zero variance (all values identical)");
    r.z = (r.u_a - na * nb / 2.0) / std::sqrt(variance);
    r.p_value = mann_whitney_p_value(r.u_a, n1, n2, tie_term);
    return r;
}

}  // namespace tsfl
