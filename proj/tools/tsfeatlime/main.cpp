// tsfeatlime command-line tool.
//
// Exit status: 0 on success, 1 for bad flags or unusable input data, 2 for
// runtime failures (adapter errors, singular fits, I/O).

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsfeatlime/csv.hpp"
#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/evaluation.hpp"
#include "tsfeatlime/features.hpp"
#include "tsfeatlime/forecasters.hpp"
#include "tsfeatlime/http_service.hpp"
#include "tsfeatlime/perturbation.hpp"
#include "tsfeatlime/series.hpp"
#include "tsfeatlime/service.hpp"
#include "tsfeatlime/surrogate.hpp"
#include "tsfeatlime/synthetic.hpp"

using namespace tsfl;

namespace {

struct DataOpts {
    std::string input;
    std::string time_column = "date";
    std::string value_column = "value";
    bool resample = false;
    double train_fraction = 0.8;
    std::size_t window = 12;
    std::string model = "ar:2";
};

struct ExplainOpts {
    std::string features;
    std::string family = "Lag";
    std::size_t block_length = 5;
    std::size_t block_swap = 2;
    std::size_t samples = 1000;
    std::size_t ma_window = 3;
    std::uint64_t seed = 42;
    std::string kernel = "exponential";
    std::optional<double> bandwidth;
    double ridge = kDefaultRidge;
};

struct EvalOpts {
    std::size_t queries = 20;
    std::size_t iterations = 5;
    std::string dataset;
    std::vector<std::size_t> block_lengths{3, 4, 5};
    std::vector<std::size_t> block_swaps{2, 3, 4};
    std::vector<std::string> families{"Lag", "RW", "EW"};
};

struct Options {
    DataOpts data;
    ExplainOpts explain;
    EvalOpts eval;
    std::string output;
    std::string svg;
    // serve
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    std::string log_path;
    // synth
    std::size_t length = 240;
    // analyze
    std::string score_column = "score";
};

void add_data_options(CLI::App* cmd, DataOpts& d, bool model = true) {
    cmd->add_option("--input,-i", d.input, "Series CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--time-column", d.time_column, "Timestamp column")->capture_default_str();
    cmd->add_option("--value-column", d.value_column, "Value column")->capture_default_str();
    cmd->add_flag("--resample", d.resample, "Resample to monthly means first");
    cmd->add_option("--train-fraction", d.train_fraction, "Share of the series used to fit the model and scaling")
        ->check(CLI::Range(0.05, 1.0))
        ->capture_default_str();
    cmd->add_option("--window,-q", d.window, "Queried window length")->check(CLI::PositiveNumber)->capture_default_str();
    if (model) {
        cmd->add_option("--model,-m", d.model, "ar:p | hw:alpha,beta,gamma,season | ext:COMMAND | last | quad")
            ->capture_default_str();
    }
}

void add_perturbation_options(CLI::App* cmd, ExplainOpts& e, bool axes = true) {
    if (axes) {
        cmd->add_option("--block-length,-l", e.block_length, "MBB block length")->capture_default_str();
        cmd->add_option("--block-swap,-s", e.block_swap, "Block swap rounds")->capture_default_str();
    }
    cmd->add_option("--samples,-p", e.samples, "Samples per explanation")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--ma-window", e.ma_window, "Moving-average window (odd)")->capture_default_str();
    cmd->add_option("--seed", e.seed, "Master seed")->envname("TSFL_SEED")->capture_default_str();
}

void add_surrogate_options(CLI::App* cmd, ExplainOpts& e, bool features = true) {
    if (features) {
        cmd->add_option("--features,-f", e.features, "Feature specs, e.g. lag:1,rw:1:3,ew:5");
        cmd->add_option("--family", e.family, "Default feature family when --features is absent (Lag, RW, EW)")
            ->capture_default_str();
    }
    cmd->add_option("--kernel", e.kernel, "none | exponential")->capture_default_str();
    cmd->add_option("--bandwidth", e.bandwidth, "Kernel bandwidth (default: median positive distance)");
    cmd->add_option("--ridge", e.ridge, "Ridge penalty")->capture_default_str();
}

void add_eval_options(CLI::App* cmd, EvalOpts& v) {
    cmd->add_option("--queries", v.queries, "Number of query windows from the test portion")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--iterations", v.iterations, "Iterations per query")->check(CLI::PositiveNumber)->capture_default_str();
}

// ---------------------------------------------------------------------------

struct Prepared {
    Series raw;
    Series norm;
    NormalizationState scale;
    std::size_t train_end = 0;
};

Prepared prepare(const DataOpts& d) {
    Prepared p;
    p.raw = load_csv(d.input, d.time_column, d.value_column);
    if (d.resample) p.raw = resample_monthly(p.raw);
    p.train_end = static_cast<std::size_t>(d.train_fraction * static_cast<double>(p.raw.size()));
    if (p.train_end < 2) throw InsufficientHistoryError("training portion has fewer than two observations");
    p.scale = fit_normalization(p.raw.values().first(p.train_end));
    p.norm = apply_normalization(p.raw, p.scale);
    if (p.norm.size() < d.window) {
        throw InsufficientHistoryError("series has " + std::to_string(p.norm.size()) +
                                       " observations, fewer than the window length " + std::to_string(d.window));
    }
    return p;
}

std::unique_ptr<Forecaster> build_model(const DataOpts& d, const Prepared& p) {
    return make_forecaster(parse_model_spec(d.model), p.norm.values().first(p.train_end));
}

PerturbationConfig perturbation(const ExplainOpts& e) {
    return {e.block_length, e.block_swap, e.samples, e.ma_window, e.seed};
}

KernelConfig kernel(const ExplainOpts& e) {
    KernelConfig k{parse_kernel_kind(e.kernel), e.bandwidth};
    k.validate();
    return k;
}

std::vector<FeatureSpec> specs(const ExplainOpts& e, std::size_t q) {
    auto out = e.features.empty() ? default_family(parse_feature_family(e.family), q) : parse_feature_specs(e.features);
    validate_specs(out);
    return out;
}

std::vector<std::vector<double>> queries(const Prepared& p, const DataOpts& d, std::size_t count) {
    const double test_fraction = d.train_fraction >= 1.0 ? 1.0 : 1.0 - d.train_fraction;
    auto q = query_windows(p.norm.values(), d.window, count, test_fraction);
    if (q.empty()) throw InsufficientHistoryError("no query windows fit in the test portion");
    return q;
}

// Writes to --output, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StorageError("cannot write '" + path + "'");
    out << text;
    if (!out) throw StorageError("failed writing '" + path + "'");
}

std::string dataset_name(const EvalOpts& v, const DataOpts& d) {
    if (!v.dataset.empty()) return v.dataset;
    std::string stem = d.input.substr(d.input.find_last_of('/') + 1);
    const auto dot = stem.find_last_of('.');
    return dot == std::string::npos ? stem : stem.substr(0, dot);
}

// ---------------------------------------------------------------------------

void run_explain(const Options& o) {
    const Prepared p = prepare(o.data);
    const auto f = build_model(o.data, p);
    const auto window = last_window(p.norm, o.data.window);
    const auto result =
        tsfeatlime_explain(window.values(), *f, specs(o.explain, o.data.window), perturbation(o.explain), kernel(o.explain),
                           o.explain.ridge);
    emit(o.output, explanation_to_json(result.explanation) + "\n");
    if (!o.svg.empty()) emit(o.svg, explanation_to_svg(result.explanation));
}

void run_perturb(const Options& o) {
    const Prepared p = prepare(o.data);
    const auto window = last_window(p.norm, o.data.window);
    const auto pcfg = perturbation(o.explain);
    pcfg.validate(o.data.window);
    std::ostringstream out;
    write_samples_csv(out, generate_samples(window.values(), pcfg));
    emit(o.output, out.str());
}

void run_fidelity(const Options& o) {
    const Prepared p = prepare(o.data);
    const auto f = build_model(o.data, p);
    const auto q = queries(p, o.data, o.eval.queries);
    const auto report = evaluate_fidelity(*f, q, specs(o.explain, o.data.window), perturbation(o.explain),
                                          kernel(o.explain), o.eval.iterations, o.explain.ridge);
    emit(o.output, report_to_json(report) + "\n");
}

std::vector<FeatureFamily> families(const EvalOpts& v) {
    std::vector<FeatureFamily> out;
    for (const auto& name : v.families) out.push_back(parse_feature_family(name));
    return out;
}

void run_grid_cmd(const Options& o) {
    const Prepared p = prepare(o.data);
    const auto f = build_model(o.data, p);
    GridOptions g;
    g.dataset = dataset_name(o.eval, o.data);
    g.block_lengths = o.eval.block_lengths;
    g.block_swaps = o.eval.block_swaps;
    g.families = families(o.eval);
    g.iterations = o.eval.iterations;
    g.base = perturbation(o.explain);
    g.kernel = kernel(o.explain);
    g.ridge = o.explain.ridge;
    for (std::size_t l : g.block_lengths)
        for (std::size_t s : g.block_swaps) PerturbationConfig{l, s, g.base.sample_count, g.base.ma_window, 0}.validate(o.data.window);
    const auto grid = run_grid(*f, queries(p, o.data, o.eval.queries), g);
    std::ostringstream out;
    write_grid_csv(out, grid);
    emit(o.output, out.str());
}

void run_ablation_cmd(const Options& o) {
    const Prepared p = prepare(o.data);
    const auto f = build_model(o.data, p);
    const auto q = queries(p, o.data, o.eval.queries);
    KernelConfig with = kernel(o.explain);
    if (with.kind == KernelKind::None) throw ConfigError("ablation compares against kernel none; pick a distance kernel");
    std::vector<std::pair<FeatureFamily, AblationResult>> rows;
    for (FeatureFamily fam : families(o.eval)) {
        rows.emplace_back(fam, distance_ablation(*f, q, default_family(fam, o.data.window), perturbation(o.explain), with,
                                                 o.eval.iterations, o.explain.ridge));
    }
    std::ostringstream out;
    write_ablation_csv(out, dataset_name(o.eval, o.data), rows);
    emit(o.output, out.str());
}

void run_synth(const Options& o) {
    if (o.length < 3) throw ConfigError("--length must be at least 3");
    std::ostringstream out;
    write_series_csv(out, generate_benchmark_series(o.length, o.explain.seed));
    emit(o.output, out.str());
}

nlohmann::ordered_json compare(const std::string& name, const std::vector<double>& treatment,
                               const std::vector<double>& control) {
    nlohmann::ordered_json j = {{"comparison", name}, {"n_treatment", treatment.size()}, {"n_control", control.size()}};
    try {
        const auto r = mann_whitney_u(treatment, control);
        j["u_treatment"] = r.u_a;
        j["u_control"] = r.u_b;
        j["z"] = r.z;
        j["p_value"] = r.p_value;
    } catch (const MetricError& e) {
        j["error"] = e.what();
    }
    return j;
}

void run_analyze(const Options& o) {
    const auto table = csv::read_file(o.data.input);
    const std::size_t gi = table.column("group");
    const std::size_t bi = table.column("background");
    const std::size_t si = table.column(o.score_column);
    // [background][group]
    std::vector<double> scores[2][2];
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) {
            throw ValidationError("row " + std::to_string(r + 1) + ": expected " + std::to_string(table.header.size()) +
                                  " fields");
        }
        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(row[si], &used);
            if (used != row[si].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ValidationError("row " + std::to_string(r + 1) + ": score '" + row[si] + "' is not a number");
        }
        const Group g = parse_group(row[gi]);
        const Background b = parse_background(row[bi]);
        scores[b == Background::CS ? 0 : 1][g == Group::Treatment ? 1 : 0].push_back(score);
    }
    auto merged = [&](int g) {
        std::vector<double> v = scores[0][g];
        v.insert(v.end(), scores[1][g].begin(), scores[1][g].end());
        return v;
    };
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    doc.push_back(compare("all", merged(1), merged(0)));
    doc.push_back(compare("CS", scores[0][1], scores[0][0]));
    doc.push_back(compare("NonCS", scores[1][1], scores[1][0]));
    emit(o.output, doc.dump(2) + "\n");
}

void run_serve(const Options& o) {
    const Prepared p = prepare(o.data);
    std::shared_ptr<const Forecaster> f = build_model(o.data, p);
    StudyConfig cfg;
    cfg.window_length = o.data.window;
    cfg.perturbation = perturbation(o.explain);
    cfg.kernel = kernel(o.explain);
    cfg.ridge = o.explain.ridge;
    cfg.log_path = o.log_path;
    ExerciseStudy study(p.norm, p.scale, f, cfg);
    StudyServer server(study, o.static_dir);

    // Route SIGINT/SIGTERM to a waiter thread so shutdown happens outside a
    // signal handler.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    int port = o.port;
    if (port == 0) {
        port = server.bind_any_port(o.host);
        if (port < 0) throw StorageError("cannot bind " + o.host);
    } else if (!server.bind(o.host, port)) {
        throw StorageError("cannot bind " + o.host + ":" + std::to_string(port));
    }
    std::fprintf(stderr, "listening on http://%s:%d\n", o.host.c_str(), port);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    server.listen_after_bind();
    // listen returned on its own: wake the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
}

// Input that can never succeed maps to 1; everything else is a runtime failure.
int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IngestionError*>(&e) ||
        dynamic_cast<const GapError*>(&e) || dynamic_cast<const DegenerateRangeError*>(&e) ||
        dynamic_cast<const InsufficientHistoryError*>(&e)) {
        return 1;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explain univariate time-series forecasts with feature-based local surrogates", "tsfeatlime"};
    app.set_config("--config", "", "TOML/INI file with the same keys as the flags");
    app.require_subcommand(1);
    Options o;

    auto* explain = app.add_subcommand("explain", "Fit a local surrogate for the final window and emit its explanation");
    add_data_options(explain, o.data);
    add_perturbation_options(explain, o.explain);
    add_surrogate_options(explain, o.explain);
    explain->add_option("--output,-o", o.output, "Explanation JSON (default stdout)");
    explain->add_option("--svg", o.svg, "Also write a coefficient bar chart");

    auto* perturb = app.add_subcommand("perturb", "Emit the MBB sample set for the final window as CSV");
    add_data_options(perturb, o.data, false);
    add_perturbation_options(perturb, o.explain);
    perturb->add_option("--output,-o", o.output, "Samples CSV (default stdout)");

    auto* fidelity_cmd = app.add_subcommand("fidelity", "Score surrogate fidelity over test-portion windows");
    add_data_options(fidelity_cmd, o.data);
    add_perturbation_options(fidelity_cmd, o.explain);
    add_surrogate_options(fidelity_cmd, o.explain);
    add_eval_options(fidelity_cmd, o.eval);
    fidelity_cmd->add_option("--output,-o", o.output, "Report JSON (default stdout)");

    auto* grid = app.add_subcommand("grid", "Block length x swap x family grid search");
    add_data_options(grid, o.data);
    add_perturbation_options(grid, o.explain, false);
    add_surrogate_options(grid, o.explain, false);
    add_eval_options(grid, o.eval);
    grid->add_option("--block-lengths", o.eval.block_lengths, "Block lengths to try")->delimiter(',')->capture_default_str();
    grid->add_option("--block-swaps", o.eval.block_swaps, "Swap counts to try")->delimiter(',')->capture_default_str();
    grid->add_option("--families", o.eval.families, "Feature families")->delimiter(',')->capture_default_str();
    grid->add_option("--dataset", o.eval.dataset, "Dataset label (default: input file name)");
    grid->add_option("--output,-o", o.output, "Grid CSV (default stdout)");

    auto* ablation = app.add_subcommand("ablation", "Surrogate fidelity with and without distance weighting");
    add_data_options(ablation, o.data);
    add_perturbation_options(ablation, o.explain);
    add_surrogate_options(ablation, o.explain, false);
    add_eval_options(ablation, o.eval);
    ablation->add_option("--families", o.eval.families, "Feature families")->delimiter(',')->capture_default_str();
    ablation->add_option("--dataset", o.eval.dataset, "Dataset label (default: input file name)");
    ablation->add_option("--output,-o", o.output, "Ablation CSV (default stdout)");

    auto* serve = app.add_subcommand("serve", "Run the what-if exercise service");
    add_data_options(serve, o.data);
    add_perturbation_options(serve, o.explain);
    add_surrogate_options(serve, o.explain, false);
    serve->add_option("--host", o.host, "Bind address")->capture_default_str();
    serve->add_option("--port", o.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535))->capture_default_str();
    serve->add_option("--static-dir", o.static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
    serve->add_option("--log", o.log_path, "Append-only session log (JSONL)");

    auto* analyze = app.add_subcommand("analyze", "Mann-Whitney U test on exported exercise scores");
    analyze->add_option("--input,-i", o.data.input, "Export CSV")->required()->check(CLI::ExistingFile);
    analyze->add_option("--score-column", o.score_column, "Column holding the score")->capture_default_str();
    analyze->add_option("--output,-o", o.output, "Result JSON (default stdout)");

    auto* synth = app.add_subcommand("synth", "Generate the synthetic nonlinear benchmark series");
    synth->add_option("--length,-n", o.length, "Observations")->capture_default_str();
    synth->add_option("--seed", o.explain.seed, "Seed")->envname("TSFL_SEED")->capture_default_str();
    synth->add_option("--output,-o", o.output, "Series CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*explain) run_explain(o);
        else if (*perturb) run_perturb(o);
        else if (*fidelity_cmd) run_fidelity(o);
        else if (*grid) run_grid_cmd(o);
        else if (*ablation) run_ablation_cmd(o);
        else if (*serve) run_serve(o);
        else if (*analyze) run_analyze(o);
        else if (*synth) run_synth(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "tsfeatlime: %s\n", e.what());
        return exit_code(e);
    }
    return 0;
}
