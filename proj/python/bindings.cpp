#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/evaluation.hpp"
#include "tsfeatlime/features.hpp"
#include "tsfeatlime/forecasters.hpp"
#include "tsfeatlime/perturbation.hpp"
#include "tsfeatlime/surrogate.hpp"
#include "tsfeatlime/synthetic.hpp"

namespace py = pybind11;
using namespace tsfl;

namespace {

// Either a Forecaster built on the C++ side or any Python callable taking a
// list of floats.
std::shared_ptr<const Forecaster> as_forecaster(const py::object& model) {
    if (py::isinstance<Forecaster>(model)) {
        return model.cast<std::shared_ptr<Forecaster>>();
    }
    if (!PyCallable_Check(model.ptr())) throw ConfigError("model must be a Forecaster or a callable");
    py::function fn = model;
    return std::make_shared<FunctionForecaster>(
        [fn](std::span<const double> w) {
            return fn(std::vector<double>(w.begin(), w.end())).cast<double>();
        },
        "python");
}

PerturbationConfig pcfg(std::size_t block_length, std::size_t block_swap, std::size_t samples, std::size_t ma_window,
                        std::uint64_t seed) {
    return {block_length, block_swap, samples, ma_window, seed};
}

KernelConfig kcfg(const std::string& kernel, std::optional<double> bandwidth) {
    KernelConfig k{parse_kernel_kind(kernel), bandwidth};
    k.validate();
    return k;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Feature-based local surrogate explanations for univariate forecasters";

    // Translators run newest first, so the narrower type is registered last.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Forecaster, std::shared_ptr<Forecaster>>(m, "Forecaster")
        .def("predict", [](const Forecaster& f, const std::vector<double>& w) { return f.predict(w); })
        .def("__repr__", [](const Forecaster& f) { return "<Forecaster " + f.describe() + ">"; });

    m.def(
        "make_forecaster",
        [](const std::string& spec, const std::vector<double>& train) -> std::shared_ptr<Forecaster> {
            return make_forecaster(parse_model_spec(spec), train);
        },
        py::arg("spec"), py::arg("train") = std::vector<double>{},
        "Build a forecaster from a model spec (ar:p, hw:a,b,g,m, ext:cmd, last, quad).");

    m.def("lag", [](const std::vector<double>& y, std::size_t t, std::size_t k) { return lag(y, t, k); },
          py::arg("values"), py::arg("t"), py::arg("k"));
    m.def("rolling_window",
          [](const std::vector<double>& y, std::size_t t, std::size_t k, std::size_t w) {
              return rolling_window(y, t, k, w);
          },
          py::arg("values"), py::arg("t"), py::arg("k"), py::arg("w"));
    m.def("expanding_window", [](const std::vector<double>& y, std::size_t t, std::size_t w) {
              return expanding_window(y, t, w);
          },
          py::arg("values"), py::arg("t"), py::arg("w"));

    m.def(
        "feature_labels",
        [](const std::string& specs) {
            std::vector<std::string> out;
            for (const auto& s : parse_feature_specs(specs)) out.push_back(s.label);
            return out;
        },
        py::arg("specs"));
    m.def(
        "feature_row",
        [](const std::vector<double>& window, const std::string& specs) {
            return feature_row(window, parse_feature_specs(specs));
        },
        py::arg("window"), py::arg("specs"));

    m.def(
        "decompose",
        [](const std::vector<double>& window, std::size_t ma_window) {
            auto d = decompose(window, ma_window);
            return py::make_tuple(d.moving_average, d.residual);
        },
        py::arg("window"), py::arg("ma_window") = 3, "Returns (moving_average, residual).");

    m.def(
        "generate_samples",
        [](const std::vector<double>& window, std::size_t block_length, std::size_t block_swap, std::size_t samples,
           std::size_t ma_window, std::uint64_t seed) {
            return generate_samples(window, pcfg(block_length, block_swap, samples, ma_window, seed)).samples;
        },
        py::arg("window"), py::arg("block_length") = 5, py::arg("block_swap") = 2, py::arg("samples") = 1000,
        py::arg("ma_window") = 3, py::arg("seed") = 42);

    m.def("euclidean_distance", [](const std::vector<double>& a, const std::vector<double>& b) {
        return euclidean_distance(a, b);
    });
    m.def(
        "kernel_weights",
        [](const std::vector<double>& d, const std::string& kernel, std::optional<double> bandwidth) {
            return kernel_weights(d, kcfg(kernel, bandwidth));
        },
        py::arg("distances"), py::arg("kernel") = "exponential", py::arg("bandwidth") = py::none());

    m.def(
        "fit_wls",
        [](const std::vector<std::vector<double>>& rows, const std::vector<double>& y, const std::vector<double>& w,
           double ridge) {
            FeatureMatrix x;
            x.rows = rows.size();
            const std::size_t d = rows.empty() ? 0 : rows.front().size();
            for (std::size_t j = 0; j < d; ++j) x.columns.push_back(FeatureSpec::make_lag(j + 1));
            for (const auto& r : rows) {
                if (r.size() != d) throw DimensionError("ragged feature rows");
                x.data.insert(x.data.end(), r.begin(), r.end());
            }
            const auto g = fit_wls(x, y, w, ridge);
            return py::make_tuple(g.intercept, g.coefficients);
        },
        py::arg("x"), py::arg("y"), py::arg("weights"), py::arg("ridge") = kDefaultRidge,
        "Weighted ridge fit with an unpenalised intercept. Returns (intercept, coefficients).");

    m.def(
        "explain_json",
        [](const std::vector<double>& window, const py::object& model, const std::string& features,
           std::size_t block_length, std::size_t block_swap, std::size_t samples, std::size_t ma_window,
           std::uint64_t seed, const std::string& kernel, std::optional<double> bandwidth, double ridge) {
            const auto f = as_forecaster(model);
            const auto specs = features.empty() ? default_family(FeatureFamily::Lag, window.size())
                                                : parse_feature_specs(features);
            const auto r = tsfeatlime_explain(window, *f, specs, pcfg(block_length, block_swap, samples, ma_window, seed),
                                              kcfg(kernel, bandwidth), ridge);
            return explanation_to_json(r.explanation, -1);
        },
        py::arg("window"), py::arg("model"), py::arg("features") = "", py::arg("block_length") = 5,
        py::arg("block_swap") = 2, py::arg("samples") = 1000, py::arg("ma_window") = 3, py::arg("seed") = 42,
        py::arg("kernel") = "exponential", py::arg("bandwidth") = py::none(), py::arg("ridge") = kDefaultRidge);

    m.def(
        "evaluate_fidelity_json",
        [](const std::vector<std::vector<double>>& queries, const py::object& model, const std::string& features,
           std::size_t iterations, std::size_t block_length, std::size_t block_swap, std::size_t samples,
           std::size_t ma_window, std::uint64_t seed, const std::string& kernel, std::optional<double> bandwidth,
           double ridge) {
            if (queries.empty()) throw ConfigError("at least one query window is required");
            const auto f = as_forecaster(model);
            const auto specs = features.empty() ? default_family(FeatureFamily::Lag, queries.front().size())
                                                : parse_feature_specs(features);
            const auto r = evaluate_fidelity(*f, queries, specs, pcfg(block_length, block_swap, samples, ma_window, seed),
                                             kcfg(kernel, bandwidth), iterations, ridge);
            return report_to_json(r, -1);
        },
        py::arg("queries"), py::arg("model"), py::arg("features") = "", py::arg("iterations") = 5,
        py::arg("block_length") = 5, py::arg("block_swap") = 2, py::arg("samples") = 1000, py::arg("ma_window") = 3,
        py::arg("seed") = 42, py::arg("kernel") = "exponential", py::arg("bandwidth") = py::none(),
        py::arg("ridge") = kDefaultRidge);

    m.def(
        "fidelity",
        [](const std::vector<std::pair<double, double>>& pairs, const std::string& metric) {
            Metric mt = Metric::MAE;
            if (metric == "RMSE") mt = Metric::RMSE;
            else if (metric == "MAPE") mt = Metric::MAPE;
            else if (metric != "MAE") throw ConfigError("metric must be MAE, RMSE or MAPE");
            return fidelity(pairs, mt);
        },
        py::arg("pairs"), py::arg("metric") = "MAE");

    m.def(
        "mann_whitney_u",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = mann_whitney_u(a, b);
            py::dict d;
            d["u_a"] = r.u_a;
            d["u_b"] = r.u_b;
            d["z"] = r.z;
            d["p_value"] = r.p_value;
            return d;
        },
        py::arg("a"), py::arg("b"));
    m.def("mann_whitney_p_value", &mann_whitney_p_value, py::arg("u"), py::arg("n1"), py::arg("n2"),
          py::arg("tie_term") = 0.0);

    m.def(
        "benchmark_series",
        [](std::size_t n, std::uint64_t seed) {
            const auto s = generate_benchmark_series(n, seed);
            return std::vector<double>(s.values().begin(), s.values().end());
        },
        py::arg("n") = 240, py::arg("seed") = 1);
}
