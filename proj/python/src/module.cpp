#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "sslc2st/experiment.hpp"
#include "sslc2st/hdgm.hpp"
#include "sslc2st/pipeline.hpp"
#include "sslc2st/selfcheck.hpp"
#include "sslc2st/stats.hpp"

namespace py = pybind11;
using namespace sslc2st;

namespace {

ExperimentConfig config_from(const std::string& json_text) {
    ExperimentConfig cfg = nlohmann::json::parse(json_text).get<ExperimentConfig>();
    cfg.validate();
    return cfg;
}

py::dict outcome_dict(const TestOutcome& o) {
    py::dict d;
    d["observed"] = o.observed;
    d["perms"] = o.perms;
    d["p_value"] = o.p_value;
    d["reject"] = o.reject;
    d["alpha"] = o.alpha;
    d["tie_rule"] = std::string(to_string(o.tie_rule));
    d["seed"] = o.seed;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Classifier two-sample tests with self-supervised pretraining";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    m.def("mix_seed", &mix_seed, py::arg("base"), py::arg("stream"));

    m.def(
        "sample_hdgm",
        [](const std::string& difficulty, std::size_t dim, const std::string& role, std::size_t n_per_cluster,
           std::uint64_t seed) {
            return sample_hdgm(make_spec(difficulty_from_string(difficulty), dim, role_from_string(role)),
                               n_per_cluster, seed);
        },
        py::arg("difficulty"), py::arg("dim"), py::arg("role"), py::arg("n_per_cluster"), py::arg("seed"));

    m.def(
        "draw_trial_data",
        [](const std::string& config_json, std::size_t trial_index) {
            const SplitDataset s = draw_trial_data(config_from(config_json), trial_index);
            return py::make_tuple(s.train.points, s.train.labels, s.test.points, s.test.labels);
        },
        py::arg("config_json"), py::arg("trial_index"),
        "Returns (train_x, train_labels, test_x, test_labels) for one trial.");

    m.def("normal_cdf", &normal_cdf, py::arg("x"));
    m.def("normal_quantile", &normal_quantile, py::arg("p"));
    m.def(
        "theoretical_power",
        [](double epsilon, std::size_t n_te, double alpha) { return theoretical_power({epsilon, n_te, alpha}); },
        py::arg("epsilon"), py::arg("n_te"), py::arg("alpha") = 0.05);
    m.def("accuracy_threshold", &accuracy_threshold, py::arg("n_te"), py::arg("alpha") = 0.05);
    m.def("objective_j", &objective_j, py::arg("epsilon"));
    m.def("epsilon_hat_from_accuracy", &epsilon_hat_from_accuracy, py::arg("accuracy"));
    m.def(
        "poisson_binomial_pmf",
        [](const std::vector<double>& p) { return poisson_binomial_pmf(p); }, py::arg("probabilities"));
    m.def("ks_uniform_distance", &ks_uniform_distance, py::arg("sample"));
    m.def(
        "embedding_statistic",
        [](const Matrix& x, const Matrix& y, const std::string& norm) {
            return embedding_statistic(x, y, embedding_norm_from_string(norm));
        },
        py::arg("features_x"), py::arg("features_y"), py::arg("norm") = "squared_l2");

    m.def(
        "permutation_test",
        [](const std::function<double(const Matrix&, const Matrix&)>& stat, const Matrix& x, const Matrix& y,
           std::size_t n_perm, double alpha, const std::string& tie_rule, std::uint64_t seed) {
            return outcome_dict(
                permutation_test(stat, x, y, {n_perm, alpha, tie_rule_from_string(tie_rule), seed}));
        },
        py::arg("statistic"), py::arg("x"), py::arg("y"), py::arg("n_perm") = 100, py::arg("alpha") = 0.05,
        py::arg("tie_rule") = "plus_one", py::arg("seed") = 0);

    m.def(
        "run_trial",
        [](const std::string& config_json, std::size_t trial_index) {
            TrialResult r;
            {
                py::gil_scoped_release release;
                r = run_trial_detailed(config_from(config_json), trial_index);
            }
            py::dict d = outcome_dict(r.outcome);
            d["test_accuracy"] = r.test_accuracy;
            return d;
        },
        py::arg("config_json"), py::arg("trial_index"));

    m.def(
        "estimate",
        [](const std::string& config_json, std::size_t jobs) {
            PowerEstimate e;
            {
                py::gil_scoped_release release;
                e = estimate(config_from(config_json), {jobs, 0.0});
            }
            py::dict d;
            d["rejections"] = e.rejections;
            d["trials"] = e.trials;
            d["rate"] = e.rate;
            d["stderr"] = e.stderr_;
            return d;
        },
        py::arg("config_json"), py::arg("jobs") = 1);

    m.def("default_config_json", [] { return nlohmann::json(ExperimentConfig{}).dump(); });
    m.attr("csv_header") = std::string(csv_header);

    m.def(
        "self_check",
        [](std::uint64_t seed) {
            py::list out;
            for (const auto& r : run_all_checks(seed)) out.append(py::make_tuple(r.name, r.passed, r.detail));
            return out;
        },
        py::arg("seed") = 2024);
}
