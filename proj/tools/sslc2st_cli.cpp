// sslc2st: command-line front end.
//
//   gen     write an HDGM two-sample dataset as JSON-Lines
//   run     run one experiment cell and print a JSON summary
//   sweep   run a grid of cells and append CSV rows
//   theory  evaluate the closed-form C2ST power
//   check   run the numerical self-checks

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sslc2st/experiment.hpp"
#include "sslc2st/hdgm.hpp"
#include "sslc2st/pipeline.hpp"
#include "sslc2st/selfcheck.hpp"
#include "sslc2st/stats.hpp"

using namespace sslc2st;
using nlohmann::json;

namespace {

struct CellFlags {
    std::string config_path;
    std::string dataset = "hard";
    std::string hypothesis = "H1";
    std::size_t dim = 10;
    std::size_t total_n = 4000;
    std::string method = "ssl-c2st";
    std::string feature = "p0_scalar";
    std::string norm = "abs_1d";
    std::size_t n_perm = 100;
    double alpha = 0.05;
    std::string tie_rule = "plus_one";
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    double unlabeled_fraction = 1.0;
    bool freeze_encoder = false;
    bool raw_inputs = false;
    std::size_t pretrain_epochs = 100;
    std::size_t classifier_epochs = 100;
};

void add_cell_flags(CLI::App* cmd, CellFlags& f) {
    cmd->add_option("--config", f.config_path, "ExperimentConfig JSON file; when given, the cell flags are ignored");
    cmd->add_option("--dataset", f.dataset, "hdgm difficulty: easy, medium, hard")->capture_default_str();
    cmd->add_option("--hypothesis", f.hypothesis, "H0 (HDGM-S) or H1 (HDGM-D)")->capture_default_str();
    cmd->add_option("--d", f.dim, "dimension")->capture_default_str();
    cmd->add_option("--N", f.total_n, "total size of both samples")->capture_default_str();
    cmd->add_option("--method", f.method, "c2st, ssl-c2st, c2st-m, ssl-c2st-m")->capture_default_str();
    cmd->add_option("--feature", f.feature, "M-variant features: p0_scalar, hidden_rep, logits")->capture_default_str();
    cmd->add_option("--norm", f.norm, "M-variant statistic: abs_1d, squared_l2")->capture_default_str();
    cmd->add_option("--n-perm", f.n_perm, "permutations per test")->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "significance level")->capture_default_str();
    cmd->add_option("--tie-rule", f.tie_rule, "plus_one or paper_strict")->capture_default_str();
    cmd->add_option("--trials", f.trials, "independent trials")->capture_default_str();
    cmd->add_option("--seed", f.seed, "master seed")->capture_default_str();
    cmd->add_option("--unlabeled-fraction", f.unlabeled_fraction, "share of the test half used for pretraining")
        ->capture_default_str();
    cmd->add_flag("--freeze-encoder", f.freeze_encoder, "train only the head in phase 2");
    cmd->add_flag("--raw-inputs", f.raw_inputs, "skip input standardization");
    cmd->add_option("--pretrain-epochs", f.pretrain_epochs, "autoencoder epochs")->capture_default_str();
    cmd->add_option("--classifier-epochs", f.classifier_epochs, "classifier epochs")->capture_default_str();
}

ExperimentConfig config_from_flags(const CellFlags& f) {
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw std::runtime_error("cannot open config " + f.config_path);
        return json::parse(in).get<ExperimentConfig>();
    }
    ExperimentConfig cfg;
    cfg.difficulty = difficulty_from_string(f.dataset);
    cfg.hypothesis = hypothesis_from_string(f.hypothesis);
    cfg.dim = f.dim;
    cfg.total_n = f.total_n;
    cfg.method = method_from_string(f.method);
    cfg.feature = feature_layer_from_string(f.feature);
    cfg.norm = embedding_norm_from_string(f.norm);
    cfg.n_perm = f.n_perm;
    cfg.alpha = f.alpha;
    cfg.tie_rule = tie_rule_from_string(f.tie_rule);
    cfg.trials = f.trials;
    cfg.master_seed = f.seed;
    cfg.train.unlabeled_fraction = f.unlabeled_fraction;
    cfg.train.freeze_encoder = f.freeze_encoder;
    cfg.train.standardize_inputs = !f.raw_inputs;
    cfg.train.pretrain_epochs = f.pretrain_epochs;
    cfg.train.classifier_epochs = f.classifier_epochs;
    cfg.validate();
    return cfg;
}

int cmd_gen(const CellFlags& f, const std::string& out_path) {
    const ExperimentConfig cfg = config_from_flags(f);
    const auto p = make_spec(cfg.difficulty, cfg.dim, HdgmRole::p);
    const auto q = make_spec(cfg.difficulty, cfg.dim,
                             cfg.hypothesis == Hypothesis::h0 ? HdgmRole::q_null : HdgmRole::q_alt);
    const json header{{"p", p}, {"q", q}, {"seed", cfg.master_seed}, {"n_per_cluster", cfg.n_per_cluster()}};
    const auto ds = draw_trial_dataset(cfg, 0);
    if (out_path.empty() || out_path == "-") {
        write_dataset_jsonl(std::cout, ds, header);
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        write_dataset_jsonl(out, ds, header);
    }
    return 0;
}

int cmd_run(const CellFlags& f, std::size_t jobs, bool per_trial, const std::string& model_path) {
    const ExperimentConfig cfg = config_from_flags(f);
    const auto start = std::chrono::steady_clock::now();
    json report{{"config", cfg}};
    if (per_trial || !model_path.empty()) {
        json outcomes = json::array();
        std::size_t rejections = 0;
        for (std::size_t i = 0; i < cfg.trials; ++i) {
            auto r = run_trial_detailed(cfg, i);
            rejections += r.outcome.reject ? 1 : 0;
            auto o = outcome_to_json(r.outcome);
            o["trial"] = i;
            o["test_accuracy"] = r.test_accuracy;
            outcomes.push_back(std::move(o));
            if (i == 0 && !model_path.empty()) {
                std::ofstream out(model_path);
                out << trained_test_to_json(r.model).dump() << '\n';
            }
        }
        const auto est = PowerEstimate::from_counts(rejections, cfg.trials);
        report["estimate"] = {{"rejections", est.rejections}, {"trials", est.trials},
                              {"rate", est.rate}, {"stderr", est.stderr_}};
        report["outcomes"] = std::move(outcomes);
    } else {
        const auto est = estimate(cfg, {jobs, 0.0});
        report["estimate"] = {{"rejections", est.rejections}, {"trials", est.trials},
                              {"rate", est.rate}, {"stderr", est.stderr_}};
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    report["runtime_s"] = elapsed.count();
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_sweep(const std::string& grid_path, const std::string& out_path, bool resume, std::size_t jobs,
              double max_seconds) {
    std::ifstream in(grid_path);
    if (!in) throw std::runtime_error("cannot open grid " + grid_path);
    const SweepGrid grid = sweep_grid_from_json(json::parse(in));

    SweepOptions opts;
    opts.estimate = {jobs, max_seconds};
    bool write_header = true;
    if (resume && std::filesystem::exists(out_path)) {
        std::ifstream existing(out_path);
        std::string line;
        while (std::getline(existing, line)) {
            if (line.rfind("method,", 0) == 0) {
                write_header = false;
            } else if (!line.empty()) {
                opts.completed.push_back(csv_cell_key(line));
            }
        }
    }
    opts.on_cell = [](const ExperimentConfig& cell, const PowerEstimate& est) {
        std::cerr << csv_cell_key(cell) << " -> rate " << est.rate << (est.aborted ? " (aborted)" : "") << '\n';
    };
    opts.on_error = [](const ExperimentConfig& cell, const std::string& what) {
        std::cerr << csv_cell_key(cell) << " failed: " << what << '\n';
    };

    std::ofstream out(out_path, resume ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    const auto summary = sweep(grid, out, write_header, opts);
    std::cerr << summary.cells_written << " written, " << summary.cells_skipped << " skipped, "
              << summary.cells_failed << " failed\n";
    return summary.cells_failed == 0 ? 0 : 1;
}

int cmd_theory(double eps, std::size_t n_te, double alpha) {
    const PowerInputs inp{eps, n_te, alpha};
    const json report{{"epsilon", eps},
                      {"n_te", n_te},
                      {"alpha", alpha},
                      {"power", theoretical_power(inp)},
                      {"threshold", accuracy_threshold(n_te, alpha)},
                      {"objective_j", objective_j(eps)}};
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_check(std::uint64_t seed) {
    bool ok = true;
    for (const auto& r : run_all_checks(seed)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classifier two-sample tests with autoencoder pretraining"};
    app.require_subcommand(1);

    CellFlags gen_flags;
    std::string gen_out = "-";
    auto* gen = app.add_subcommand("gen", "write an HDGM dataset as JSON-Lines");
    add_cell_flags(gen, gen_flags);
    gen->add_option("--out,-o", gen_out, "output path ('-' for stdout)");

    CellFlags run_flags;
    std::size_t run_jobs = 1;
    bool per_trial = false;
    std::string model_path;
    auto* run = app.add_subcommand("run", "run one cell and print a JSON outcome");
    add_cell_flags(run, run_flags);
    run->add_option("--jobs,-j", run_jobs, "concurrent trials")->capture_default_str();
    run->add_flag("--per-trial", per_trial, "include every trial's outcome");
    run->add_option("--dump-model", model_path, "write trial 0's trained model as JSON");

    std::string grid_path;
    std::string csv_path = "results.csv";
    bool resume = false;
    std::size_t sweep_jobs = 1;
    double max_seconds = 0.0;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a grid of cells and write CSV rows");
    sweep_cmd->add_option("--grid", grid_path, "grid JSON")->required();
    sweep_cmd->add_option("--out,-o", csv_path, "CSV output")->capture_default_str();
    sweep_cmd->add_flag("--resume", resume, "skip cells already present in the output");
    sweep_cmd->add_option("--jobs,-j", sweep_jobs, "concurrent trials per cell")->capture_default_str();
    sweep_cmd->add_option("--max-seconds", max_seconds, "per-cell wall-time budget (0 = none)");

    double eps = 0.25;
    std::size_t n_te = 100;
    double alpha = 0.05;
    auto* theory = app.add_subcommand("theory", "closed-form C2ST test power");
    theory->add_option("--eps", eps, "classifier inability in (0, 1/2)")->required();
    theory->add_option("--n-te", n_te, "test-set size")->required();
    theory->add_option("--alpha", alpha, "significance level")->capture_default_str();

    std::uint64_t check_seed = 2024;
    auto* check = app.add_subcommand("check", "run gradient, oracle and uniformity self-checks");
    check->add_option("--seed", check_seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(gen_flags, gen_out);
        if (run->parsed()) return cmd_run(run_flags, run_jobs, per_trial, model_path);
        if (sweep_cmd->parsed()) return cmd_sweep(grid_path, csv_path, resume, sweep_jobs, max_seconds);
        if (theory->parsed()) return cmd_theory(eps, n_te, alpha);
        if (check->parsed()) return cmd_check(check_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
