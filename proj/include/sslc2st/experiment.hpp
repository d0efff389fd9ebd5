#pragma once

// Monte-Carlo harness: one trial = fresh HDGM draw, split, (pretrain),
// train, permutation test. Cells aggregate trials into rejection rates.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sslc2st/hdgm.hpp"
#include "sslc2st/pipeline.hpp"
#include "sslc2st/stats.hpp"

namespace sslc2st {

enum class Method { c2st, ssl_c2st, c2st_m, ssl_c2st_m };
enum class Hypothesis { h0, h1 };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(Hypothesis h) noexcept;
Method method_from_string(std::string_view name);
Hypothesis hypothesis_from_string(std::string_view name);

bool uses_pretraining(Method m) noexcept;
bool uses_embedding_statistic(Method m) noexcept;

struct ExperimentConfig {
    Difficulty difficulty = Difficulty::hard;
    Hypothesis hypothesis = Hypothesis::h1;
    std::size_t dim = 10;
    std::size_t total_n = 4000; ///< N = n_per_cluster * 2 clusters * 2 samples
    Method method = Method::ssl_c2st;
    FeatureLayer feature = FeatureLayer::p0_scalar;
    EmbeddingNorm norm = EmbeddingNorm::abs_1d;
    TrainConfig train;
    std::size_t n_perm = 100;
    double alpha = 0.05;
    TieRule tie_rule = TieRule::plus_one;
    std::size_t trials = 100;
    std::uint64_t master_seed = 0;

    void validate() const;
    std::size_t n_per_cluster() const noexcept { return total_n / 4; }

    /// Label used in the dataset CSV column, e.g. "hdgm-hard".
    std::string dataset_name() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

/// Seed of trial i: a pure function of (master seed, i).
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_index) noexcept;

/// Draws the trial's (S_P, S_Q) pair as one labeled dataset.
LabeledDataset draw_trial_dataset(const ExperimentConfig& cfg, std::size_t trial_index);

/// draw_trial_dataset followed by the trial's stratified split.
SplitDataset draw_trial_data(const ExperimentConfig& cfg, std::size_t trial_index);

/// Rows used for autoencoder pretraining: the labeled half plus
/// round(unlabeled_fraction * n_te) rows of the test half, shuffled.
Matrix unlabeled_rows(const SplitDataset& split, double unlabeled_fraction, std::uint64_t seed);

struct TrialResult {
    TestOutcome outcome;
    double test_accuracy = 0.0;
    TrainedTest model;
};

/// One full execution of the test. Training failures are rethrown as
/// TrainingError naming the trial index.
TrialResult run_trial_detailed(const ExperimentConfig& cfg, std::size_t trial_index);
TestOutcome run_trial(const ExperimentConfig& cfg, std::size_t trial_index);

struct PowerEstimate {
    std::size_t rejections = 0;
    std::size_t trials = 0;
    double rate = 0.0;
    double stderr_ = 0.0;
    bool aborted = false; ///< budget exhausted before every trial ran

    static PowerEstimate from_counts(std::size_t rejections, std::size_t trials);
};

struct EstimateOptions {
    std::size_t jobs = 1;
    /// Stop scheduling new trials once this much wall time has passed (0 = no limit).
    double max_seconds = 0.0;
};

/// Runs trials 0..cfg.trials-1 (up to `jobs` at a time) and aggregates.
PowerEstimate estimate(const ExperimentConfig& cfg, const EstimateOptions& opts = {});

/// Cartesian grid of cells sharing the scalar settings.
struct SweepGrid {
    std::vector<Method> methods{Method::c2st, Method::ssl_c2st};
    std::vector<Difficulty> datasets{Difficulty::hard};
    std::vector<Hypothesis> hypotheses{Hypothesis::h1};
    std::vector<std::size_t> dims{10};
    std::vector<std::size_t> sizes{4000};
    std::vector<double> unlabeled_fractions{1.0};
    ExperimentConfig base; ///< scalar settings and TrainConfig shared by all cells

    std::vector<ExperimentConfig> cells() const;
};

SweepGrid sweep_grid_from_json(const nlohmann::json& j);

inline constexpr std::string_view csv_header =
    "method,dataset,hypothesis,d,N,unlabeled_fraction,trials,alpha,rate,stderr,seed,runtime_s";

std::string csv_row(const ExperimentConfig& cfg, const PowerEstimate& est, double runtime_s);

/// Key identifying a cell (everything before the trials column).
std::string csv_cell_key(const ExperimentConfig& cfg);
std::string csv_cell_key(std::string_view row);

struct SweepOptions {
    EstimateOptions estimate;
    /// Keys of cells already on disk; matching cells are skipped.
    std::vector<std::string> completed;
    std::function<void(const ExperimentConfig&, const PowerEstimate&)> on_cell;
    std::function<void(const ExperimentConfig&, const std::string&)> on_error;
};

struct SweepSummary {
    std::size_t cells_written = 0;
    std::size_t cells_skipped = 0;
    std::size_t cells_failed = 0;
};

/// Writes one CSV row per cell to `out`, flushing after each. The header is
/// written only when `write_header` is set. Failing cells are reported
/// through the summary after the remaining cells complete.
SweepSummary sweep(const SweepGrid& grid, std::ostream& out, bool write_header, const SweepOptions& opts = {});

} // namespace sslc2st
