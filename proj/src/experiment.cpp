#include "sslc2st/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "sslc2st/rng.hpp"

namespace sslc2st {

namespace {

// Substreams of a trial seed.
constexpr std::uint64_t stream_sample_p = 1;
constexpr std::uint64_t stream_sample_q = 2;
constexpr std::uint64_t stream_split = 3;
constexpr std::uint64_t stream_unlabeled = 4;
constexpr std::uint64_t stream_training = 5;
constexpr std::uint64_t stream_permutations = 6;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

} // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::c2st: return "c2st";
    case Method::ssl_c2st: return "ssl-c2st";
    case Method::c2st_m: return "c2st-m";
    case Method::ssl_c2st_m: return "ssl-c2st-m";
    }
    return "c2st";
}

std::string_view to_string(Hypothesis h) noexcept { return h == Hypothesis::h0 ? "H0" : "H1"; }

Method method_from_string(std::string_view name) {
    if (name == "c2st") return Method::c2st;
    if (name == "ssl-c2st") return Method::ssl_c2st;
    if (name == "c2st-m") return Method::c2st_m;
    if (name == "ssl-c2st-m") return Method::ssl_c2st_m;
    throw std::invalid_argument("unknown method: " + std::string(name));
}

Hypothesis hypothesis_from_string(std::string_view name) {
    if (name == "H0" || name == "h0") return Hypothesis::h0;
    if (name == "H1" || name == "h1") return Hypothesis::h1;
    throw std::invalid_argument("unknown hypothesis: " + std::string(name));
}

bool uses_pretraining(Method m) noexcept { return m == Method::ssl_c2st || m == Method::ssl_c2st_m; }
bool uses_embedding_statistic(Method m) noexcept { return m == Method::c2st_m || m == Method::ssl_c2st_m; }

void ExperimentConfig::validate() const {
    if (trials == 0) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    if (dim < 2) throw std::invalid_argument("ExperimentConfig: d must be >= 2");
    if (total_n == 0 || total_n % 4 != 0) {
        throw std::invalid_argument("ExperimentConfig: N must be a positive multiple of 4 (n x 2 clusters x 2 samples)");
    }
    if (n_perm == 0) throw std::invalid_argument("ExperimentConfig: n_perm must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ExperimentConfig: alpha must lie in (0, 1)");
    if (uses_embedding_statistic(method) && norm == EmbeddingNorm::abs_1d && feature != FeatureLayer::p0_scalar) {
        throw std::invalid_argument("ExperimentConfig: abs_1d norm requires the p0_scalar feature");
    }
    train.validate();
}

std::string ExperimentConfig::dataset_name() const { return std::string(to_string(difficulty)); }

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
    j = nlohmann::json{{"dataset", cfg.dataset_name()},
                       {"hypothesis", std::string(to_string(cfg.hypothesis))},
                       {"d", cfg.dim},
                       {"N", cfg.total_n},
                       {"method", std::string(to_string(cfg.method))},
                       {"feature", std::string(to_string(cfg.feature))},
                       {"norm", std::string(to_string(cfg.norm))},
                       {"train", cfg.train},
                       {"n_perm", cfg.n_perm},
                       {"alpha", cfg.alpha},
                       {"tie_rule", std::string(to_string(cfg.tie_rule))},
                       {"trials", cfg.trials},
                       {"seed", cfg.master_seed}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
    if (j.contains("dataset")) cfg.difficulty = difficulty_from_string(j.at("dataset").get<std::string>());
    if (j.contains("hypothesis")) cfg.hypothesis = hypothesis_from_string(j.at("hypothesis").get<std::string>());
    cfg.dim = j.value("d", cfg.dim);
    cfg.total_n = j.value("N", cfg.total_n);
    if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("feature")) cfg.feature = feature_layer_from_string(j.at("feature").get<std::string>());
    if (j.contains("norm")) cfg.norm = embedding_norm_from_string(j.at("norm").get<std::string>());
    if (j.contains("train")) cfg.train = j.at("train").get<TrainConfig>();
    cfg.n_perm = j.value("n_perm", cfg.n_perm);
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("tie_rule")) cfg.tie_rule = tie_rule_from_string(j.at("tie_rule").get<std::string>());
    cfg.trials = j.value("trials", cfg.trials);
    cfg.master_seed = j.value("seed", cfg.master_seed);
    cfg.validate();
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_index) noexcept {
    return mix_seed(master_seed, trial_index);
}

LabeledDataset draw_trial_dataset(const ExperimentConfig& cfg, std::size_t trial_index) {
    const auto seed = trial_seed(cfg.master_seed, trial_index);
    const auto p_spec = make_spec(cfg.difficulty, cfg.dim, HdgmRole::p);
    const auto q_spec =
        make_spec(cfg.difficulty, cfg.dim, cfg.hypothesis == Hypothesis::h0 ? HdgmRole::q_null : HdgmRole::q_alt);
    const Matrix sp = sample_hdgm(p_spec, cfg.n_per_cluster(), mix_seed(seed, stream_sample_p));
    const Matrix sq = sample_hdgm(q_spec, cfg.n_per_cluster(), mix_seed(seed, stream_sample_q));
    return build_dataset(sp, sq);
}

SplitDataset draw_trial_data(const ExperimentConfig& cfg, std::size_t trial_index) {
    const auto seed = trial_seed(cfg.master_seed, trial_index);
    return shuffle_split(draw_trial_dataset(cfg, trial_index), mix_seed(seed, stream_split));
}

Matrix unlabeled_rows(const SplitDataset& split, double unlabeled_fraction, std::uint64_t seed) {
    if (!(unlabeled_fraction >= 0.0 && unlabeled_fraction <= 1.0)) {
        throw std::invalid_argument("unlabeled_rows: fraction must lie in [0, 1]");
    }
    Rng rng(seed);
    const auto n_te = split.test.size();
    const auto take = static_cast<std::size_t>(std::llround(unlabeled_fraction * static_cast<double>(n_te)));
    const auto test_order = rng.permutation(n_te);
    LabeledDataset pool;
    pool.points.resize(static_cast<Eigen::Index>(split.train.size() + take), split.train.points.cols());
    pool.points.topRows(split.train.points.rows()) = split.train.points;
    for (std::size_t i = 0; i < take; ++i) {
        pool.points.row(split.train.points.rows() + static_cast<Eigen::Index>(i)) =
            split.test.points.row(static_cast<Eigen::Index>(test_order[i]));
    }
    pool.labels.assign(split.train.size() + take, 0);
    return strip_labels(pool, rng.uniform_index(std::numeric_limits<std::uint64_t>::max()));
}

TrialResult run_trial_detailed(const ExperimentConfig& cfg, std::size_t trial_index) {
    cfg.validate();
    const auto seed = trial_seed(cfg.master_seed, trial_index);
    const SplitDataset split = draw_trial_data(cfg, trial_index);

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = mix_seed(seed, stream_training);

    TrainedTest trained;
    try {
        std::optional<Mlp> encoder;
        std::vector<double> pretrain_trace;
        if (uses_pretraining(cfg.method)) {
            Matrix unl = unlabeled_rows(split, train_cfg.unlabeled_fraction, mix_seed(seed, stream_unlabeled));
            if (train_cfg.standardize_inputs) unl = Standardizer::fit(split.train.points).apply(unl);
            auto pre = train_autoencoder(unl, train_cfg);
            encoder = std::move(pre.encoder);
            pretrain_trace = std::move(pre.loss_trace);
        }
        trained = train_classifier(encoder, split.train, train_cfg);
        trained.pretrain_loss = std::move(pretrain_trace);
    } catch (const TrainingError& e) {
        throw TrainingError("trial " + std::to_string(trial_index) + ": " + e.what());
    }

    const PermutationOptions popts{cfg.n_perm, cfg.alpha, cfg.tie_rule, mix_seed(seed, stream_permutations)};
    TrialResult result;
    result.test_accuracy = accuracy_statistic(trained, split.test);

    LabeledDataset features;
    features.labels = split.test.labels;
    StatisticFn stat;
    if (uses_embedding_statistic(cfg.method)) {
        features.points = extract_features(trained, split.test.points, cfg.feature);
        stat = [norm = cfg.norm](const Matrix& x, const Matrix& y) { return embedding_statistic(x, y, norm); };
    } else {
        const Labels predicted = predict_labels(trained, split.test.points);
        features.points.resize(static_cast<Eigen::Index>(predicted.size()), 1);
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            features.points(static_cast<Eigen::Index>(i), 0) = predicted[i];
        }
        stat = accuracy_of_predictions;
    }
    result.outcome = permutation_test(stat, features.rows_with_label(0), features.rows_with_label(1), popts);
    result.model = std::move(trained);
    return result;
}

TestOutcome run_trial(const ExperimentConfig& cfg, std::size_t trial_index) {
    return run_trial_detailed(cfg, trial_index).outcome;
}

PowerEstimate PowerEstimate::from_counts(std::size_t rejections, std::size_t trials) {
    PowerEstimate e;
    e.rejections = rejections;
    e.trials = trials;
    if (trials > 0) {
        e.rate = static_cast<double>(rejections) / static_cast<double>(trials);
        e.stderr_ = std::sqrt(e.rate * (1.0 - e.rate) / static_cast<double>(trials));
    }
    return e;
}

PowerEstimate estimate(const ExperimentConfig& cfg, const EstimateOptions& opts) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto over_budget = [&] {
        if (opts.max_seconds <= 0.0) return false;
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        return elapsed.count() > opts.max_seconds;
    };

    std::vector<int> decisions(cfg.trials, -1);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::atomic<bool> budget_hit{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (!stop.load()) {
            if (over_budget()) {
                budget_hit = true;
                return;
            }
            const auto i = next.fetch_add(1);
            if (i >= cfg.trials) return;
            try {
                decisions[i] = run_trial(cfg, i).reject ? 1 : 0;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
        }
    };

    const auto jobs = std::clamp<std::size_t>(opts.jobs, 1, cfg.trials);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    std::size_t done = 0;
    std::size_t rejections = 0;
    for (int d : decisions) {
        if (d >= 0) {
            ++done;
            rejections += static_cast<std::size_t>(d);
        }
    }
    auto est = PowerEstimate::from_counts(rejections, done);
    est.aborted = budget_hit.load() && done < cfg.trials;
    return est;
}

std::vector<ExperimentConfig> SweepGrid::cells() const {
    std::vector<ExperimentConfig> out;
    for (auto method : methods)
        for (auto dataset : datasets)
            for (auto hyp : hypotheses)
                for (auto d : dims)
                    for (auto n : sizes)
                        for (auto frac : unlabeled_fractions) {
                            ExperimentConfig cfg = base;
                            cfg.method = method;
                            cfg.difficulty = dataset;
                            cfg.hypothesis = hyp;
                            cfg.dim = d;
                            cfg.total_n = n;
                            cfg.train.unlabeled_fraction = frac;
                            cfg.validate();
                            out.push_back(std::move(cfg));
                        }
    return out;
}

SweepGrid sweep_grid_from_json(const nlohmann::json& j) {
    SweepGrid grid;
    if (j.contains("train")) grid.base.train = j.at("train").get<TrainConfig>();
    grid.base.n_perm = j.value("n_perm", grid.base.n_perm);
    grid.base.alpha = j.value("alpha", grid.base.alpha);
    grid.base.trials = j.value("trials", grid.base.trials);
    grid.base.master_seed = j.value("seed", grid.base.master_seed);
    if (j.contains("tie_rule")) grid.base.tie_rule = tie_rule_from_string(j.at("tie_rule").get<std::string>());
    if (j.contains("feature")) grid.base.feature = feature_layer_from_string(j.at("feature").get<std::string>());
    if (j.contains("norm")) grid.base.norm = embedding_norm_from_string(j.at("norm").get<std::string>());

    auto strings = [&](const char* key, auto parse, auto& target) {
        if (!j.contains(key)) return;
        target.clear();
        for (const auto& s : j.at(key)) target.push_back(parse(s.template get<std::string>()));
    };
    strings("methods", method_from_string, grid.methods);
    strings("datasets", difficulty_from_string, grid.datasets);
    strings("hypotheses", hypothesis_from_string, grid.hypotheses);
    grid.dims = j.value("d", grid.dims);
    grid.sizes = j.value("N", grid.sizes);
    grid.unlabeled_fractions = j.value("unlabeled_fractions", grid.unlabeled_fractions);
    if (grid.methods.empty() || grid.datasets.empty() || grid.hypotheses.empty() || grid.dims.empty() ||
        grid.sizes.empty() || grid.unlabeled_fractions.empty()) {
        throw std::invalid_argument("sweep grid: every axis needs at least one value");
    }
    return grid;
}

std::string csv_cell_key(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << to_string(cfg.method) << ',' << cfg.dataset_name() << ',' << to_string(cfg.hypothesis) << ','
       << cfg.dim << ',' << cfg.total_n << ',' << format_double(cfg.train.unlabeled_fraction);
    return os.str();
}

std::string csv_cell_key(std::string_view row) {
    std::size_t pos = 0;
    for (int field = 0; field < 6; ++field) {
        pos = row.find(',', pos);
        if (pos == std::string_view::npos) return std::string(row);
        ++pos;
    }
    return std::string(row.substr(0, pos - 1));
}

std::string csv_row(const ExperimentConfig& cfg, const PowerEstimate& est, double runtime_s) {
    std::ostringstream os;
    os << csv_cell_key(cfg) << ',' << est.trials << ',' << format_double(cfg.alpha) << ','
       << (est.aborted ? std::string("nan") : format_double(est.rate)) << ','
       << (est.aborted ? std::string("nan") : format_double(est.stderr_)) << ',' << cfg.master_seed << ','
       << std::fixed << std::setprecision(3) << runtime_s;
    return os.str();
}

SweepSummary sweep(const SweepGrid& grid, std::ostream& out, bool write_header, const SweepOptions& opts) {
    SweepSummary summary;
    if (write_header) out << csv_header << '\n' << std::flush;
    for (const auto& cell : grid.cells()) {
        const auto key = csv_cell_key(cell);
        if (std::find(opts.completed.begin(), opts.completed.end(), key) != opts.completed.end()) {
            ++summary.cells_skipped;
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        PowerEstimate est;
        try {
            est = estimate(cell, opts.estimate);
        } catch (const std::exception& e) {
            ++summary.cells_failed;
            if (opts.on_error) opts.on_error(cell, e.what());
            continue;
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        out << csv_row(cell, est, elapsed.count()) << '\n' << std::flush;
        ++summary.cells_written;
        if (est.aborted) ++summary.cells_failed;
        if (opts.on_cell) opts.on_cell(cell, est);
    }
    return summary;
}

} // namespace sslc2st
