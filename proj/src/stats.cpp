#include "sslc2st/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sslc2st/rng.hpp"

namespace sslc2st {

double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");

    // Acklam's rational approximation (relative error ~1.15e-9).
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement against the erfc-based CDF.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels) {
    if (predicted.size() != labels.size()) throw ShapeError("accuracy: length mismatch");
    if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy_statistic(const TrainedTest& t, const LabeledDataset& test) {
    if (test.size() == 0) throw std::invalid_argument("accuracy_statistic: empty test set");
    return accuracy(predict_labels(t, test.points), test.labels);
}

std::string_view to_string(EmbeddingNorm n) noexcept {
    return n == EmbeddingNorm::squared_l2 ? "squared_l2" : "abs_1d";
}

EmbeddingNorm embedding_norm_from_string(std::string_view name) {
    if (name == "squared_l2") return EmbeddingNorm::squared_l2;
    if (name == "abs_1d") return EmbeddingNorm::abs_1d;
    throw std::invalid_argument("unknown embedding norm: " + std::string(name));
}

double embedding_statistic(const Matrix& features_x, const Matrix& features_y, EmbeddingNorm norm) {
    if (features_x.cols() != features_y.cols()) {
        throw ShapeError("embedding_statistic: feature widths " + std::to_string(features_x.cols()) +
                         " vs " + std::to_string(features_y.cols()));
    }
    if (features_x.rows() == 0 || features_y.rows() == 0) {
        throw std::invalid_argument("embedding_statistic: empty sample");
    }
    const RowVector diff = features_x.colwise().mean() - features_y.colwise().mean();
    if (norm == EmbeddingNorm::abs_1d) {
        if (features_x.cols() != 1) throw ShapeError("embedding_statistic: abs_1d needs width-1 features");
        return std::abs(diff(0));
    }
    return diff.squaredNorm();
}

void PowerInputs::validate() const {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::domain_error("PowerInputs: epsilon must lie in (0, 1/2)");
    if (n_te == 0) throw std::domain_error("PowerInputs: n_te must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("PowerInputs: alpha must lie in (0, 1)");
}

double theoretical_power(const PowerInputs& inp) {
    inp.validate();
    const double eps = inp.epsilon;
    const double z = normal_quantile(1.0 - inp.alpha);
    const double numerator = (0.5 - eps) * std::sqrt(static_cast<double>(inp.n_te)) - z / 2.0;
    return normal_cdf(numerator / std::sqrt(eps - eps * eps));
}

double accuracy_threshold(std::size_t n_te, double alpha) {
    if (n_te == 0) throw std::domain_error("accuracy_threshold: n_te must be positive");
    return 0.5 + normal_quantile(1.0 - alpha) / std::sqrt(4.0 * static_cast<double>(n_te));
}

double objective_j(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::domain_error("objective_j: epsilon must lie in (0, 1/2)");
    return epsilon / (1.0 - epsilon);
}

double epsilon_hat_from_accuracy(double acc) noexcept {
    return std::clamp(0.5 * (1.0 - acc), 0.0, 0.5);
}

double epsilon_hat(const TrainedTest& t, const LabeledDataset& ds) {
    return epsilon_hat_from_accuracy(accuracy_statistic(t, ds));
}

std::vector<double> poisson_binomial_pmf(std::span<const double> probabilities) {
    std::vector<double> pmf(probabilities.size() + 1, 0.0);
    pmf[0] = 1.0;
    std::size_t filled = 0;
    for (const double raw : probabilities) {
        if (!(raw >= 0.0 && raw <= 1.0)) throw std::domain_error("poisson_binomial_pmf: p outside [0, 1]");
        const double p = raw;
        ++filled;
        for (std::size_t k = filled; k > 0; --k) pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        pmf[0] *= 1.0 - p;
    }
    return pmf;
}

double ks_uniform_distance(std::vector<double> sample) {
    if (sample.empty()) throw std::invalid_argument("ks_uniform_distance: empty sample");
    std::sort(sample.begin(), sample.end());
    const auto n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double x = std::clamp(sample[i], 0.0, 1.0);
        d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

std::string_view to_string(TieRule r) noexcept {
    return r == TieRule::plus_one ? "plus_one" : "paper_strict";
}

TieRule tie_rule_from_string(std::string_view name) {
    if (name == "plus_one") return TieRule::plus_one;
    if (name == "paper_strict") return TieRule::paper_strict;
    throw std::invalid_argument("unknown tie rule: " + std::string(name));
}

nlohmann::json outcome_to_json(const TestOutcome& o) {
    return {{"observed", o.observed}, {"p_value", o.p_value},      {"reject", o.reject},
            {"alpha", o.alpha},       {"n_perm", o.perms.size()},  {"tie_rule", std::string(to_string(o.tie_rule))},
            {"seed", o.seed}};
}

double permutation_p_value(double observed, std::span<const double> perms, TieRule rule) {
    if (perms.empty()) throw std::invalid_argument("permutation_p_value: no permutations");
    std::size_t count = 0;
    if (rule == TieRule::plus_one) {
        for (double s : perms) count += s >= observed ? 1 : 0;
        return static_cast<double>(1 + count) / static_cast<double>(perms.size() + 1);
    }
    for (double s : perms) count += s > observed ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(perms.size());
}

double accuracy_of_predictions(const Matrix& x_predictions, const Matrix& y_predictions) {
    if (x_predictions.cols() != 1 || y_predictions.cols() != 1) {
        throw ShapeError("accuracy_of_predictions: expects single prediction columns");
    }
    const auto total = x_predictions.rows() + y_predictions.rows();
    if (total == 0) throw std::invalid_argument("accuracy_of_predictions: empty input");
    const auto hits = (x_predictions.array() < 0.5).count() + (y_predictions.array() >= 0.5).count();
    return static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

Matrix pool_rows(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.cols()) throw ShapeError("permutation test: x and y have different widths");
    if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("permutation test: empty sample");
    Matrix pooled(x.rows() + y.rows(), x.cols());
    pooled.topRows(x.rows()) = x;
    pooled.bottomRows(y.rows()) = y;
    return pooled;
}

} // namespace

TestOutcome permutation_test(const StatisticFn& stat, const Matrix& x, const Matrix& y,
                             const PermutationOptions& opts) {
    if (opts.n_perm == 0) throw std::invalid_argument("permutation_test: n_perm must be >= 1");
    const Matrix pooled = pool_rows(x, y);
    const Eigen::Index nx = x.rows();
    const Eigen::Index ny = y.rows();

    TestOutcome out;
    out.alpha = opts.alpha;
    out.tie_rule = opts.tie_rule;
    out.seed = opts.seed;
    out.observed = stat(x, y);
    out.perms.reserve(opts.n_perm);

    Matrix px(nx, pooled.cols());
    Matrix py(ny, pooled.cols());
    for (std::size_t i = 0; i < opts.n_perm; ++i) {
        Rng rng(mix_seed(opts.seed, i));
        const auto order = rng.permutation(static_cast<std::size_t>(pooled.rows()));
        for (Eigen::Index r = 0; r < nx; ++r) px.row(r) = pooled.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]));
        for (Eigen::Index r = 0; r < ny; ++r) py.row(r) = pooled.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(nx + r)]));
        out.perms.push_back(stat(px, py));
    }
    out.p_value = permutation_p_value(out.observed, out.perms, opts.tie_rule);
    out.reject = out.p_value <= opts.alpha;
    return out;
}

TestOutcome exact_permutation_test(const StatisticFn& stat, const Matrix& x, const Matrix& y, double alpha) {
    const Matrix pooled = pool_rows(x, y);
    const auto n = static_cast<std::size_t>(pooled.rows());
    if (n > 24) throw std::invalid_argument("exact_permutation_test: at most 24 pooled rows");
    const auto nx = static_cast<std::size_t>(x.rows());

    TestOutcome out;
    out.alpha = alpha;
    out.tie_rule = TieRule::plus_one;
    out.observed = stat(x, y);

    // in_x[k] marks membership of pooled row k in the first sample; start
    // from the lexicographically largest mask and walk all C(n, nx) masks.
    std::vector<int> in_x(n, 0);
    std::fill(in_x.begin(), in_x.begin() + static_cast<std::ptrdiff_t>(nx), 1);
    Matrix px(x.rows(), pooled.cols());
    Matrix py(y.rows(), pooled.cols());
    std::size_t at_least = 0;
    do {
        Eigen::Index rx = 0;
        Eigen::Index ry = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (in_x[k] != 0) {
                px.row(rx++) = pooled.row(static_cast<Eigen::Index>(k));
            } else {
                py.row(ry++) = pooled.row(static_cast<Eigen::Index>(k));
            }
        }
        const double s = stat(px, py);
        out.perms.push_back(s);
        at_least += s >= out.observed ? 1 : 0;
    } while (std::prev_permutation(in_x.begin(), in_x.end()));

    out.p_value = static_cast<double>(at_least) / static_cast<double>(out.perms.size());
    out.reject = out.p_value <= alpha;
    return out;
}

} // namespace sslc2st
