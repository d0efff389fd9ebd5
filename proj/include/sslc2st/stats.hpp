#pragma once

// Test statistics, analytic power results, and the permutation test.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sslc2st/hdgm.hpp"
#include "sslc2st/matrix.hpp"
#include "sslc2st/pipeline.hpp"

namespace sslc2st {

/// Standard normal CDF.
double normal_cdf(double x) noexcept;

/// Standard normal quantile for p in (0, 1): rational initial guess
/// refined by a Newton step against normal_cdf.
double normal_quantile(double p);

/// Fraction of rows whose argmax prediction equals the label.
double accuracy_statistic(const TrainedTest& t, const LabeledDataset& test);
double accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels);

enum class EmbeddingNorm { squared_l2, abs_1d };
std::string_view to_string(EmbeddingNorm n) noexcept;
EmbeddingNorm embedding_norm_from_string(std::string_view name);

/// Linear-kernel MMD between feature sets: squared L2 distance of the row
/// means, or the absolute difference for single-column features.
double embedding_statistic(const Matrix& features_x, const Matrix& features_y, EmbeddingNorm norm);

struct PowerInputs {
    double epsilon = 0.25; ///< inability, open interval (0, 1/2)
    std::size_t n_te = 100;
    double alpha = 0.05;

    void validate() const;
};

/// Phi(((1/2 - eps) sqrt(n_te) - Phi^-1(1 - alpha)/2) / sqrt(eps - eps^2))
double theoretical_power(const PowerInputs& inp);

/// Null rejection threshold on the accuracy: 1/2 + Phi^-1(1 - alpha)/sqrt(4 n_te).
double accuracy_threshold(std::size_t n_te, double alpha);

/// Surrogate power objective eps / (1 - eps) on (0, 1/2).
double objective_j(double epsilon);

/// Half the empirical misclassification rate, clamped into [0, 1/2].
double epsilon_hat(const TrainedTest& t, const LabeledDataset& ds);
double epsilon_hat_from_accuracy(double accuracy) noexcept;

/// Exact pmf of a sum of independent Bernoulli(p_i) over {0..n}, by
/// convolving one Bernoulli at a time.
std::vector<double> poisson_binomial_pmf(std::span<const double> probabilities);

/// sup_x |F_n(x) - x| for a sample on [0, 1].
double ks_uniform_distance(std::vector<double> sample);

enum class TieRule {
    paper_strict, ///< p = #{perm > observed} / n_perm
    plus_one,     ///< p = (1 + #{perm >= observed}) / (n_perm + 1)
};
std::string_view to_string(TieRule r) noexcept;
TieRule tie_rule_from_string(std::string_view name);

struct TestOutcome {
    double observed = 0.0;
    std::vector<double> perms;
    double p_value = 1.0;
    bool reject = false;
    double alpha = 0.05;
    TieRule tie_rule = TieRule::plus_one;
    std::uint64_t seed = 0;

    bool operator==(const TestOutcome&) const = default;
};

/// {observed, p_value, reject, alpha, n_perm, tie_rule, seed}
nlohmann::json outcome_to_json(const TestOutcome& outcome);

double permutation_p_value(double observed, std::span<const double> perms, TieRule rule);

/// A statistic of two samples, each given as rows of features.
using StatisticFn = std::function<double(const Matrix& x, const Matrix& y)>;

/// Accuracy of a fixed 0/1 prediction column when the x rows carry label 0
/// and the y rows label 1. Both inputs are (n x 1) prediction columns.
double accuracy_of_predictions(const Matrix& x_predictions, const Matrix& y_predictions);

struct PermutationOptions {
    std::size_t n_perm = 100;
    double alpha = 0.05;
    TieRule tie_rule = TieRule::plus_one;
    std::uint64_t seed = 0;
};

/// Pools the rows of x and y and, for each permutation, reshuffles them into
/// halves of the original sizes. Permutation i draws from substream
/// mix_seed(seed, i), so results do not depend on evaluation order.
TestOutcome permutation_test(const StatisticFn& stat, const Matrix& x, const Matrix& y,
                             const PermutationOptions& opts);

/// Enumerates every split of the pooled rows into the original sizes.
/// p = #{splits with stat >= observed} / #splits (the identity split
/// included). Limited to 24 pooled rows.
TestOutcome exact_permutation_test(const StatisticFn& stat, const Matrix& x, const Matrix& y, double alpha);

} // namespace sslc2st
