#pragma once

// Bimodal high-dimensional Gaussian mixture (HDGM) generators and the
// labeled two-sample dataset they feed.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sslc2st/matrix.hpp"

namespace sslc2st {

/// Which side of the two-sample pair a spec generates.
///   p      : sum_i N(mu_i, I)
///   q_null : identical to p (the HDGM-S null)
///   q_alt  : sum_i N(mu_i + delta_q, Sigma_i), Sigma_i carrying +-0.5 in the
///            leading 2x2 block (the HDGM-D alternative)
enum class HdgmRole { p, q_null, q_alt };

enum class Difficulty { easy, medium, hard };

std::string_view to_string(HdgmRole r) noexcept;
std::string_view to_string(Difficulty d) noexcept;
HdgmRole role_from_string(std::string_view name);
Difficulty difficulty_from_string(std::string_view name);

struct HdgmSpec {
    static constexpr std::size_t cluster_count = 2;
    /// Off-diagonal covariance of cluster i in the q_alt role.
    static constexpr double cluster_correlation[cluster_count] = {0.5, -0.5};

    std::size_t dim = 10;
    double delta_mu = 0.5;
    double delta_q = 0.0;
    HdgmRole role = HdgmRole::p;

    /// Throws std::invalid_argument on d < 2 or non-finite gaps.
    void validate() const;

    /// mu_1 = 0, mu_i = mu_{i-1} + delta_mu * 1; q_alt adds delta_q to every coordinate.
    Vector cluster_mean(std::size_t cluster) const;
    Matrix cluster_covariance(std::size_t cluster) const;

    bool operator==(const HdgmSpec&) const = default;
};

struct DifficultyGaps {
    double delta_mu;
    double delta_q;
};

/// (delta_mu, delta_q): easy (10, 5), medium (10, 0), hard (0.5, 0).
DifficultyGaps difficulty_gaps(Difficulty d) noexcept;
HdgmSpec make_spec(Difficulty d, std::size_t dim, HdgmRole role);

void to_json(nlohmann::json& j, const HdgmSpec& spec);
void from_json(const nlohmann::json& j, HdgmSpec& spec);

/// Draws exactly n_per_cluster rows from each cluster, cluster 1 first.
/// Pure function of (spec, n_per_cluster, seed).
Matrix sample_hdgm(const HdgmSpec& spec, std::size_t n_per_cluster, std::uint64_t seed);

struct LabeledDataset {
    Matrix points;
    Labels labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(points.cols()); }
    std::size_t count(std::uint8_t label) const noexcept;

    /// Rows carrying the given label, in dataset order.
    Matrix rows_with_label(std::uint8_t label) const;
};

struct SplitDataset {
    LabeledDataset train;
    LabeledDataset test;

    std::size_t n_te() const noexcept { return test.size(); }
};

/// Labels sp rows 0 and sq rows 1. Requires equal, nonzero row counts and dims.
LabeledDataset build_dataset(const Matrix& sp, const Matrix& sq);

/// Stratified half/half split: each half gets exactly half of each label.
/// Both halves are returned in shuffled order.
SplitDataset shuffle_split(const LabeledDataset& ds, std::uint64_t seed);

/// All rows in shuffled order with the labels dropped.
Matrix strip_labels(const LabeledDataset& ds, std::uint64_t seed);

/// Subset of rows by index, in the given order.
LabeledDataset select_rows(const LabeledDataset& ds, std::span<const std::size_t> rows);

/// JSON-Lines: a header record {"header": {...}} followed by one
/// {"x": [...], "label": 0|1} record per point.
void write_dataset_jsonl(std::ostream& out, const LabeledDataset& ds, const nlohmann::json& header);

struct DatasetFile {
    nlohmann::json header;
    LabeledDataset data;
};
DatasetFile read_dataset_jsonl(std::istream& in);

} // namespace sslc2st
