#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "sslc2st/hdgm.hpp"

using namespace sslc2st;

namespace {

Matrix cluster_block(const Matrix& all, std::size_t cluster, std::size_t n) {
    return all.middleRows(static_cast<Eigen::Index>(cluster * n), static_cast<Eigen::Index>(n));
}

Matrix sample_covariance(const Matrix& x) {
    const RowVector mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).data(), m.row(i).data() + m.cols());
    std::sort(out.begin(), out.end());
    return out;
}

Matrix iota_rows(Eigen::Index n, Eigen::Index d, double offset) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = offset + static_cast<double>(i);
    return m;
}

} // namespace

TEST(HdgmSpec, DifficultyGaps) {
    EXPECT_EQ(difficulty_gaps(Difficulty::easy).delta_mu, 10.0);
    EXPECT_EQ(difficulty_gaps(Difficulty::easy).delta_q, 5.0);
    EXPECT_EQ(difficulty_gaps(Difficulty::medium).delta_mu, 10.0);
    EXPECT_EQ(difficulty_gaps(Difficulty::medium).delta_q, 0.0);
    EXPECT_EQ(difficulty_gaps(Difficulty::hard).delta_mu, 0.5);
    EXPECT_EQ(difficulty_gaps(Difficulty::hard).delta_q, 0.0);
}

TEST(HdgmSpec, MeansAndCovariances) {
    const HdgmSpec alt = make_spec(Difficulty::easy, 4, HdgmRole::q_alt);
    EXPECT_EQ(alt.cluster_mean(0), Vector::Constant(4, 5.0));
    EXPECT_EQ(alt.cluster_mean(1), Vector::Constant(4, 15.0));
    const Matrix c0 = alt.cluster_covariance(0);
    const Matrix c1 = alt.cluster_covariance(1);
    EXPECT_EQ(c0(0, 1), 0.5);
    EXPECT_EQ(c1(1, 0), -0.5);
    EXPECT_EQ(c0(2, 3), 0.0);

    const HdgmSpec p = make_spec(Difficulty::easy, 4, HdgmRole::p);
    EXPECT_EQ(p.cluster_mean(0), Vector::Zero(4));
    EXPECT_EQ(p.cluster_covariance(1), Matrix::Identity(4, 4));
}

TEST(HdgmSpec, NullRoleMatchesP) {
    for (auto diff : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
        const HdgmSpec p = make_spec(diff, 10, HdgmRole::p);
        const HdgmSpec q = make_spec(diff, 10, HdgmRole::q_null);
        EXPECT_EQ(sample_hdgm(p, 20, 5), sample_hdgm(q, 20, 5));
    }
}

TEST(HdgmSpec, ValidationAndJson) {
    HdgmSpec bad;
    bad.dim = 1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);

    const HdgmSpec spec = make_spec(Difficulty::hard, 7, HdgmRole::q_alt);
    const nlohmann::json j = spec;
    EXPECT_EQ(j.at("d"), 7);
    EXPECT_EQ(j.at("delta_mu"), 0.5);
    EXPECT_EQ(j.at("delta_q"), 0.0);
    EXPECT_EQ(j.at("role"), "Q-alt");
    EXPECT_EQ(j.get<HdgmSpec>(), spec);
    EXPECT_EQ(difficulty_from_string("hdgm-medium"), Difficulty::medium);
    EXPECT_THROW(role_from_string("R"), std::invalid_argument);
}

TEST(SampleHdgm, ShapeAndPurity) {
    const HdgmSpec spec = make_spec(Difficulty::hard, 3, HdgmRole::q_alt);
    const Matrix a = sample_hdgm(spec, 5, 42);
    EXPECT_EQ(a.rows(), 10);
    EXPECT_EQ(a.cols(), 3);
    EXPECT_EQ(a, sample_hdgm(spec, 5, 42));
    EXPECT_NE(a, sample_hdgm(spec, 5, 43));
}

TEST(SampleHdgm, ClusterOneMeanIsZero) {
    const std::size_t n = 50000;
    const Matrix all = sample_hdgm(make_spec(Difficulty::hard, 10, HdgmRole::p), n, 1);
    const RowVector mean = cluster_block(all, 0, n).colwise().mean();
    for (Eigen::Index j = 0; j < 10; ++j) EXPECT_LT(std::abs(mean(j)), 3.0 / std::sqrt(50000.0)) << j;
}

TEST(SampleHdgm, QAltCorrelationOfLeadingDims) {
    const std::size_t n = 50000;
    const Matrix all = sample_hdgm(make_spec(Difficulty::hard, 10, HdgmRole::q_alt), n, 2);
    for (std::size_t cluster : {0u, 1u}) {
        const Matrix cov = sample_covariance(cluster_block(all, cluster, n));
        const double corr = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
        EXPECT_NEAR(corr, cluster == 0 ? 0.5 : -0.5, 0.02);
    }
}

TEST(SampleHdgm, CovarianceConvergesToSpec) {
    const std::size_t n = 50000;
    for (std::uint64_t seed : {10u, 11u, 12u}) {
        for (auto role : {HdgmRole::p, HdgmRole::q_alt}) {
            const HdgmSpec spec = make_spec(Difficulty::medium, 10, role);
            const Matrix all = sample_hdgm(spec, n, seed);
            for (std::size_t cluster : {0u, 1u}) {
                const Matrix diff = sample_covariance(cluster_block(all, cluster, n)) - spec.cluster_covariance(cluster);
                EXPECT_LT(diff.norm(), 0.1) << "seed " << seed << " cluster " << cluster;
                const Vector mean_gap =
                    cluster_block(all, cluster, n).colwise().mean().transpose() - spec.cluster_mean(cluster);
                EXPECT_LT(mean_gap.cwiseAbs().maxCoeff(), 0.03);
            }
        }
    }
}

TEST(BuildDataset, LabelsAndErrors) {
    const Matrix sp = iota_rows(3, 2, 0.0);
    const Matrix sq = iota_rows(3, 2, 100.0);
    const LabeledDataset ds = build_dataset(sp, sq);
    EXPECT_EQ(ds.size(), 6u);
    EXPECT_EQ(ds.labels, (Labels{0, 0, 0, 1, 1, 1}));
    EXPECT_EQ(ds.rows_with_label(1), sq);

    EXPECT_THROW(build_dataset(Matrix(0, 2), Matrix(0, 2)), std::invalid_argument);
    EXPECT_THROW(build_dataset(sp, iota_rows(2, 2, 0.0)), std::invalid_argument);
    EXPECT_THROW(build_dataset(sp, iota_rows(3, 3, 0.0)), std::invalid_argument);

    const LabeledDataset same = build_dataset(sp, sp);
    EXPECT_EQ(same.count(0), 3u);
    EXPECT_EQ(same.count(1), 3u);
}

TEST(ShuffleSplit, StratifiedDeterministicAndComplete) {
    const LabeledDataset ds = build_dataset(iota_rows(4, 2, 0.0), iota_rows(4, 2, 50.0));
    const SplitDataset s = shuffle_split(ds, 9);
    EXPECT_EQ(s.train.count(0), 2u);
    EXPECT_EQ(s.train.count(1), 2u);
    EXPECT_EQ(s.test.count(0), 2u);
    EXPECT_EQ(s.n_te(), 4u);

    const SplitDataset again = shuffle_split(ds, 9);
    EXPECT_EQ(s.train.points, again.train.points);
    EXPECT_EQ(s.test.labels, again.test.labels);

    Matrix joined(8, 2);
    joined << s.train.points, s.test.points;
    EXPECT_EQ(sorted_rows(joined), sorted_rows(ds.points));
    // Every row keeps its label: P rows are < 50, Q rows >= 50.
    for (const auto* half : {&s.train, &s.test})
        for (std::size_t i = 0; i < half->size(); ++i)
            EXPECT_EQ(half->points(static_cast<Eigen::Index>(i), 0) >= 50.0, half->labels[i] == 1);
}

TEST(ShuffleSplit, OddCountThrows) {
    const LabeledDataset ds = build_dataset(iota_rows(3, 2, 0.0), iota_rows(3, 2, 50.0));
    EXPECT_THROW(shuffle_split(ds, 1), std::invalid_argument);
}

TEST(StripLabels, KeepsRowMultiset) {
    const LabeledDataset ds = build_dataset(iota_rows(3, 2, 0.0), iota_rows(3, 2, 10.0));
    const Matrix stripped = strip_labels(ds, 4);
    EXPECT_EQ(stripped.rows(), 6);
    EXPECT_EQ(sorted_rows(stripped), sorted_rows(ds.points));

    LabeledDataset single;
    single.points = iota_rows(1, 3, 7.0);
    single.labels = {0};
    EXPECT_EQ(strip_labels(single, 1), single.points);
}

TEST(DatasetJsonl, RoundTrip) {
    const LabeledDataset ds = build_dataset(sample_hdgm(make_spec(Difficulty::hard, 3, HdgmRole::p), 2, 1),
                                            sample_hdgm(make_spec(Difficulty::hard, 3, HdgmRole::q_alt), 2, 2));
    std::stringstream buffer;
    write_dataset_jsonl(buffer, ds, {{"seed", 3}});
    std::string first;
    std::getline(std::istringstream(buffer.str()), first);
    EXPECT_TRUE(nlohmann::json::parse(first).contains("header"));

    const DatasetFile back = read_dataset_jsonl(buffer);
    EXPECT_EQ(back.header.at("seed"), 3);
    EXPECT_EQ(back.data.labels, ds.labels);
    EXPECT_EQ(back.data.points, ds.points);
}

TEST(DatasetJsonl, MalformedRecordThrows) {
    std::istringstream in("{\"header\": {}}\n{\"x\": [1, 2], \"label\": 3}\n");
    EXPECT_ANY_THROW(read_dataset_jsonl(in));
}
