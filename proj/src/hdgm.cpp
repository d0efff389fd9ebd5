#include "sslc2st/hdgm.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <vector>

#include "sslc2st/rng.hpp"

namespace sslc2st {

std::string_view to_string(HdgmRole r) noexcept {
    switch (r) {
    case HdgmRole::p: return "P";
    case HdgmRole::q_null: return "Q-null";
    case HdgmRole::q_alt: return "Q-alt";
    }
    return "P";
}

std::string_view to_string(Difficulty d) noexcept {
    switch (d) {
    case Difficulty::easy: return "hdgm-easy";
    case Difficulty::medium: return "hdgm-medium";
    case Difficulty::hard: return "hdgm-hard";
    }
    return "hdgm-hard";
}

HdgmRole role_from_string(std::string_view name) {
    if (name == "P" || name == "p") return HdgmRole::p;
    if (name == "Q-null" || name == "q_null") return HdgmRole::q_null;
    if (name == "Q-alt" || name == "q_alt") return HdgmRole::q_alt;
    throw std::invalid_argument("unknown HDGM role: " + std::string(name));
}

Difficulty difficulty_from_string(std::string_view name) {
    if (name == "hdgm-easy" || name == "easy") return Difficulty::easy;
    if (name == "hdgm-medium" || name == "medium") return Difficulty::medium;
    if (name == "hdgm-hard" || name == "hard") return Difficulty::hard;
    throw std::invalid_argument("unknown HDGM difficulty: " + std::string(name));
}

void HdgmSpec::validate() const {
    if (dim < 2) throw std::invalid_argument("HdgmSpec: dim must be >= 2");
    if (!std::isfinite(delta_mu) || !std::isfinite(delta_q)) {
        throw std::invalid_argument("HdgmSpec: non-finite mean gap");
    }
}

Vector HdgmSpec::cluster_mean(std::size_t cluster) const {
    if (cluster >= cluster_count) throw std::out_of_range("HdgmSpec: cluster index");
    Vector mu = Vector::Constant(static_cast<Eigen::Index>(dim), delta_mu * static_cast<double>(cluster));
    if (role == HdgmRole::q_alt) mu.array() += delta_q;
    return mu;
}

Matrix HdgmSpec::cluster_covariance(std::size_t cluster) const {
    if (cluster >= cluster_count) throw std::out_of_range("HdgmSpec: cluster index");
    Matrix sigma = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    if (role == HdgmRole::q_alt) {
        sigma(0, 1) = cluster_correlation[cluster];
        sigma(1, 0) = cluster_correlation[cluster];
    }
    return sigma;
}

DifficultyGaps difficulty_gaps(Difficulty d) noexcept {
    switch (d) {
    case Difficulty::easy: return {10.0, 5.0};
    case Difficulty::medium: return {10.0, 0.0};
    case Difficulty::hard: return {0.5, 0.0};
    }
    return {0.5, 0.0};
}

HdgmSpec make_spec(Difficulty d, std::size_t dim, HdgmRole role) {
    const auto gaps = difficulty_gaps(d);
    HdgmSpec spec{dim, gaps.delta_mu, gaps.delta_q, role};
    spec.validate();
    return spec;
}

void to_json(nlohmann::json& j, const HdgmSpec& spec) {
    j = nlohmann::json{{"d", spec.dim},
                       {"delta_mu", spec.delta_mu},
                       {"delta_q", spec.delta_q},
                       {"role", std::string(to_string(spec.role))}};
}

void from_json(const nlohmann::json& j, HdgmSpec& spec) {
    spec.dim = j.at("d").get<std::size_t>();
    spec.delta_mu = j.at("delta_mu").get<double>();
    spec.delta_q = j.at("delta_q").get<double>();
    spec.role = role_from_string(j.at("role").get<std::string>());
    spec.validate();
}

Matrix sample_hdgm(const HdgmSpec& spec, std::size_t n_per_cluster, std::uint64_t seed) {
    spec.validate();
    if (n_per_cluster == 0) throw std::invalid_argument("sample_hdgm: n_per_cluster must be >= 1");
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const auto n = static_cast<Eigen::Index>(n_per_cluster);
    Matrix out(n * static_cast<Eigen::Index>(HdgmSpec::cluster_count), d);
    Rng rng(seed);
    Vector z(d);
    for (std::size_t c = 0; c < HdgmSpec::cluster_count; ++c) {
        const Vector mu = spec.cluster_mean(c);
        const Eigen::LLT<Matrix> llt(spec.cluster_covariance(c));
        if (llt.info() != Eigen::Success) {
            throw std::domain_error("sample_hdgm: covariance of cluster " + std::to_string(c + 1) +
                                    " is not positive definite");
        }
        const Matrix lower = llt.matrixL();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < d; ++k) z(k) = rng.normal();
            out.row(static_cast<Eigen::Index>(c) * n + i) = (mu + lower * z).transpose();
        }
    }
    return out;
}

std::size_t LabeledDataset::count(std::uint8_t label) const noexcept {
    std::size_t n = 0;
    for (auto l : labels) n += (l == label) ? 1 : 0;
    return n;
}

Matrix LabeledDataset::rows_with_label(std::uint8_t label) const {
    Matrix out(static_cast<Eigen::Index>(count(label)), points.cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) out.row(r++) = points.row(static_cast<Eigen::Index>(i));
    }
    return out;
}

LabeledDataset build_dataset(const Matrix& sp, const Matrix& sq) {
    if (sp.rows() == 0 || sq.rows() == 0) throw std::invalid_argument("build_dataset: empty sample");
    if (sp.rows() != sq.rows()) {
        throw std::invalid_argument("build_dataset: samples must have equal sizes (m = n), got " +
                                    std::to_string(sp.rows()) + " and " + std::to_string(sq.rows()));
    }
    if (sp.cols() != sq.cols()) throw ShapeError("build_dataset: dimension mismatch");
    LabeledDataset ds;
    ds.points.resize(sp.rows() + sq.rows(), sp.cols());
    ds.points.topRows(sp.rows()) = sp;
    ds.points.bottomRows(sq.rows()) = sq;
    ds.labels.assign(static_cast<std::size_t>(sp.rows()), 0);
    ds.labels.resize(static_cast<std::size_t>(sp.rows() + sq.rows()), 1);
    return ds;
}

LabeledDataset select_rows(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    LabeledDataset out;
    out.points.resize(static_cast<Eigen::Index>(rows.size()), ds.points.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.points.row(static_cast<Eigen::Index>(i)) = ds.points.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(ds.labels.at(rows[i]));
    }
    return out;
}

SplitDataset shuffle_split(const LabeledDataset& ds, std::uint64_t seed) {
    if (ds.size() == 0) throw std::invalid_argument("shuffle_split: empty dataset");
    std::vector<std::size_t> by_label[2];
    for (std::size_t i = 0; i < ds.labels.size(); ++i) by_label[ds.labels[i] != 0 ? 1 : 0].push_back(i);
    if (by_label[0].size() % 2 != 0 || by_label[1].size() % 2 != 0) {
        throw std::invalid_argument("shuffle_split: per-label counts must be even, got " +
                                    std::to_string(by_label[0].size()) + " and " +
                                    std::to_string(by_label[1].size()));
    }
    Rng rng(seed);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (auto& idx : by_label) {
        rng.shuffle(std::span<std::size_t>(idx));
        const auto half = idx.size() / 2;
        train_rows.insert(train_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
        test_rows.insert(test_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    }
    rng.shuffle(std::span<std::size_t>(train_rows));
    rng.shuffle(std::span<std::size_t>(test_rows));
    return {select_rows(ds, train_rows), select_rows(ds, test_rows)};
}

Matrix strip_labels(const LabeledDataset& ds, std::uint64_t seed) {
    Rng rng(seed);
    const auto order = rng.permutation(ds.size());
    Matrix out(static_cast<Eigen::Index>(ds.size()), ds.points.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = ds.points.row(static_cast<Eigen::Index>(order[i]));
    }
    return out;
}

void write_dataset_jsonl(std::ostream& out, const LabeledDataset& ds, const nlohmann::json& header) {
    out << nlohmann::json{{"header", header}}.dump() << '\n';
    std::vector<double> row(ds.dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            row[k] = ds.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
        out << nlohmann::json{{"x", row}, {"label", static_cast<int>(ds.labels[i])}}.dump() << '\n';
    }
}

DatasetFile read_dataset_jsonl(std::istream& in) {
    DatasetFile file;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto record = nlohmann::json::parse(line);
        if (record.contains("header")) {
            file.header = record.at("header");
            continue;
        }
        auto x = record.at("x").get<std::vector<double>>();
        const int label = record.at("label").get<int>();
        if (label != 0 && label != 1) {
            throw std::invalid_argument("dataset line " + std::to_string(line_no) + ": label must be 0 or 1");
        }
        if (!rows.empty() && x.size() != rows.front().size()) {
            throw ShapeError("dataset line " + std::to_string(line_no) + ": inconsistent dimension");
        }
        rows.push_back(std::move(x));
        file.data.labels.push_back(static_cast<std::uint8_t>(label));
    }
    const auto d = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
    file.data.points.resize(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index k = 0; k < d; ++k) {
            file.data.points(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
        }
    }
    return file;
}

} // namespace sslc2st
