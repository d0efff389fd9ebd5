#pragma once

// Training phases of the classifier two-sample test:
//   phase 1 - autoencoder pretraining of the encoder on unlabeled rows (MSE);
//   phase 2 - supervised training of encoder + head on the labeled half (BCE).
// Plain C2ST skips phase 1 and starts phase 2 from a random encoder.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sslc2st/hdgm.hpp"
#include "sslc2st/matrix.hpp"
#include "sslc2st/nn.hpp"

namespace sslc2st {

struct TrainConfig {
    /// Encoder: d -> encoder_hidden... -> latent (relu hidden layers, identity latent).
    /// Decoder mirrors it back to d. Head: latent -> rep_width (relu) -> 2 logits.
    std::vector<std::size_t> encoder_hidden{50, 50};
    std::size_t latent = 20;
    std::size_t rep_width = 50;
    double encoder_lr = 1e-3;
    double head_lr = 1e-3;
    std::size_t pretrain_epochs = 100;
    std::size_t classifier_epochs = 100;
    std::size_t batch_size = 128;
    bool freeze_encoder = false;
    /// z-score every input column with statistics of the labeled half's
    /// points (labels unused) before any network sees the data.
    bool standardize_inputs = true;
    /// Fraction of the test half's rows added to the labeled half's rows to
    /// form the unlabeled pretraining set. 1.0 uses every row.
    double unlabeled_fraction = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Per-column affine map x -> (x - mean) / scale. Empty vectors mean identity.
struct Standardizer {
    RowVector mean;
    RowVector scale;

    /// Column means and population standard deviations; columns with
    /// (near) zero spread keep scale 1.
    static Standardizer fit(const Matrix& rows);

    bool is_identity() const noexcept { return mean.size() == 0; }
    Matrix apply(const Matrix& batch) const;

    bool operator==(const Standardizer& other) const;
};

Mlp make_encoder(std::size_t input_dim, const TrainConfig& cfg, Rng& rng);
Mlp make_decoder(std::size_t output_dim, const TrainConfig& cfg, Rng& rng);
Mlp make_head(const TrainConfig& cfg, Rng& rng);

struct PretrainResult {
    Mlp encoder;
    Mlp decoder;
    std::vector<double> loss_trace; ///< mean minibatch MSE per epoch
    double initial_loss = 0.0;      ///< full-data MSE before the first update
    double final_loss = 0.0;        ///< full-data MSE after the last update
};

/// Minibatch Adam on the reconstruction MSE for cfg.pretrain_epochs epochs.
/// Rows are used as given: when the classifier standardizes its inputs, pass
/// rows already mapped through the same Standardizer.
/// Throws TrainingError if the loss becomes non-finite.
PretrainResult train_autoencoder(const Matrix& unlabeled, const TrainConfig& cfg);

enum class Provenance { c2st, ssl_c2st };
std::string_view to_string(Provenance p) noexcept;

/// f' = g o phi: input standardization, encoder, classification head.
struct Classifier {
    Standardizer input;
    Mlp encoder;
    Mlp head;

    /// Encoder output for raw rows.
    Matrix encode(const Matrix& batch) const;
    Matrix logits(const Matrix& batch) const;
    bool operator==(const Classifier&) const = default;
};

struct TrainedTest {
    Classifier model;
    Provenance provenance = Provenance::c2st;
    std::vector<double> pretrain_loss;
    std::vector<double> classifier_loss;
};

/// Phase 2. With no pretrained encoder the encoder is freshly initialized
/// (plain C2ST); otherwise it starts from the given weights (SSL-C2ST).
/// cfg.freeze_encoder restricts updates to the head. With
/// cfg.standardize_inputs the Standardizer is fitted on train.points.
TrainedTest train_classifier(const std::optional<Mlp>& pretrained_encoder,
                             const LabeledDataset& train, const TrainConfig& cfg);

/// Class-1 softmax probability per row.
Vector predict_proba(const TrainedTest& t, const Matrix& batch);

/// argmax of the two logits per row (ties go to class 0).
Labels predict_labels(const TrainedTest& t, const Matrix& batch);

enum class FeatureLayer { p0_scalar, hidden_rep, logits };
std::string_view to_string(FeatureLayer f) noexcept;
FeatureLayer feature_layer_from_string(std::string_view name);

/// p0_scalar: (n x 1) class-0 probability; hidden_rep: (n x rep_width)
/// head representation; logits: (n x 2).
Matrix extract_features(const TrainedTest& t, const Matrix& batch, FeatureLayer layer);

/// Versioned JSON parameter dump of an Mlp.
nlohmann::json mlp_to_json(const Mlp& model);
Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json trained_test_to_json(const TrainedTest& t);
TrainedTest trained_test_from_json(const nlohmann::json& j);

} // namespace sslc2st
