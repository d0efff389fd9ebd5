#pragma once

// Dense feed-forward networks: forward pass with a backprop cache, exact
// analytic gradients, Adam updates, and the two training losses
// (reconstruction MSE and binary cross-entropy on a two-logit head).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sslc2st/matrix.hpp"
#include "sslc2st/rng.hpp"

namespace sslc2st {

enum class Activation { relu, identity, sigmoid };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

/// Affine map followed by an elementwise activation: y = act(x W + b).
/// weight is (in x out) so batches multiply on the left.
struct DenseLayer {
    Matrix weight;
    RowVector bias;
    Activation activation = Activation::identity;

    std::size_t in_width() const noexcept { return static_cast<std::size_t>(weight.rows()); }
    std::size_t out_width() const noexcept { return static_cast<std::size_t>(weight.cols()); }

    bool operator==(const DenseLayer& other) const;
};

class Mlp {
public:
    Mlp() = default;

    /// Throws ShapeError if the list is empty or consecutive widths disagree.
    explicit Mlp(std::vector<DenseLayer> layers);

    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    /// widths has one more entry than activations.
    static Mlp glorot(std::span<const std::size_t> widths,
                      std::span<const Activation> activations, Rng& rng);

    std::size_t depth() const noexcept { return layers_.size(); }
    bool empty() const noexcept { return layers_.empty(); }
    std::size_t input_width() const;
    std::size_t output_width() const;
    std::size_t parameter_count() const noexcept;

    /// Layer widths, input first.
    std::vector<std::size_t> topology() const;

    const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
    DenseLayer& layer(std::size_t i) { return layers_.at(i); }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    bool operator==(const Mlp& other) const = default;

private:
    std::vector<DenseLayer> layers_;
};

/// Per-layer inputs and activated outputs retained for backprop.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;
    std::vector<std::size_t> topology;
};

struct ForwardResult {
    Matrix output;
    ForwardCache cache;
};

ForwardResult forward(const Mlp& model, const Matrix& batch);

/// Forward pass without retaining the cache.
Matrix evaluate(const Mlp& model, const Matrix& batch);

/// Output after the first `layer_count` layers.
Matrix evaluate_prefix(const Mlp& model, const Matrix& batch, std::size_t layer_count);

struct LayerGradient {
    Matrix weight;
    RowVector bias;
};

struct Gradients {
    std::vector<LayerGradient> layers;
    Matrix input; ///< dL/d(batch), used to chain through a composed model.

    double squared_norm() const;
};

/// Mean over rows of the squared L2 reconstruction error.
double mse_loss(const Matrix& reconstruction, const Matrix& target);
Matrix mse_gradient(const Matrix& reconstruction, const Matrix& target);

inline constexpr double probability_clamp = 1e-12;

/// Mean binary cross-entropy; probabilities are clamped into
/// [probability_clamp, 1 - probability_clamp] before the logs.
double bce_loss(std::span<const double> probabilities, std::span<const std::uint8_t> labels);

/// Class-1 softmax probability of each row of an (n x 2) logit matrix.
Vector softmax_class1(const Matrix& logits);

/// BCE of the class-1 softmax probability, computed from two-logit rows.
double bce_from_logits(const Matrix& logits, std::span<const std::uint8_t> labels);

/// d(bce_from_logits)/d(logits). Exact wherever the clamp is inactive.
Matrix bce_logit_gradient(const Matrix& logits, std::span<const std::uint8_t> labels);

enum class LossKind { mse, bce };

/// Backpropagates dL/d(output) through the layers recorded in `cache`.
/// Throws ShapeError if the cache was not produced by this topology.
Gradients backward(const Mlp& model, const ForwardCache& cache, const Matrix& output_grad);

/// Convenience overload: computes the loss gradient at the cached output.
/// For LossKind::bce, `targets` is an (n x 1) column of 0/1 labels.
Gradients backward(const Mlp& model, const ForwardCache& cache, LossKind kind,
                   const Matrix& targets);

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamState() = default;
    AdamState(const Mlp& model, AdamHyper hyper);

    std::vector<LayerGradient> first_moment;
    std::vector<LayerGradient> second_moment;
    std::uint64_t step = 0;
    AdamHyper hyper;
};

/// One bias-corrected Adam update, in place.
void adam_step(Mlp& model, const Gradients& grads, AdamState& state);

} // namespace sslc2st
