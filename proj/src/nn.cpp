#include "sslc2st/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sslc2st {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    if (name == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation: " + std::string(name));
}

bool DenseLayer::operator==(const DenseLayer& other) const {
    return activation == other.activation && weight.rows() == other.weight.rows() &&
           weight.cols() == other.weight.cols() && bias.size() == other.bias.size() &&
           weight == other.weight && bias == other.bias;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw ShapeError("Mlp needs at least one layer");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.weight.rows() == 0 || l.weight.cols() == 0 || l.bias.size() != l.weight.cols()) {
            throw ShapeError("layer " + std::to_string(i) + ": weight " + shape_string(l.weight) +
                             " inconsistent with bias of length " + std::to_string(l.bias.size()));
        }
        if (i > 0 && layers_[i - 1].out_width() != l.in_width()) {
            throw ShapeError("layer " + std::to_string(i) + " expects width " +
                             std::to_string(l.in_width()) + " but previous layer emits " +
                             std::to_string(layers_[i - 1].out_width()));
        }
    }
}

Mlp Mlp::glorot(std::span<const std::size_t> widths, std::span<const Activation> activations,
                Rng& rng) {
    if (widths.size() < 2 || activations.size() + 1 != widths.size()) {
        throw ShapeError("glorot: need widths.size() == activations.size() + 1 >= 2");
    }
    std::vector<DenseLayer> layers;
    layers.reserve(activations.size());
    for (std::size_t i = 0; i < activations.size(); ++i) {
        const auto fan_in = widths[i];
        const auto fan_out = widths[i + 1];
        if (fan_in == 0 || fan_out == 0) {
            throw ShapeError("glorot: zero layer width");
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer;
        layer.weight.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
            }
        }
        layer.bias = RowVector::Zero(static_cast<Eigen::Index>(fan_out));
        layer.activation = activations[i];
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

std::size_t Mlp::input_width() const {
    if (layers_.empty()) throw ShapeError("empty Mlp has no input width");
    return layers_.front().in_width();
}

std::size_t Mlp::output_width() const {
    if (layers_.empty()) throw ShapeError("empty Mlp has no output width");
    return layers_.back().out_width();
}

std::size_t Mlp::parameter_count() const noexcept {
    std::size_t total = 0;
    for (const auto& l : layers_) {
        total += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return total;
}

std::vector<std::size_t> Mlp::topology() const {
    std::vector<std::size_t> widths;
    if (layers_.empty()) return widths;
    widths.push_back(layers_.front().in_width());
    for (const auto& l : layers_) widths.push_back(l.out_width());
    return widths;
}

namespace {

void apply_activation(Matrix& z, Activation a) {
    switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::identity: break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); break;
    }
}

// Multiplies the upstream gradient by act'(z), expressed through the
// activated output y.
void apply_activation_derivative(Matrix& grad, const Matrix& y, Activation a) {
    switch (a) {
    case Activation::relu:
        grad = grad.cwiseProduct((y.array() > 0.0).cast<double>().matrix());
        break;
    case Activation::identity: break;
    case Activation::sigmoid:
        grad = grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
        break;
    }
}

Matrix affine(const DenseLayer& l, const Matrix& x) {
    Matrix z = x * l.weight;
    z.rowwise() += l.bias;
    apply_activation(z, l.activation);
    return z;
}

void check_input(const Mlp& model, const Matrix& batch) {
    if (model.empty()) throw ShapeError("forward on an empty Mlp");
    if (static_cast<std::size_t>(batch.cols()) != model.input_width()) {
        throw ShapeError("batch " + shape_string(batch) + " does not match input width " +
                         std::to_string(model.input_width()));
    }
}

} // namespace

ForwardResult forward(const Mlp& model, const Matrix& batch) {
    check_input(model, batch);
    ForwardResult result;
    result.cache.topology = model.topology();
    result.cache.inputs.reserve(model.depth());
    result.cache.outputs.reserve(model.depth());
    const Matrix* current = &batch;
    for (const auto& l : model.layers()) {
        result.cache.inputs.push_back(*current);
        result.cache.outputs.push_back(affine(l, *current));
        current = &result.cache.outputs.back();
    }
    result.output = result.cache.outputs.back();
    return result;
}

Matrix evaluate(const Mlp& model, const Matrix& batch) {
    return evaluate_prefix(model, batch, model.depth());
}

Matrix evaluate_prefix(const Mlp& model, const Matrix& batch, std::size_t layer_count) {
    check_input(model, batch);
    if (layer_count == 0 || layer_count > model.depth()) {
        throw ShapeError("evaluate_prefix: layer count " + std::to_string(layer_count) +
                         " outside 1.." + std::to_string(model.depth()));
    }
    Matrix current = affine(model.layer(0), batch);
    for (std::size_t i = 1; i < layer_count; ++i) {
        current = affine(model.layer(i), current);
    }
    return current;
}

double Gradients::squared_norm() const {
    double total = input.squaredNorm();
    for (const auto& g : layers) total += g.weight.squaredNorm() + g.bias.squaredNorm();
    return total;
}

double mse_loss(const Matrix& reconstruction, const Matrix& target) {
    if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols()) {
        throw ShapeError("mse_loss: " + shape_string(reconstruction) + " vs " + shape_string(target));
    }
    if (reconstruction.rows() == 0) throw ShapeError("mse_loss: empty batch");
    return (reconstruction - target).squaredNorm() / static_cast<double>(reconstruction.rows());
}

Matrix mse_gradient(const Matrix& reconstruction, const Matrix& target) {
    if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols()) {
        throw ShapeError("mse_gradient: " + shape_string(reconstruction) + " vs " + shape_string(target));
    }
    if (reconstruction.rows() == 0) throw ShapeError("mse_gradient: empty batch");
    return (2.0 / static_cast<double>(reconstruction.rows())) * (reconstruction - target);
}

double bce_loss(std::span<const double> probabilities, std::span<const std::uint8_t> labels) {
    if (probabilities.empty()) throw std::invalid_argument("bce_loss: empty input");
    if (probabilities.size() != labels.size()) {
        throw ShapeError("bce_loss: " + std::to_string(probabilities.size()) + " probabilities vs " +
                         std::to_string(labels.size()) + " labels");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = std::clamp(probabilities[i], probability_clamp, 1.0 - probability_clamp);
        total -= labels[i] != 0 ? std::log(p) : std::log(1.0 - p);
    }
    return total / static_cast<double>(probabilities.size());
}

Vector softmax_class1(const Matrix& logits) {
    if (logits.cols() != 2) throw ShapeError("softmax_class1: expected 2 logit columns, got " + shape_string(logits));
    Vector p(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        // p1 = e^z1 / (e^z0 + e^z1), written to avoid overflow at either end
        const double diff = logits(i, 1) - logits(i, 0);
        p(i) = diff >= 0.0 ? 1.0 / (1.0 + std::exp(-diff)) : std::exp(diff) / (1.0 + std::exp(diff));
    }
    return p;
}

double bce_from_logits(const Matrix& logits, std::span<const std::uint8_t> labels) {
    const Vector p = softmax_class1(logits);
    return bce_loss(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), labels);
}

Matrix bce_logit_gradient(const Matrix& logits, std::span<const std::uint8_t> labels) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
        throw ShapeError("bce_logit_gradient: label count mismatch");
    }
    if (labels.empty()) throw std::invalid_argument("bce_logit_gradient: empty input");
    const Vector p = softmax_class1(logits);
    const double scale = 1.0 / static_cast<double>(labels.size());
    Matrix grad(logits.rows(), 2);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double r = (p(i) - static_cast<double>(labels[static_cast<std::size_t>(i)])) * scale;
        grad(i, 0) = -r;
        grad(i, 1) = r;
    }
    return grad;
}

Gradients backward(const Mlp& model, const ForwardCache& cache, const Matrix& output_grad) {
    if (cache.topology != model.topology() || cache.inputs.size() != model.depth() ||
        cache.outputs.size() != model.depth()) {
        throw ShapeError("backward: cache does not belong to this model");
    }
    const Matrix& out = cache.outputs.back();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
        throw ShapeError("backward: output gradient " + shape_string(output_grad) +
                         " vs cached output " + shape_string(out));
    }
    Gradients grads;
    grads.layers.resize(model.depth());
    Matrix upstream = output_grad;
    for (std::size_t k = model.depth(); k-- > 0;) {
        const auto& l = model.layer(k);
        apply_activation_derivative(upstream, cache.outputs[k], l.activation);
        grads.layers[k].weight = cache.inputs[k].transpose() * upstream;
        grads.layers[k].bias = upstream.colwise().sum();
        upstream = upstream * l.weight.transpose();
    }
    grads.input = std::move(upstream);
    return grads;
}

Gradients backward(const Mlp& model, const ForwardCache& cache, LossKind kind, const Matrix& targets) {
    if (cache.outputs.empty()) throw ShapeError("backward: empty cache");
    const Matrix& out = cache.outputs.back();
    if (kind == LossKind::mse) {
        return backward(model, cache, mse_gradient(out, targets));
    }
    if (targets.cols() != 1 || targets.rows() != out.rows()) {
        throw ShapeError("backward(bce): targets must be an (n x 1) label column");
    }
    Labels labels(static_cast<std::size_t>(targets.rows()));
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
        labels[static_cast<std::size_t>(i)] = targets(i, 0) > 0.5 ? 1 : 0;
    }
    return backward(model, cache, bce_logit_gradient(out, labels));
}

AdamState::AdamState(const Mlp& model, AdamHyper h) : hyper(h) {
    first_moment.reserve(model.depth());
    for (const auto& l : model.layers()) {
        first_moment.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                RowVector::Zero(l.bias.size())});
    }
    second_moment = first_moment;
}

namespace {

template <typename Param, typename Grad, typename Moment>
void adam_update(Param& param, const Grad& grad, Moment& m, Moment& v, const AdamHyper& h,
                 double correction1, double correction2) {
    m = h.beta1 * m + (1.0 - h.beta1) * grad;
    v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    param.array() -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
}

} // namespace

void adam_step(Mlp& model, const Gradients& grads, AdamState& state) {
    if (grads.layers.size() != model.depth() || state.first_moment.size() != model.depth() ||
        state.second_moment.size() != model.depth()) {
        throw ShapeError("adam_step: gradient/state depth does not match model");
    }
    for (std::size_t k = 0; k < model.depth(); ++k) {
        const auto& l = model.layer(k);
        const auto& g = grads.layers[k];
        if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() ||
            g.bias.size() != l.bias.size() ||
            state.first_moment[k].weight.rows() != l.weight.rows() ||
            state.first_moment[k].weight.cols() != l.weight.cols()) {
            throw ShapeError("adam_step: shape mismatch at layer " + std::to_string(k));
        }
    }
    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.hyper.beta1, t);
    const double c2 = 1.0 - std::pow(state.hyper.beta2, t);
    for (std::size_t k = 0; k < model.depth(); ++k) {
        auto& l = model.layer(k);
        const auto& g = grads.layers[k];
        adam_update(l.weight, g.weight, state.first_moment[k].weight, state.second_moment[k].weight,
                    state.hyper, c1, c2);
        adam_update(l.bias, g.bias, state.first_moment[k].bias, state.second_moment[k].bias,
                    state.hyper, c1, c2);
    }
}

} // namespace sslc2st
