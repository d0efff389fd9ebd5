#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sslc2st/nn.hpp"
#include "sslc2st/rng.hpp"

using namespace sslc2st;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
    Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : values) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

DenseLayer make_layer(Matrix w, std::initializer_list<double> b, Activation act) {
    RowVector bias(static_cast<Eigen::Index>(b.size()));
    Eigen::Index i = 0;
    for (double v : b) bias(i++) = v;
    return {std::move(w), std::move(bias), act};
}

Mlp random_net(std::uint64_t seed, std::vector<std::size_t> widths, std::vector<Activation> acts) {
    Rng rng(seed);
    Mlp m = Mlp::glorot(widths, acts, rng);
    for (std::size_t k = 0; k < m.depth(); ++k)
        for (Eigen::Index i = 0; i < m.layer(k).bias.size(); ++i) m.layer(k).bias(i) = 0.1 * rng.normal();
    return m;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

} // namespace

TEST(Forward, IdentityLayerReturnsInput) {
    Mlp m({make_layer(Matrix::Identity(3, 3), {0, 0, 0}, Activation::identity)});
    const Matrix x = rows({{1.5, -2.0, 3.0}, {0.0, 4.0, -1.0}});
    EXPECT_EQ(evaluate(m, x), x);
}

TEST(Forward, ReluClampsNegativeInput) {
    Mlp m({make_layer(Matrix::Identity(4, 4), {0, 0, 0, 0}, Activation::relu)});
    const Matrix out = evaluate(m, rows({{-1.0, -0.5, -3.0, -1e-9}}));
    EXPECT_EQ(out, Matrix::Zero(1, 4));
}

TEST(Forward, HandEvaluatedTwoLayerNet) {
    // Hidden pre-activation (1,1)W1 + b1 = (0.5, 2.0); relu keeps both;
    // output 0.5*1 + 2.0*2 + 0.25 = 4.75.
    Mlp m({make_layer(rows({{1, 2}, {-1, 1}}), {0.5, -1.0}, Activation::relu),
           make_layer(rows({{1}, {2}}), {0.25}, Activation::identity)});
    const Matrix out = evaluate(m, rows({{1, 1}}));
    ASSERT_EQ(out.rows(), 1);
    ASSERT_EQ(out.cols(), 1);
    EXPECT_DOUBLE_EQ(out(0, 0), 4.75);
}

TEST(Forward, ShapeMismatchThrows) {
    Mlp m({make_layer(Matrix::Identity(3, 3), {0, 0, 0}, Activation::identity)});
    EXPECT_THROW(evaluate(m, Matrix::Zero(2, 4)), ShapeError);
}

TEST(Forward, IsBitwiseDeterministic) {
    const Mlp m = random_net(3, {5, 8, 8, 2}, {Activation::relu, Activation::sigmoid, Activation::identity});
    Rng rng(4);
    const Matrix x = random_matrix(rng, 17, 5);
    EXPECT_EQ(evaluate(m, x), evaluate(m, x));
    EXPECT_EQ(forward(m, x).output, evaluate(m, x));
}

TEST(Mlp, ConstructorRejectsMismatchedWidths) {
    EXPECT_THROW(Mlp({make_layer(Matrix::Zero(2, 3), {0, 0, 0}, Activation::relu),
                      make_layer(Matrix::Zero(2, 1), {0}, Activation::identity)}),
                 ShapeError);
    EXPECT_THROW(Mlp(std::vector<DenseLayer>{}), ShapeError);
}

TEST(Mlp, GlorotBoundsAndZeroBias) {
    Rng rng(11);
    const std::vector<std::size_t> widths{6, 4};
    const std::vector<Activation> acts{Activation::relu};
    const Mlp m = Mlp::glorot(widths, acts, rng);
    const double limit = std::sqrt(6.0 / 10.0);
    EXPECT_LE(m.layer(0).weight.cwiseAbs().maxCoeff(), limit);
    EXPECT_EQ(m.layer(0).bias, RowVector::Zero(4));
    EXPECT_EQ(m.parameter_count(), 6u * 4u + 4u);
    EXPECT_EQ(m.topology(), widths);
}

TEST(MseLoss, SpecCases) {
    const Matrix a = rows({{1, 2}, {3, 4}});
    EXPECT_EQ(mse_loss(a, a), 0.0);
    EXPECT_DOUBLE_EQ(mse_loss(rows({{0}}), rows({{2}})), 4.0);
    EXPECT_DOUBLE_EQ(mse_loss(rows({{1, 0}, {0, 2}}), Matrix::Zero(2, 2)), 2.5);
}

TEST(MseLoss, ShapeMismatchThrows) { EXPECT_THROW(mse_loss(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), ShapeError); }

TEST(BceLoss, SpecCases) {
    const std::vector<double> half{0.5, 0.5};
    const std::vector<std::uint8_t> labels01{0, 1};
    EXPECT_NEAR(bce_loss(half, labels01), std::log(2.0), 1e-15);

    const std::vector<double> exact{0.0, 1.0};
    EXPECT_LT(bce_loss(exact, labels01), 1e-11);

    const std::vector<double> p09{0.9};
    const std::vector<std::uint8_t> label0{0};
    EXPECT_NEAR(bce_loss(p09, label0), -std::log(0.1), 1e-12);
}

TEST(BceLoss, NonNegativeAndSwapInvariant) {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> p(7);
        std::vector<double> flipped_p(7);
        std::vector<std::uint8_t> y(7);
        std::vector<std::uint8_t> flipped_y(7);
        for (std::size_t i = 0; i < 7; ++i) {
            p[i] = rng.uniform();
            y[i] = static_cast<std::uint8_t>(rng.uniform_index(2));
            flipped_p[i] = 1.0 - p[i];
            flipped_y[i] = static_cast<std::uint8_t>(1 - y[i]);
        }
        const double a = bce_loss(p, y);
        EXPECT_GE(a, 0.0);
        EXPECT_NEAR(a, bce_loss(flipped_p, flipped_y), 1e-12);
        EXPECT_GE(mse_loss(random_matrix(rng, 3, 2), random_matrix(rng, 3, 2)), 0.0);
    }
}

TEST(Softmax, SymmetricAndSaturatedLogits) {
    const Vector p = softmax_class1(rows({{0, 0}, {-100, 100}, {100, -100}}));
    EXPECT_DOUBLE_EQ(p(0), 0.5);
    EXPECT_NEAR(p(1), 1.0, 1e-15);
    EXPECT_NEAR(p(2), 0.0, 1e-15);
}

TEST(Backward, ZeroLossPointHasZeroGradient) {
    const Mlp m = random_net(21, {3, 5, 3}, {Activation::relu, Activation::identity});
    Rng rng(22);
    const Matrix x = random_matrix(rng, 6, 3);
    const auto fr = forward(m, x);
    const Gradients g = backward(m, fr.cache, LossKind::mse, fr.output);
    EXPECT_LT(std::sqrt(g.squared_norm()), 1e-8);
}

TEST(Backward, SingleLinearNeuronByHand) {
    // L = (w x + b - y)^2 with one sample: dL/dw = 2 (w x + b - y) x, dL/db = 2 (w x + b - y).
    const double w = 0.7, b = -0.2, x = 1.5, y = 2.0;
    Mlp m({make_layer(rows({{w}}), {b}, Activation::identity)});
    const auto fr = forward(m, rows({{x}}));
    const Gradients g = backward(m, fr.cache, LossKind::mse, rows({{y}}));
    const double r = w * x + b - y;
    EXPECT_NEAR(g.layers[0].weight(0, 0), 2.0 * r * x, 1e-14);
    EXPECT_NEAR(g.layers[0].bias(0), 2.0 * r, 1e-14);
}

TEST(Backward, MatchesFiniteDifferencesMse) {
    const Activation kinds[] = {Activation::relu, Activation::identity, Activation::sigmoid};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng shape(100 + seed);
        const auto depth = 1 + shape.uniform_index(3);
        std::vector<std::size_t> widths{1 + shape.uniform_index(8)};
        std::vector<Activation> acts;
        for (std::size_t k = 0; k < depth; ++k) {
            widths.push_back(1 + shape.uniform_index(8));
            acts.push_back(kinds[shape.uniform_index(3)]);
        }
        const Mlp m = random_net(seed, widths, acts);
        const Matrix x = random_matrix(shape, 5, static_cast<Eigen::Index>(widths.front()));
        const Matrix t = random_matrix(shape, 5, static_cast<Eigen::Index>(widths.back()));
        const auto fr = forward(m, x);
        const Gradients g = backward(m, fr.cache, LossKind::mse, t);
        const auto numeric = oracle::finite_difference_gradients(
            m, [&](const Mlp& probe) { return mse_loss(evaluate(probe, x), t); });
        EXPECT_LT(oracle::max_relative_error(g.layers, numeric), 1e-5) << "seed " << seed;
    }
}

TEST(Backward, MatchesFiniteDifferencesBce) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Mlp m = random_net(50 + seed, {4, 6, 2}, {Activation::sigmoid, Activation::identity});
        Rng rng(60 + seed);
        const Matrix x = random_matrix(rng, 8, 4);
        Labels labels(8);
        Matrix target(8, 1);
        for (std::size_t i = 0; i < 8; ++i) {
            labels[i] = static_cast<std::uint8_t>(i % 2);
            target(static_cast<Eigen::Index>(i), 0) = labels[i];
        }
        const auto fr = forward(m, x);
        const Gradients g = backward(m, fr.cache, LossKind::bce, target);
        const auto numeric = oracle::finite_difference_gradients(
            m, [&](const Mlp& probe) { return bce_from_logits(evaluate(probe, x), labels); });
        EXPECT_LT(oracle::max_relative_error(g.layers, numeric), 1e-5) << "seed " << seed;
    }
}

TEST(Backward, InputGradientChainsThroughComposition) {
    const Mlp first = random_net(70, {3, 4}, {Activation::sigmoid});
    const Mlp second = random_net(71, {4, 2}, {Activation::identity});
    Rng rng(72);
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix t = random_matrix(rng, 4, 2);
    const auto f1 = forward(first, x);
    const auto f2 = forward(second, f1.output);
    const Gradients g2 = backward(second, f2.cache, LossKind::mse, t);
    const Gradients g1 = backward(first, f1.cache, g2.input);
    const auto numeric = oracle::finite_difference_gradients(
        first, [&](const Mlp& probe) { return mse_loss(evaluate(second, evaluate(probe, x)), t); });
    EXPECT_LT(oracle::max_relative_error(g1.layers, numeric), 1e-5);
}

TEST(Backward, StaleCacheThrows) {
    const Mlp a = random_net(1, {3, 4, 2}, {Activation::relu, Activation::identity});
    const Mlp b = random_net(1, {3, 5, 2}, {Activation::relu, Activation::identity});
    const auto fr = forward(a, Matrix::Zero(2, 3));
    EXPECT_THROW(backward(b, fr.cache, LossKind::mse, Matrix::Zero(2, 2)), ShapeError);
}

TEST(Adam, ZeroGradientIsIdentity) {
    Mlp m = random_net(9, {3, 4, 2}, {Activation::relu, Activation::identity});
    const Mlp before = m;
    AdamState state(m, {});
    Gradients zero;
    for (const auto& layer : m.layers())
        zero.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                               RowVector::Zero(layer.bias.size())});
    for (int i = 0; i < 3; ++i) adam_step(m, zero, state);
    EXPECT_EQ(m, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // Bias-corrected m/sqrt(v) = g/|g| on the first step, so the move is
    // eta * |g| / (|g| + eps) in the direction of -g.
    for (double g : {3.0, -0.02}) {
        Mlp m({make_layer(rows({{1.0}}), {0.0}, Activation::identity)});
        AdamState state(m, {});
        Gradients grads;
        grads.layers.push_back({rows({{g}}), RowVector::Zero(1)});
        adam_step(m, grads, state);
        const double expected = 1.0 - 1e-3 * std::abs(g) / (std::abs(g) + 1e-8) * (g > 0 ? 1.0 : -1.0);
        EXPECT_NEAR(m.layer(0).weight(0, 0), expected, 1e-15);
        EXPECT_EQ(m.layer(0).bias(0), 0.0);
    }
}

TEST(Adam, DescendsConvexQuadratic) {
    // Fit a linear map to noiseless targets; the MSE is convex in the parameters.
    Rng rng(31);
    const Matrix x = random_matrix(rng, 32, 3);
    const Matrix w_true = random_matrix(rng, 3, 2);
    const Matrix t = x * w_true;
    Mlp m = random_net(32, {3, 2}, {Activation::identity});
    AdamState state(m, {0.05, 0.9, 0.999, 1e-8});
    const double initial = mse_loss(evaluate(m, x), t);
    double loss = initial;
    for (int i = 0; i < 500; ++i) {
        const auto fr = forward(m, x);
        adam_step(m, backward(m, fr.cache, LossKind::mse, t), state);
        loss = mse_loss(evaluate(m, x), t);
    }
    EXPECT_LT(loss, initial);
    EXPECT_LT(loss, 1e-3 * initial);
}
