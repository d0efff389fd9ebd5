#include "sslc2st/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sslc2st/rng.hpp"

namespace sslc2st {

namespace {

// Substreams of TrainConfig::seed. The encoder init stream is shared by both
// provenances so C2ST and SSL-C2ST start from the same random encoder.
constexpr std::uint64_t stream_encoder_init = 1;
constexpr std::uint64_t stream_decoder_init = 2;
constexpr std::uint64_t stream_pretrain_batches = 3;
constexpr std::uint64_t stream_head_init = 4;
constexpr std::uint64_t stream_classifier_batches = 5;

constexpr int model_format_version = 1;

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

template <typename Fn>
void for_each_minibatch(std::vector<std::size_t>& order, std::size_t batch_size, Rng& rng, Fn&& fn) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const auto len = std::min(batch_size, order.size() - start);
        fn(std::span<const std::size_t>(order.data() + start, len));
    }
}

} // namespace

void TrainConfig::validate() const {
    if (latent == 0 || rep_width == 0) throw std::invalid_argument("TrainConfig: zero latent/rep width");
    for (auto w : encoder_hidden) {
        if (w == 0) throw std::invalid_argument("TrainConfig: zero hidden width");
    }
    if (pretrain_epochs == 0 || classifier_epochs == 0) {
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    }
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (!(encoder_lr > 0.0) || !(head_lr > 0.0)) {
        throw std::invalid_argument("TrainConfig: learning rates must be positive");
    }
    if (!(unlabeled_fraction >= 0.0 && unlabeled_fraction <= 1.0)) {
        throw std::invalid_argument("TrainConfig: unlabeled_fraction must lie in [0, 1]");
    }
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
    j = nlohmann::json{{"encoder_hidden", cfg.encoder_hidden},
                       {"latent", cfg.latent},
                       {"rep_width", cfg.rep_width},
                       {"encoder_lr", cfg.encoder_lr},
                       {"head_lr", cfg.head_lr},
                       {"pretrain_epochs", cfg.pretrain_epochs},
                       {"classifier_epochs", cfg.classifier_epochs},
                       {"batch_size", cfg.batch_size},
                       {"freeze_encoder", cfg.freeze_encoder},
                       {"standardize_inputs", cfg.standardize_inputs},
                       {"unlabeled_fraction", cfg.unlabeled_fraction},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
    // Missing keys keep their defaults so partial configs are accepted.
    cfg.encoder_hidden = j.value("encoder_hidden", cfg.encoder_hidden);
    cfg.latent = j.value("latent", cfg.latent);
    cfg.rep_width = j.value("rep_width", cfg.rep_width);
    cfg.encoder_lr = j.value("encoder_lr", cfg.encoder_lr);
    cfg.head_lr = j.value("head_lr", cfg.head_lr);
    cfg.pretrain_epochs = j.value("pretrain_epochs", cfg.pretrain_epochs);
    cfg.classifier_epochs = j.value("classifier_epochs", cfg.classifier_epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.freeze_encoder = j.value("freeze_encoder", cfg.freeze_encoder);
    cfg.standardize_inputs = j.value("standardize_inputs", cfg.standardize_inputs);
    cfg.unlabeled_fraction = j.value("unlabeled_fraction", cfg.unlabeled_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
}

Standardizer Standardizer::fit(const Matrix& rows) {
    if (rows.rows() == 0) throw std::invalid_argument("Standardizer::fit: no rows");
    Standardizer s;
    s.mean = rows.colwise().mean();
    const Matrix centered = rows.rowwise() - s.mean;
    s.scale = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows())).sqrt().matrix();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
        if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& batch) const {
    if (is_identity()) return batch;
    if (batch.cols() != mean.size()) {
        throw ShapeError("Standardizer: batch has " + std::to_string(batch.cols()) + " columns, expected " +
                         std::to_string(mean.size()));
    }
    return ((batch.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

bool Standardizer::operator==(const Standardizer& other) const {
    return mean.size() == other.mean.size() && scale.size() == other.scale.size() && mean == other.mean &&
           scale == other.scale;
}

Mlp make_encoder(std::size_t input_dim, const TrainConfig& cfg, Rng& rng) {
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    widths.push_back(cfg.latent);
    std::vector<Activation> acts(cfg.encoder_hidden.size(), Activation::relu);
    acts.push_back(Activation::identity);
    return Mlp::glorot(widths, acts, rng);
}

Mlp make_decoder(std::size_t output_dim, const TrainConfig& cfg, Rng& rng) {
    std::vector<std::size_t> widths{cfg.latent};
    widths.insert(widths.end(), cfg.encoder_hidden.rbegin(), cfg.encoder_hidden.rend());
    widths.push_back(output_dim);
    std::vector<Activation> acts(cfg.encoder_hidden.size(), Activation::relu);
    acts.push_back(Activation::identity);
    return Mlp::glorot(widths, acts, rng);
}

Mlp make_head(const TrainConfig& cfg, Rng& rng) {
    const std::size_t widths[] = {cfg.latent, cfg.rep_width, 2};
    const Activation acts[] = {Activation::relu, Activation::identity};
    return Mlp::glorot(widths, acts, rng);
}

PretrainResult train_autoencoder(const Matrix& unlabeled, const TrainConfig& cfg) {
    cfg.validate();
    if (unlabeled.rows() == 0) throw std::invalid_argument("train_autoencoder: no unlabeled rows");
    const auto dim = static_cast<std::size_t>(unlabeled.cols());

    Rng enc_rng(mix_seed(cfg.seed, stream_encoder_init));
    Rng dec_rng(mix_seed(cfg.seed, stream_decoder_init));
    Rng batch_rng(mix_seed(cfg.seed, stream_pretrain_batches));
    PretrainResult result{make_encoder(dim, cfg, enc_rng), make_decoder(dim, cfg, dec_rng), {}, 0.0, 0.0};

    const AdamHyper hyper{cfg.encoder_lr};
    AdamState enc_state(result.encoder, hyper);
    AdamState dec_state(result.decoder, hyper);

    auto full_loss = [&] {
        return mse_loss(evaluate(result.decoder, evaluate(result.encoder, unlabeled)), unlabeled);
    };
    result.initial_loss = full_loss();

    std::vector<std::size_t> order(static_cast<std::size_t>(unlabeled.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    result.loss_trace.reserve(cfg.pretrain_epochs);

    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for_each_minibatch(order, cfg.batch_size, batch_rng, [&](std::span<const std::size_t> rows) {
            const Matrix x = gather_rows(unlabeled, rows);
            auto enc = forward(result.encoder, x);
            auto dec = forward(result.decoder, enc.output);
            const double loss = mse_loss(dec.output, x);
            if (!std::isfinite(loss)) {
                throw TrainingError("train_autoencoder: non-finite reconstruction loss at epoch " +
                                    std::to_string(epoch + 1));
            }
            epoch_loss += loss * static_cast<double>(rows.size());
            seen += rows.size();
            const Gradients dec_grads = backward(result.decoder, dec.cache, mse_gradient(dec.output, x));
            const Gradients enc_grads = backward(result.encoder, enc.cache, dec_grads.input);
            adam_step(result.decoder, dec_grads, dec_state);
            adam_step(result.encoder, enc_grads, enc_state);
        });
        result.loss_trace.push_back(epoch_loss / static_cast<double>(seen));
    }
    result.final_loss = full_loss();
    if (!std::isfinite(result.final_loss)) {
        throw TrainingError("train_autoencoder: non-finite final reconstruction loss");
    }
    return result;
}

std::string_view to_string(Provenance p) noexcept {
    return p == Provenance::c2st ? "c2st" : "ssl-c2st";
}

Matrix Classifier::encode(const Matrix& batch) const { return evaluate(encoder, input.apply(batch)); }

Matrix Classifier::logits(const Matrix& batch) const { return evaluate(head, encode(batch)); }

TrainedTest train_classifier(const std::optional<Mlp>& pretrained_encoder, const LabeledDataset& train,
                             const TrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0) throw std::invalid_argument("train_classifier: empty training set");
    const auto n0 = train.count(0);
    if (n0 == 0 || n0 == train.size()) {
        throw std::invalid_argument("train_classifier: training set holds a single label");
    }

    TrainedTest result;
    if (pretrained_encoder) {
        if (pretrained_encoder->input_width() != train.dim()) {
            throw ShapeError("train_classifier: encoder input width " +
                             std::to_string(pretrained_encoder->input_width()) + " vs data dim " +
                             std::to_string(train.dim()));
        }
        if (pretrained_encoder->output_width() != cfg.latent) {
            throw ShapeError("train_classifier: encoder output width does not match cfg.latent");
        }
        result.model.encoder = *pretrained_encoder;
        result.provenance = Provenance::ssl_c2st;
    } else {
        Rng enc_rng(mix_seed(cfg.seed, stream_encoder_init));
        result.model.encoder = make_encoder(train.dim(), cfg, enc_rng);
        result.provenance = Provenance::c2st;
    }
    Rng head_rng(mix_seed(cfg.seed, stream_head_init));
    result.model.head = make_head(cfg, head_rng);
    if (cfg.standardize_inputs) result.model.input = Standardizer::fit(train.points);
    const Matrix points = result.model.input.apply(train.points);

    Rng batch_rng(mix_seed(cfg.seed, stream_classifier_batches));
    AdamState enc_state(result.model.encoder, AdamHyper{cfg.encoder_lr});
    AdamState head_state(result.model.head, AdamHyper{cfg.head_lr});

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Labels batch_labels;
    result.classifier_loss.reserve(cfg.classifier_epochs);

    for (std::size_t epoch = 0; epoch < cfg.classifier_epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for_each_minibatch(order, cfg.batch_size, batch_rng, [&](std::span<const std::size_t> rows) {
            const Matrix x = gather_rows(points, rows);
            batch_labels.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) batch_labels[i] = train.labels[rows[i]];

            auto enc = forward(result.model.encoder, x);
            auto head = forward(result.model.head, enc.output);
            const double loss = bce_from_logits(head.output, batch_labels);
            if (!std::isfinite(loss)) {
                throw TrainingError("train_classifier: non-finite cross-entropy at epoch " +
                                    std::to_string(epoch + 1));
            }
            epoch_loss += loss * static_cast<double>(rows.size());
            seen += rows.size();
            const Gradients head_grads =
                backward(result.model.head, head.cache, bce_logit_gradient(head.output, batch_labels));
            if (!cfg.freeze_encoder) {
                const Gradients enc_grads = backward(result.model.encoder, enc.cache, head_grads.input);
                adam_step(result.model.encoder, enc_grads, enc_state);
            }
            adam_step(result.model.head, head_grads, head_state);
        });
        result.classifier_loss.push_back(epoch_loss / static_cast<double>(seen));
    }
    return result;
}

Vector predict_proba(const TrainedTest& t, const Matrix& batch) {
    return softmax_class1(t.model.logits(batch));
}

Labels predict_labels(const TrainedTest& t, const Matrix& batch) {
    const Matrix z = t.model.logits(batch);
    Labels out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) out[static_cast<std::size_t>(i)] = z(i, 1) > z(i, 0) ? 1 : 0;
    return out;
}

std::string_view to_string(FeatureLayer f) noexcept {
    switch (f) {
    case FeatureLayer::p0_scalar: return "p0_scalar";
    case FeatureLayer::hidden_rep: return "hidden_rep";
    case FeatureLayer::logits: return "logits";
    }
    return "p0_scalar";
}

FeatureLayer feature_layer_from_string(std::string_view name) {
    if (name == "p0_scalar" || name == "p0") return FeatureLayer::p0_scalar;
    if (name == "hidden_rep" || name == "hidden") return FeatureLayer::hidden_rep;
    if (name == "logits") return FeatureLayer::logits;
    throw std::invalid_argument("unknown feature layer: " + std::string(name));
}

Matrix extract_features(const TrainedTest& t, const Matrix& batch, FeatureLayer layer) {
    switch (layer) {
    case FeatureLayer::p0_scalar: {
        const Vector p1 = predict_proba(t, batch);
        Matrix out(p1.size(), 1);
        out.col(0) = (1.0 - p1.array()).matrix();
        return out;
    }
    case FeatureLayer::hidden_rep: {
        if (t.model.head.depth() < 2) throw ShapeError("extract_features: head has no hidden layer");
        return evaluate_prefix(t.model.head, t.model.encode(batch), t.model.head.depth() - 1);
    }
    case FeatureLayer::logits: return t.model.logits(batch);
    }
    throw std::invalid_argument("extract_features: unknown layer");
}

nlohmann::json mlp_to_json(const Mlp& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : model.layers()) {
        std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
        std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back({{"in", l.in_width()},
                          {"out", l.out_width()},
                          {"activation", std::string(to_string(l.activation))},
                          {"weight", w},
                          {"bias", b}});
    }
    return {{"format", "sslc2st-mlp"}, {"version", model_format_version}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
    if (j.at("format").get<std::string>() != "sslc2st-mlp") {
        throw std::invalid_argument("mlp_from_json: unexpected format tag");
    }
    if (j.at("version").get<int>() != model_format_version) {
        throw std::invalid_argument("mlp_from_json: unsupported version");
    }
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
        const auto in = lj.at("in").get<Eigen::Index>();
        const auto out = lj.at("out").get<Eigen::Index>();
        const auto w = lj.at("weight").get<std::vector<double>>();
        const auto b = lj.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
            throw ShapeError("mlp_from_json: parameter count does not match declared widths");
        }
        DenseLayer l;
        l.weight = Eigen::Map<const Matrix>(w.data(), in, out);
        l.bias = Eigen::Map<const RowVector>(b.data(), out);
        l.activation = activation_from_string(lj.at("activation").get<std::string>());
        layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers));
}

nlohmann::json trained_test_to_json(const TrainedTest& t) {
    return {{"provenance", std::string(to_string(t.provenance))},
            {"input_mean", std::vector<double>(t.model.input.mean.data(),
                                               t.model.input.mean.data() + t.model.input.mean.size())},
            {"input_scale", std::vector<double>(t.model.input.scale.data(),
                                                t.model.input.scale.data() + t.model.input.scale.size())},
            {"encoder", mlp_to_json(t.model.encoder)},
            {"head", mlp_to_json(t.model.head)},
            {"pretrain_loss", t.pretrain_loss},
            {"classifier_loss", t.classifier_loss}};
}

TrainedTest trained_test_from_json(const nlohmann::json& j) {
    TrainedTest t;
    const auto prov = j.at("provenance").get<std::string>();
    if (prov == "c2st") {
        t.provenance = Provenance::c2st;
    } else if (prov == "ssl-c2st") {
        t.provenance = Provenance::ssl_c2st;
    } else {
        throw std::invalid_argument("trained_test_from_json: unknown provenance " + prov);
    }
    const auto mean = j.value("input_mean", std::vector<double>{});
    const auto scale = j.value("input_scale", std::vector<double>{});
    if (mean.size() != scale.size()) throw ShapeError("trained_test_from_json: input_mean/input_scale sizes differ");
    t.model.input.mean = Eigen::Map<const RowVector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    t.model.input.scale = Eigen::Map<const RowVector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    t.model.encoder = mlp_from_json(j.at("encoder"));
    t.model.head = mlp_from_json(j.at("head"));
    t.pretrain_loss = j.value("pretrain_loss", std::vector<double>{});
    t.classifier_loss = j.value("classifier_loss", std::vector<double>{});
    return t;
}

} // namespace sslc2st
