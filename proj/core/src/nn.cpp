#include "dfcn/nn.hpp"

#include <cmath>

#include "dfcn/error.hpp"
#include "dfcn/rng.hpp"

namespace dfcn::nn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Linear: return "linear";
    }
    return "linear";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "linear") return Activation::Linear;
    throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(ReconMode mode) { return mode == ReconMode::Intersection ? "intersection" : "union"; }

ReconMode recon_mode_from_string(const std::string& name) {
    if (name == "intersection") return ReconMode::Intersection;
    if (name == "union") return ReconMode::Union;
    throw ConfigError("unknown reconstruction mode '" + name + "' (expected intersection|union)");
}

nlohmann::json Architecture::to_json() const {
    return {{"input_dim", input_dim},
            {"encoder", encoder},
            {"classifier_hidden", classifier_hidden},
            {"decoder_hidden", decoder_hidden},
            {"hidden_activation", to_string(hidden)}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
    Architecture a;
    a.input_dim = j.value("input_dim", a.input_dim);
    a.encoder = j.value("encoder", a.encoder);
    a.classifier_hidden = j.value("classifier_hidden", a.classifier_hidden);
    a.decoder_hidden = j.value("decoder_hidden", a.decoder_hidden);
    a.hidden = activation_from_string(j.value("hidden_activation", std::string("relu")));
    return a;
}

Architecture wide_architecture(std::size_t input_dim) {
    return Architecture{input_dim, {64, 64}, {32}, {32}, Activation::Relu};
}

Architecture bottleneck_architecture(std::size_t input_dim) {
    return Architecture{input_dim, {64, 8}, {32}, {64}, Activation::Relu};
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto* head : {&encoder, &classifier, &decoder})
        for (const auto& l : *head) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

void NetworkParams::validate() const {
    auto check_chain = [](const std::vector<DenseLayer>& layers, std::size_t in, const char* name) {
        std::size_t dim = in;
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            if (l.in_dim() != dim || static_cast<std::size_t>(l.bias.size()) != l.out_dim())
                throw DimensionError(std::string(name) + "[" + std::to_string(k) + "] expects input " +
                                     std::to_string(l.in_dim()) + ", receives " + std::to_string(dim));
            dim = l.out_dim();
        }
        return dim;
    };
    const std::size_t enc = check_chain(encoder, input_dim, "encoder");
    if (classifier.empty() || check_chain(classifier, enc, "classifier") != 2)
        throw DimensionError("classifier must end in a 2-logit layer");
    if (!decoder.empty() && check_chain(decoder, enc, "decoder") != input_dim)
        throw DimensionError("decoder output must match input dimension " + std::to_string(input_dim));
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z = *this;
    for (auto* head : {&z.encoder, &z.classifier, &z.decoder}) {
        for (auto& l : *head) {
            l.weight.setZero();
            l.bias.setZero();
        }
    }
    return z;
}

namespace {

nlohmann::json layers_to_json(const std::vector<DenseLayer>& layers) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& l : layers) {
        std::vector<double> w(static_cast<std::size_t>(l.weight.size()));
        // row-major in the file so rows read as output units
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                w[static_cast<std::size_t>(r * l.weight.cols() + c)] = l.weight(r, c);
        out.push_back({{"in", l.in_dim()},
                       {"out", l.out_dim()},
                       {"activation", to_string(l.activation)},
                       {"weight", w},
                       {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return out;
}

std::vector<DenseLayer> layers_from_json(const nlohmann::json& j) {
    std::vector<DenseLayer> layers;
    for (const auto& item : j) {
        const auto in = item.at("in").get<Eigen::Index>();
        const auto out = item.at("out").get<Eigen::Index>();
        const auto w = item.at("weight").get<std::vector<double>>();
        const auto b = item.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
            throw DimensionError("checkpoint layer has inconsistent weight/bias sizes");
        DenseLayer l;
        l.weight.resize(out, in);
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
        l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
        l.activation = activation_from_string(item.at("activation").get<std::string>());
        layers.push_back(std::move(l));
    }
    return layers;
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer l;
    l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    l.activation = act;
    const double limit = std::sqrt((act == Activation::Relu ? 6.0 : 3.0) / static_cast<double>(in));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    return l;
}

std::vector<DenseLayer> make_head(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                                  Activation act, Rng& rng) {
    std::vector<DenseLayer> layers;
    std::size_t dim = in;
    for (const auto h : hidden) {
        layers.push_back(make_layer(dim, h, act, rng));
        dim = h;
    }
    layers.push_back(make_layer(dim, out, Activation::Linear, rng));
    return layers;
}

void apply_activation(Eigen::MatrixXd& z, Activation act) {
    switch (act) {
        case Activation::Relu: z = z.cwiseMax(0.0); break;
        case Activation::Tanh: z = z.array().tanh().matrix(); break;
        case Activation::Linear: break;
    }
}

// Multiplies `delta` (dL/da) in place by da/dz, expressed via the activation a.
void activation_backward(Eigen::MatrixXd& delta, const Eigen::MatrixXd& a, Activation act) {
    switch (act) {
        case Activation::Relu: delta = (a.array() > 0.0).select(delta, 0.0); break;
        case Activation::Tanh: delta = (delta.array() * (1.0 - a.array().square())).matrix(); break;
        case Activation::Linear: break;
    }
}

void run_chain(const std::vector<DenseLayer>& layers, std::vector<Eigen::MatrixXd>& acts) {
    for (const auto& l : layers) {
        Eigen::MatrixXd z = l.weight * acts.back();
        z.colwise() += l.bias;
        apply_activation(z, l.activation);
        acts.push_back(std::move(z));
    }
}

// Backpropagates `delta` (dL/d output of the chain) and accumulates into
// `grads`; returns dL/d chain input. When `grads` is null only the input
// gradient is produced.
Eigen::MatrixXd backprop_chain(const std::vector<DenseLayer>& layers, const std::vector<Eigen::MatrixXd>& acts,
                               Eigen::MatrixXd delta, std::vector<DenseLayer>* grads, bool need_input_grad) {
    for (std::size_t k = layers.size(); k-- > 0;) {
        activation_backward(delta, acts[k + 1], layers[k].activation);
        if (grads) {
            (*grads)[k].weight.noalias() += delta * acts[k].transpose();
            (*grads)[k].bias += delta.rowwise().sum();
        }
        if (k > 0 || need_input_grad) delta = layers[k].weight.transpose() * delta;
    }
    return delta;
}

}  // namespace

nlohmann::json NetworkParams::to_json() const {
    return {{"input_dim", input_dim},
            {"encoder", layers_to_json(encoder)},
            {"classifier", layers_to_json(classifier)},
            {"decoder", layers_to_json(decoder)}};
}

NetworkParams NetworkParams::from_json(const nlohmann::json& j) {
    NetworkParams p;
    p.input_dim = j.at("input_dim").get<std::size_t>();
    p.encoder = layers_from_json(j.at("encoder"));
    p.classifier = layers_from_json(j.at("classifier"));
    p.decoder = layers_from_json(j.at("decoder"));
    p.validate();
    return p;
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim == 0) throw DimensionError("input dimension must be positive");
    Rng rng(seed);
    NetworkParams p;
    p.input_dim = arch.input_dim;
    std::size_t dim = arch.input_dim;
    for (const auto w : arch.encoder) {
        p.encoder.push_back(make_layer(dim, w, arch.hidden, rng));
        dim = w;
    }
    p.classifier = make_head(dim, arch.classifier_hidden, 2, arch.hidden, rng);
    p.decoder = make_head(dim, arch.decoder_hidden, arch.input_dim, arch.hidden, rng);
    p.validate();
    return p;
}

namespace {

template <typename Params, typename Span, typename Fn>
void visit_tensors(Params& params, Fn&& fn, ParamGroup groups) {
    const auto bits = static_cast<unsigned>(groups);
    auto head = [&](auto& layers, const char* name, ParamGroup g) {
        if (!(bits & static_cast<unsigned>(g))) return;
        for (std::size_t k = 0; k < layers.size(); ++k) {
            auto& l = layers[k];
            const std::string prefix = std::string(name) + "[" + std::to_string(k) + "]";
            fn(prefix + ".weight", Span(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
            fn(prefix + ".bias", Span(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
        }
    };
    head(params.encoder, "encoder", ParamGroup::Encoder);
    head(params.classifier, "classifier", ParamGroup::Classifier);
    head(params.decoder, "decoder", ParamGroup::Decoder);
}

}  // namespace

void for_each_tensor(NetworkParams& params, const std::function<void(const std::string&, std::span<double>)>& fn,
                     ParamGroup groups) {
    visit_tensors<NetworkParams, std::span<double>>(params, fn, groups);
}

void for_each_tensor(const NetworkParams& params,
                     const std::function<void(const std::string&, std::span<const double>)>& fn,
                     ParamGroup groups) {
    visit_tensors<const NetworkParams, std::span<const double>>(params, fn, groups);
}

Batch make_batch(std::span<const MaskedSample> samples, ReconMode mode) {
    if (samples.empty()) throw DimensionError("empty batch");
    const auto d = static_cast<Eigen::Index>(samples.front().n_features());
    const auto n = static_cast<Eigen::Index>(samples.size());
    Batch b;
    b.inputs.resize(d, n);
    b.targets.resize(d, n);
    b.eligible.resize(d, n);
    b.labels.resize(samples.size());
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& s = samples[static_cast<std::size_t>(c)];
        if (static_cast<Eigen::Index>(s.n_features()) != d) throw DimensionError("ragged batch");
        for (Eigen::Index f = 0; f < d; ++f) {
            const auto i = static_cast<std::size_t>(f);
            b.inputs(f, c) = s.values[i];
            b.targets(f, c) = s.target[i];
            const bool known = s.known[i] != 0;
            const bool eligible = mode == ReconMode::Intersection ? (known && s.train_mask[i]) : known;
            b.eligible(f, c) = eligible ? 1.0 : 0.0;
        }
        b.labels[static_cast<std::size_t>(c)] = s.label;
    }
    return b;
}

Batch make_batch(const MaskedSample& sample, ReconMode mode) {
    return make_batch(std::span<const MaskedSample>(&sample, 1), mode);
}

ForwardCache forward(const NetworkParams& params, const Eigen::MatrixXd& inputs, bool run_decoder) {
    if (static_cast<std::size_t>(inputs.rows()) != params.input_dim)
        throw DimensionError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                             std::to_string(params.input_dim));
    ForwardCache cache;
    cache.encoder.reserve(params.encoder.size() + 1);
    cache.encoder.push_back(inputs);
    run_chain(params.encoder, cache.encoder);

    cache.classifier.push_back(cache.encoding());
    run_chain(params.classifier, cache.classifier);

    const Eigen::MatrixXd& logits = cache.logits();
    const Eigen::RowVectorXd max = logits.colwise().maxCoeff();
    Eigen::MatrixXd e = (logits.rowwise() - max).array().exp().matrix();
    const Eigen::RowVectorXd sum = e.colwise().sum();
    cache.probs = e.array().rowwise() / sum.array();

    if (run_decoder && !params.decoder.empty()) {
        cache.decoder.push_back(cache.encoding());
        run_chain(params.decoder, cache.decoder);
    }
    return cache;
}

Eigen::VectorXd predict_positive(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
    const auto cache = forward(params, inputs, false);
    return cache.probs.row(1).transpose();
}

LossBreakdown loss(const ForwardCache& cache, const Batch& batch, double lambda) {
    const auto& logits = cache.logits();
    const auto n = static_cast<Eigen::Index>(batch.size());
    double ce = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double m = std::max(logits(0, c), logits(1, c));
        const double lse = m + std::log(std::exp(logits(0, c) - m) + std::exp(logits(1, c) - m));
        ce += lse - logits(batch.labels[static_cast<std::size_t>(c)], c);
    }
    double rec = 0.0;
    if (cache.has_decoder()) {
        rec = ((cache.reconstruction() - batch.targets).array().square() * batch.eligible.array()).sum();
    }
    LossBreakdown out;
    out.classification = ce / static_cast<double>(n);
    out.reconstruction = rec / static_cast<double>(n);
    out.lambda = lambda;
    out.total = out.classification + lambda * out.reconstruction;
    return out;
}

double objective_value(const NetworkParams& params, const Batch& batch, const Objective& objective) {
    const auto cache = forward(params, batch.inputs, objective.recon_weight != 0.0);
    const auto l = loss(cache, batch, objective.recon_weight);
    double value = 0.0;
    if (objective.class_weight != 0.0) value += objective.class_weight * l.classification;
    if (objective.recon_weight != 0.0) value += objective.recon_weight * l.reconstruction;
    return value;
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, const Batch& batch,
                       const Objective& objective) {
    NetworkParams grads = params.zeros_like();
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    Eigen::MatrixXd enc_delta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(params.encoding_dim()),
                                                      static_cast<Eigen::Index>(batch.size()));
    bool enc_touched = false;

    if (objective.class_weight != 0.0) {
        Eigen::MatrixXd delta = cache.probs;
        for (std::size_t c = 0; c < batch.size(); ++c) delta(batch.labels[c], static_cast<Eigen::Index>(c)) -= 1.0;
        delta *= objective.class_weight * inv_n;
        enc_delta = backprop_chain(params.classifier, cache.classifier, std::move(delta), &grads.classifier,
                                   objective.train_encoder);
        enc_touched = true;
    }

    const bool any_eligible = batch.eligible.any();
    if (objective.recon_weight != 0.0 && any_eligible && !params.decoder.empty()) {
        if (!cache.has_decoder()) throw DimensionError("forward cache lacks decoder activations");
        Eigen::MatrixXd delta = ((cache.reconstruction() - batch.targets).array() * batch.eligible.array()).matrix();
        delta *= 2.0 * objective.recon_weight * inv_n;
        Eigen::MatrixXd from_decoder = backprop_chain(params.decoder, cache.decoder, std::move(delta), &grads.decoder,
                                                      objective.train_encoder);
        if (objective.train_encoder) {
            if (enc_touched)
                enc_delta += from_decoder;
            else
                enc_delta = std::move(from_decoder);
            enc_touched = true;
        }
    }

    if (objective.train_encoder && enc_touched && !params.encoder.empty()) {
        backprop_chain(params.encoder, cache.encoder, std::move(enc_delta), &grads.encoder, false);
    }
    return grads;
}

}  // namespace dfcn::nn
