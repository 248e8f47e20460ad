#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dfcn/masking.hpp"

namespace dfcn::nn {

enum class Activation { Relu, Tanh, Linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation activation = Activation::Relu;

    std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

// Widths of the hidden layers of each head. The classifier always ends in a
// 2-logit linear layer and the decoder in an input_dim linear layer; the last
// encoder width is the encoding size shared by both heads.
struct Architecture {
    std::size_t input_dim = 28;
    std::vector<std::size_t> encoder{64, 64};
    std::vector<std::size_t> classifier_hidden{32};
    std::vector<std::size_t> decoder_hidden{32};
    Activation hidden = Activation::Relu;

    std::size_t encoding_dim() const { return encoder.empty() ? input_dim : encoder.back(); }
    bool has_bottleneck() const { return encoding_dim() < input_dim; }

    nlohmann::json to_json() const;
    static Architecture from_json(const nlohmann::json& j);
};

// Wide default: 28 -> 64 -> 64, classifier 64 -> 32 -> 2, decoder 64 -> 32 -> 28.
Architecture wide_architecture(std::size_t input_dim);
// Bottleneck default: 28 -> 64 -> 8, classifier 8 -> 32 -> 2, decoder 8 -> 64 -> 28.
Architecture bottleneck_architecture(std::size_t input_dim);

struct NetworkParams {
    std::size_t input_dim = 0;
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> classifier;
    std::vector<DenseLayer> decoder;

    std::size_t encoding_dim() const { return encoder.empty() ? input_dim : encoder.back().out_dim(); }
    std::size_t parameter_count() const;
    // Throws DimensionError when adjacent layers do not compose or a head has
    // the wrong output width.
    void validate() const;
    // Same shapes and activations, every weight and bias zero.
    NetworkParams zeros_like() const;

    nlohmann::json to_json() const;
    static NetworkParams from_json(const nlohmann::json& j);
};

// Fan-in scaled uniform weights, zero biases. Deterministic in `seed`.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

enum class ParamGroup : unsigned { Encoder = 1, Classifier = 2, Decoder = 4, All = 7 };

// Visits every weight matrix and bias vector with a stable name such as
// "decoder[1].weight". Storage is contiguous (column-major for weights).
void for_each_tensor(NetworkParams& params, const std::function<void(const std::string&, std::span<double>)>& fn,
                     ParamGroup groups = ParamGroup::All);
void for_each_tensor(const NetworkParams& params,
                     const std::function<void(const std::string&, std::span<const double>)>& fn,
                     ParamGroup groups = ParamGroup::All);

// Which positions feed the reconstruction term: observed and masked
// (Intersection), or every observed position (Union).
enum class ReconMode { Intersection, Union };

std::string to_string(ReconMode mode);
ReconMode recon_mode_from_string(const std::string& name);

// Column-per-sample batch.
struct Batch {
    Eigen::MatrixXd inputs;    // d x B, post-mask values
    Eigen::MatrixXd targets;   // d x B, pre-mask values
    Eigen::MatrixXd eligible;  // d x B, 1 where the position enters the reconstruction term
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

Batch make_batch(std::span<const MaskedSample> samples, ReconMode mode = ReconMode::Intersection);
Batch make_batch(const MaskedSample& sample, ReconMode mode = ReconMode::Intersection);

struct ForwardCache {
    // activations[0] is the layer input; activations[k] the output of layer k-1.
    std::vector<Eigen::MatrixXd> encoder;
    std::vector<Eigen::MatrixXd> classifier;
    std::vector<Eigen::MatrixXd> decoder;
    Eigen::MatrixXd probs;  // 2 x B softmax

    const Eigen::MatrixXd& encoding() const { return encoder.back(); }
    const Eigen::MatrixXd& logits() const { return classifier.back(); }
    const Eigen::MatrixXd& reconstruction() const { return decoder.back(); }
    bool has_decoder() const { return !decoder.empty(); }
};

ForwardCache forward(const NetworkParams& params, const Eigen::MatrixXd& inputs, bool run_decoder = true);

// Positive-class probability per column; skips the decoder.
Eigen::VectorXd predict_positive(const NetworkParams& params, const Eigen::MatrixXd& inputs);

// Batch means of the per-sample terms.
struct LossBreakdown {
    double classification = 0.0;  // cross-entropy
    double reconstruction = 0.0;  // squared error summed over eligible positions
    double total = 0.0;           // classification + lambda * reconstruction
    double lambda = 0.0;
};

LossBreakdown loss(const ForwardCache& cache, const Batch& batch, double lambda);

// What the gradient is taken of: class_weight * CE + recon_weight * recon.
// Frozen encoder parameters receive exactly zero gradient.
struct Objective {
    double class_weight = 1.0;
    double recon_weight = 1.0;
    bool train_encoder = true;

    static Objective composite(double lambda) { return {1.0, lambda, true}; }
    static Objective classification_only() { return {1.0, 0.0, true}; }
    static Objective reconstruction_only() { return {0.0, 1.0, true}; }
    static Objective frozen_encoder_classifier() { return {1.0, 0.0, false}; }
};

double objective_value(const NetworkParams& params, const Batch& batch, const Objective& objective);

// Analytic gradient of the objective, same shapes as params. The decoder
// branch is skipped entirely (zero gradient, no contribution to the encoder)
// when recon_weight is 0 or no position in the batch is eligible.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, const Batch& batch,
                       const Objective& objective);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam over a fixed list of tensors; the i-th span in every call must refer
// to the same parameter.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads);

    std::size_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Applies one Adam step to the parameter groups selected by `groups`.
void optimizer_step(NetworkParams& params, const NetworkParams& grads, Adam& adam,
                    ParamGroup groups = ParamGroup::All);

using GradientFn = std::function<NetworkParams(const NetworkParams&, const ForwardCache&, const Batch&,
                                               const Objective&)>;

struct GradCheckReport {
    bool passed = true;
    double max_relative_error = 0.0;
    std::string worst_parameter;  // e.g. "decoder[1].weight(3,0)"
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-5;
    // |a - n| / max(|a|, |n|, floor): near-zero gradients are compared absolutely.
    double floor = 1e-4;
    ParamGroup groups = ParamGroup::All;
};

// Compares `gradient` (backward by default) against central differences of the
// objective for every selected parameter.
GradCheckReport grad_check(const NetworkParams& params, const MaskedSample& sample, const Objective& objective,
                           const GradCheckOptions& options = {}, ReconMode mode = ReconMode::Intersection,
                           const GradientFn& gradient = {});

}  // namespace dfcn::nn
