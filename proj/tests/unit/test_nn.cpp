#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dfcn/error.hpp"
#include "dfcn/masking.hpp"
#include "dfcn/nn.hpp"
#include "dfcn/rng.hpp"

using namespace dfcn;
using namespace dfcn::nn;

namespace {

DenseLayer layer(Eigen::MatrixXd w, Activation a) {
    DenseLayer l;
    l.bias = Eigen::VectorXd::Zero(w.rows());
    l.weight = std::move(w);
    l.activation = a;
    return l;
}

// 2 inputs; identity encoder and classifier, decoder scales input 0 by 2.
NetworkParams tiny_network() {
    NetworkParams p;
    p.input_dim = 2;
    p.encoder.push_back(layer(Eigen::MatrixXd::Identity(2, 2), Activation::Linear));
    p.classifier.push_back(layer(Eigen::MatrixXd::Identity(2, 2), Activation::Linear));
    Eigen::MatrixXd dec(2, 2);
    dec << 2, 0, 0, 1;
    p.decoder.push_back(layer(dec, Activation::Linear));
    return p;
}

// Observed (1, 2); the second input is masked; positive label.
MaskedSample tiny_sample() {
    MaskedSample s;
    s.values = {1.0, 0.0};
    s.target = {1.0, 2.0};
    s.known = {1, 1};
    s.train_mask = {0, 1};
    s.label = 1;
    return s;
}

MaskedSample random_sample(std::size_t d, Rng& rng, double imp) {
    FeatureRecord r;
    r.label = static_cast<int>(uniform_index(rng, 2));
    for (std::size_t f = 0; f < d; ++f) {
        r.values.push_back(standard_normal(rng));
        r.known.push_back(bernoulli(rng, 0.8) ? 1 : 0);
        if (!r.known.back()) r.values.back() = 0.0;
    }
    return apply_random_mask(r, imp, rng);
}

// Moves parameters off the zero-bias init so no ReLU sits exactly on its kink.
NetworkParams perturbed(NetworkParams p, Rng& rng) {
    for_each_tensor(p, [&](const std::string&, std::span<double> t) {
        for (auto& v : t) v += 0.1 * standard_normal(rng);
    });
    return p;
}

std::vector<double> flatten(const NetworkParams& p) {
    std::vector<double> out;
    for_each_tensor(p, [&](const std::string&, std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
    return out;
}

}  // namespace

TEST(Loss, HandComputedIntersection) {
    const auto p = tiny_network();
    const auto batch = make_batch(tiny_sample());
    const auto cache = forward(p, batch.inputs);
    const auto l = loss(cache, batch, 0.5);
    // logits (1, 0): -log softmax_1 = log(1 + e)
    EXPECT_NEAR(l.classification, std::log1p(std::exp(1.0)), 1e-15);
    // eligible = {1}: (0 - 2)^2
    EXPECT_NEAR(l.reconstruction, 4.0, 1e-15);
    EXPECT_NEAR(l.total, std::log1p(std::exp(1.0)) + 2.0, 1e-15);
}

TEST(Loss, HandComputedUnion) {
    const auto p = tiny_network();
    const auto batch = make_batch(tiny_sample(), ReconMode::Union);
    const auto l = loss(forward(p, batch.inputs), batch, 1.0);
    // all known positions: (2 - 1)^2 + (0 - 2)^2
    EXPECT_NEAR(l.reconstruction, 5.0, 1e-15);
}

TEST(Loss, EmptyEligibleSetIsZero) {
    auto s = tiny_sample();
    s.train_mask = {0, 0};
    s.values = {1.0, 2.0};
    const auto batch = make_batch(s);
    EXPECT_EQ(loss(forward(tiny_network(), batch.inputs), batch, 3.0).reconstruction, 0.0);
}

TEST(Forward, ProbabilitiesAreStable) {
    auto p = tiny_network();
    Eigen::MatrixXd x(2, 1);
    x << 800.0, -800.0;
    const auto cache = forward(p, x);
    EXPECT_TRUE(std::isfinite(cache.probs(0, 0)));
    EXPECT_NEAR(cache.probs(0, 0) + cache.probs(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(predict_positive(p, x)(0), cache.probs(1, 0), 0.0);
}

TEST(Init, DeterministicAndBounded) {
    const auto arch = wide_architecture(28);
    const auto a = init_network(arch, 7);
    const auto b = init_network(arch, 7);
    const auto c = init_network(arch, 8);
    EXPECT_EQ(flatten(a), flatten(b));
    EXPECT_NE(flatten(a), flatten(c));
    const double limit = std::sqrt(6.0 / 28.0);
    EXPECT_LE(a.encoder[0].weight.cwiseAbs().maxCoeff(), limit);
    EXPECT_EQ(a.encoder[0].bias.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.encoding_dim(), 64u);
    EXPECT_EQ(a.classifier.back().out_dim(), 2u);
    EXPECT_EQ(a.decoder.back().out_dim(), 28u);
}

TEST(Init, BottleneckShape) {
    const auto p = init_network(bottleneck_architecture(28), 1);
    EXPECT_EQ(p.encoding_dim(), 8u);
    EXPECT_TRUE(bottleneck_architecture(28).has_bottleneck());
    EXPECT_FALSE(wide_architecture(28).has_bottleneck());
}

TEST(Params, JsonRoundTripIsExact) {
    const auto p = init_network(wide_architecture(5), 3);
    const auto back = NetworkParams::from_json(p.to_json());
    EXPECT_EQ(flatten(back), flatten(p));
    EXPECT_EQ(back.to_json().dump(), p.to_json().dump());
}

TEST(Params, ValidateCatchesShapeErrors) {
    auto p = init_network(wide_architecture(5), 3);
    p.classifier.back().weight = Eigen::MatrixXd::Zero(3, 32);
    p.classifier.back().bias = Eigen::VectorXd::Zero(3);
    EXPECT_THROW(p.validate(), DimensionError);
}

TEST(Backward, MatchesFiniteDifferences) {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        auto arch = wide_architecture(5);
        arch.encoder = {6, 4};
        arch.classifier_hidden = {3};
        arch.decoder_hidden = {3};
        arch.hidden = rep % 2 ? Activation::Tanh : Activation::Relu;
        const auto params = perturbed(init_network(arch, rng()), rng);
        const auto s = random_sample(5, rng, 0.5);
        const auto report = grad_check(params, s, Objective::composite(0.7));
        EXPECT_TRUE(report.passed) << report.worst_parameter << " " << report.max_relative_error;
    }
}

TEST(Backward, ZeroReconWeightLeavesDecoderUntouched) {
    Rng rng(5);
    const auto params = init_network(wide_architecture(6), 2);
    std::vector<MaskedSample> samples;
    for (int i = 0; i < 8; ++i) samples.push_back(random_sample(6, rng, 0.5));
    const auto batch = make_batch(samples);
    const auto cache = forward(params, batch.inputs);
    const auto composite = backward(params, cache, batch, Objective::composite(0.0));
    const auto plain = backward(params, cache, batch, Objective::classification_only());
    EXPECT_EQ(flatten(composite), flatten(plain));
    for_each_tensor(
        composite, [](const std::string&, std::span<const double> t) {
            for (const double v : t) EXPECT_EQ(v, 0.0);
        },
        ParamGroup::Decoder);
}

TEST(Backward, FrozenEncoderGetsZeroGradient) {
    Rng rng(6);
    const auto params = perturbed(init_network(bottleneck_architecture(10), 2), rng);
    const auto s = random_sample(10, rng, 0.3);
    const auto batch = make_batch(s);
    const auto g = backward(params, forward(params, batch.inputs), batch, Objective::frozen_encoder_classifier());
    for_each_tensor(
        g, [](const std::string&, std::span<const double> t) {
            for (const double v : t) EXPECT_EQ(v, 0.0);
        },
        ParamGroup::Encoder);
    EXPECT_TRUE(grad_check(params, s, Objective::frozen_encoder_classifier()).passed);
}

TEST(GradCheck, DetectsWrongGradient) {
    Rng rng(8);
    const auto params = perturbed(init_network(wide_architecture(4), 1), rng);
    const auto s = random_sample(4, rng, 0.5);
    const GradientFn broken = [](const NetworkParams& p, const ForwardCache& c, const Batch& b, const Objective& o) {
        auto g = backward(p, c, b, o);
        g.classifier.back().bias(1) += 0.1;
        return g;
    };
    const auto report = grad_check(params, s, Objective::composite(1.0), {}, ReconMode::Intersection, broken);
    EXPECT_FALSE(report.passed);
    EXPECT_EQ(report.worst_parameter.rfind("classifier[", 0), 0u) << report.worst_parameter << " " << report.max_relative_error;
}

TEST(Adam, FirstStepHandComputed) {
    Adam adam;
    std::vector<double> w{1.0, -2.0};
    const std::vector<double> g{0.5, -0.25};
    adam.step({std::span<double>(w)}, {std::span<const double>(g)});
    // Bias-corrected first step: lr * g / (|g| + eps).
    EXPECT_NEAR(w[0], 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(w[1], -2.0 + 1e-3 * 0.25 / (0.25 + 1e-8), 1e-15);
    EXPECT_EQ(adam.steps_taken(), 1u);
}

TEST(Adam, GroupSelectionOnlyMovesSelected) {
    auto params = init_network(wide_architecture(4), 1);
    const auto before = params;
    auto grads = params;
    for_each_tensor(grads, [](const std::string&, std::span<double> t) {
        for (auto& v : t) v = 1.0;
    });
    Adam adam;
    optimizer_step(params, grads, adam, ParamGroup::Classifier);
    EXPECT_EQ(params.encoder[0].weight, before.encoder[0].weight);
    EXPECT_EQ(params.decoder[0].weight, before.decoder[0].weight);
    EXPECT_NE(params.classifier[0].weight, before.classifier[0].weight);
}
