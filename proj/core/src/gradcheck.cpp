#include <algorithm>
#include <cmath>

#include "dfcn/nn.hpp"

namespace dfcn::nn {

namespace {

// "name" + flat column-major offset -> "name(r,c)" for weights, "name(i)" for biases.
std::string element_name(const std::string& tensor, std::size_t offset, const NetworkParams& shape) {
    // tensor looks like "decoder[1].weight"
    const auto open = tensor.find('[');
    const auto close = tensor.find(']');
    const std::string head = tensor.substr(0, open);
    const std::size_t k = std::stoul(tensor.substr(open + 1, close - open - 1));
    const bool is_weight = tensor.ends_with(".weight");
    if (!is_weight) return tensor + "(" + std::to_string(offset) + ")";
    const auto& layers = head == "encoder" ? shape.encoder : head == "classifier" ? shape.classifier : shape.decoder;
    const std::size_t rows = layers[k].out_dim();
    return tensor + "(" + std::to_string(offset % rows) + "," + std::to_string(offset / rows) + ")";
}

}  // namespace

GradCheckReport grad_check(const NetworkParams& params, const MaskedSample& sample, const Objective& objective,
                           const GradCheckOptions& options, ReconMode mode, const GradientFn& gradient) {
    const Batch batch = make_batch(sample, mode);
    // A frozen encoder has no gradient to check.
    const auto groups = static_cast<ParamGroup>(static_cast<unsigned>(options.groups) &
                                                (objective.train_encoder ? 7u : ~1u));
    const auto cache = forward(params, batch.inputs, true);
    const NetworkParams analytic = gradient ? gradient(params, cache, batch, objective)
                                            : backward(params, cache, batch, objective);

    std::vector<std::pair<std::string, std::span<const double>>> analytic_tensors;
    for_each_tensor(
        analytic, [&](const std::string& name, std::span<const double> s) { analytic_tensors.emplace_back(name, s); },
        groups);

    GradCheckReport report;
    NetworkParams probe = params;
    std::size_t tensor_index = 0;
    for_each_tensor(
        probe,
        [&](const std::string& name, std::span<double> values) {
            const auto a = analytic_tensors.at(tensor_index++).second;
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double saved = values[i];
                values[i] = saved + options.step;
                const double plus = objective_value(probe, batch, objective);
                values[i] = saved - options.step;
                const double minus = objective_value(probe, batch, objective);
                values[i] = saved;
                const double numeric = (plus - minus) / (2.0 * options.step);
                const double denom = std::max({std::abs(a[i]), std::abs(numeric), options.floor});
                const double rel = std::abs(a[i] - numeric) / denom;
                ++report.checked;
                if (rel > report.max_relative_error || report.worst_parameter.empty()) {
                    report.max_relative_error = rel;
                    report.worst_parameter = element_name(name, i, params);
                    report.worst_analytic = a[i];
                    report.worst_numeric = numeric;
                }
            }
        },
        groups);
    report.passed = report.max_relative_error <= options.tolerance;
    return report;
}

}  // namespace dfcn::nn
