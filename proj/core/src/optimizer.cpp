#include <cmath>

#include "dfcn/error.hpp"
#include "dfcn/nn.hpp"

namespace dfcn::nn {

void Adam::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) throw DimensionError("Adam: parameter/gradient tensor count mismatch");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].size(), 0.0);
            v_[i].assign(params[i].size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw DimensionError("Adam: tensor list changed between steps");
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i];
        auto g = grads[i];
        if (p.size() != g.size() || p.size() != m_[i].size())
            throw DimensionError("Adam: tensor " + std::to_string(i) + " changed shape");
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

void optimizer_step(NetworkParams& params, const NetworkParams& grads, Adam& adam, ParamGroup groups) {
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    for_each_tensor(params, [&](const std::string&, std::span<double> s) { p.push_back(s); }, groups);
    for_each_tensor(grads, [&](const std::string&, std::span<const double> s) { g.push_back(s); }, groups);
    adam.step(p, g);
}

}  // namespace dfcn::nn
