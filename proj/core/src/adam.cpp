#include "inn/adam.hpp"

#include <cmath>

#include "inn/error.hpp"

namespace inn {

AdamState::AdamState(std::span<Tensor* const> params, AdamConfig config) : config_(config) {
    if (!(config_.lr >= 0.0)) throw ConfigError("Adam learning rate must be non-negative");
    if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0 && config_.beta2 >= 0.0 && config_.beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    for (const auto* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
    }
}

void AdamState::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw DimensionError("Adam step: expected " + std::to_string(m_.size()) + " parameter tensors");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], m_[i], "Adam parameter");
        require_same_shape(grads[i], m_[i], "Adam gradient");
    }
    if (config_.lr == 0.0) {
        // Parameters stay bit-identical; moments still advance.
        ++t_;
        for (std::size_t i = 0; i < params.size(); ++i)
            for (std::size_t j = 0; j < grads[i].size(); ++j) {
                const double g = grads[i][j];
                m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
                v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
            }
        return;
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* theta = params[i]->data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const double* g = grads[i].data();
        for (std::size_t j = 0; j < m_[i].size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

} // namespace inn
