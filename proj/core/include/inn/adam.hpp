#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "inn/tensor.hpp"

namespace inn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moments mirror the shapes of the parameter
/// list handed to the constructor; every step must pass the same list.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::span<Tensor* const> params, AdamConfig config);

    void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t steps() const noexcept { return t_; }
    const std::vector<Tensor>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor>& second_moments() const noexcept { return v_; }

private:
    AdamConfig config_{};
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

} // namespace inn
