#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "seeds/nn.hpp"

namespace seeds {

struct AdamConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adam with bias correction and decoupled weight decay. Moment buffers are
/// allocated against a ParamList at construction and must keep matching it.
class Adam {
public:
    Adam() = default;
    Adam(AdamConfig cfg, const ParamList& params);

    /// Applies one update; rejects the whole step if any gradient is non-finite.
    void step(const ParamList& params);

    const AdamConfig& config() const noexcept { return cfg_; }
    void set_learning_rate(double lr);
    std::uint64_t step_count() const noexcept { return steps_; }

    // Exposed for checkpointing.
    std::uint64_t& mutable_step_count() noexcept { return steps_; }
    std::vector<std::vector<double>>& first_moments() noexcept { return m_; }
    std::vector<std::vector<double>>& second_moments() noexcept { return v_; }

private:
    AdamConfig cfg_;
    std::uint64_t steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// Result of a central finite-difference check over a ParamList.
struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
};

/// Compares the gradients already stored in `params` with central differences
/// of `loss` (step h). Error per array is ‖a − n‖ / max(‖a‖, ‖n‖); arrays
/// whose gradients are both below 1e-10 in norm count as exact.
GradCheckResult check_gradients(const ParamList& params, const std::function<double()>& loss,
                                double h = 1e-5);

/// Same comparison for a free input array with a known analytic gradient.
double check_input_gradient(std::vector<double>& input, const std::vector<double>& analytic,
                            const std::function<double()>& loss, double h = 1e-5);

}  // namespace seeds
