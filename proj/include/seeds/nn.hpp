#pragma once

#include <string>
#include <vector>

#include "seeds/rng.hpp"
#include "seeds/tensor.hpp"

namespace seeds {

enum class ActivationKind { identity, leaky_relu, sigmoid };

struct Activation {
    ActivationKind kind = ActivationKind::identity;
    double slope = 0.2;  // leaky-relu negative slope, in (0, 1)

    static Activation identity() { return {ActivationKind::identity, 0.2}; }
    static Activation leaky(double slope = 0.2) { return {ActivationKind::leaky_relu, slope}; }
    static Activation sigmoid() { return {ActivationKind::sigmoid, 0.2}; }
};

double sigmoid(double x);

/// A named view of one trainable array together with its gradient buffer.
struct ParamRef {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};
using ParamList = std::vector<ParamRef>;

void zero_grads(const ParamList& params);

enum class Init { he, zero };

struct LinearCache {
    Matrix input;
    Matrix pre;
    bool valid = false;
};

/// y = act(x · Wᵀ + b), W is out × in.
class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(std::size_t in, std::size_t out, Activation act);

    std::size_t in_dim() const noexcept { return weights.cols(); }
    std::size_t out_dim() const noexcept { return weights.rows(); }

    void initialize(Init init, RngStream& rng);

    Matrix forward(const Matrix& x, LinearCache* cache = nullptr) const;
    /// Returns dL/dx. Parameter gradients are accumulated when `accumulate` is set.
    Matrix backward(const LinearCache& cache, const Matrix& dy, bool accumulate = true);

    /// Elementwise activation derivative evaluated at cached pre-activations, times dy.
    Matrix activation_backward(const Matrix& pre, const Matrix& dy) const;

    void collect(ParamList& out, const std::string& prefix);

    Matrix weights;
    Matrix grad_weights;
    std::vector<double> bias;
    std::vector<double> grad_bias;
    Activation act;
};

struct MlpCache {
    std::vector<LinearCache> layers;
    bool valid() const noexcept { return !layers.empty() && layers.back().valid; }
};

/// Feed-forward stack of LinearLayers with explicit per-layer backprop.
class Mlp {
public:
    Mlp() = default;
    /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last layer uses `output`.
    Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output);

    std::size_t in_dim() const { return layers_.front().in_dim(); }
    std::size_t out_dim() const { return layers_.back().out_dim(); }

    void initialize(Init init, RngStream& rng);

    Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;
    Matrix backward(const MlpCache& cache, const Matrix& dy, bool accumulate = true);

    /// For a scalar-output network: per-sample gradient of the output w.r.t. the input.
    Matrix input_gradient(const MlpCache& cache) const;

    /// For a scalar-output piecewise-linear network: accumulates
    /// ∂/∂θ Σ_i rᵢ · ∇ₓf(xᵢ) into the parameter gradients, activation
    /// pattern held fixed. This is the parameter gradient of any penalty on
    /// the input gradient, given r = ∂penalty/∂(∇ₓf).
    void accumulate_input_gradient_vjp(const MlpCache& cache, const Matrix& r);

    void collect(ParamList& out, const std::string& prefix);

    std::vector<LinearLayer>& layers() noexcept { return layers_; }
    const std::vector<LinearLayer>& layers() const noexcept { return layers_; }

private:
    std::vector<LinearLayer> layers_;
};

}  // namespace seeds
