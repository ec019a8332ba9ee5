#include "seeds/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace seeds {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void zero_grads(const ParamList& params) {
    for (const ParamRef& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

LinearLayer::LinearLayer(std::size_t in, std::size_t out, Activation a)
    : weights(out, in), grad_weights(out, in), bias(out, 0.0), grad_bias(out, 0.0), act(a) {
    if (act.kind == ActivationKind::leaky_relu && !(act.slope > 0.0 && act.slope < 1.0))
        throw std::invalid_argument("LinearLayer: leaky-relu slope must lie in (0, 1)");
}

void LinearLayer::initialize(Init init, RngStream& rng) {
    std::fill(bias.begin(), bias.end(), 0.0);
    if (init == Init::zero) {
        weights.fill(0.0);
        return;
    }
    const double gain = act.kind == ActivationKind::leaky_relu
                            ? std::sqrt(2.0 / (1.0 + act.slope * act.slope))
                            : 1.0;
    const double stddev = gain / std::sqrt(static_cast<double>(in_dim()));
    for (double& w : weights.data()) w = stddev * rng.gaussian();
}

Matrix LinearLayer::forward(const Matrix& x, LinearCache* cache) const {
    if (x.cols() != in_dim())
        throw ShapeError("linear_forward: input " + x.shape_string() + " vs weights " +
                         weights.shape_string());
    Matrix pre = matmul_nt(x, weights);
    for (std::size_t r = 0; r < pre.rows(); ++r)
        for (std::size_t c = 0; c < pre.cols(); ++c) pre(r, c) += bias[c];
    Matrix out = pre;
    switch (act.kind) {
        case ActivationKind::identity:
            break;
        case ActivationKind::leaky_relu:
            for (double& v : out.data())
                if (v < 0.0) v *= act.slope;
            break;
        case ActivationKind::sigmoid:
            for (double& v : out.data()) v = sigmoid(v);
            break;
    }
    if (cache) {
        cache->input = x;
        cache->pre = std::move(pre);
        cache->valid = true;
    }
    return out;
}

Matrix LinearLayer::activation_backward(const Matrix& pre, const Matrix& dy) const {
    Matrix dpre = dy;
    switch (act.kind) {
        case ActivationKind::identity:
            break;
        case ActivationKind::leaky_relu:
            for (std::size_t i = 0; i < dpre.size(); ++i)
                if (pre.data()[i] <= 0.0) dpre.data()[i] *= act.slope;
            break;
        case ActivationKind::sigmoid:
            for (std::size_t i = 0; i < dpre.size(); ++i) {
                const double s = sigmoid(pre.data()[i]);
                dpre.data()[i] *= s * (1.0 - s);
            }
            break;
    }
    return dpre;
}

Matrix LinearLayer::backward(const LinearCache& cache, const Matrix& dy, bool accumulate) {
    if (!cache.valid) throw std::logic_error("LinearLayer::backward called without a forward cache");
    require_shape(dy, cache.pre.rows(), out_dim(), "LinearLayer::backward upstream gradient");
    const Matrix dpre = activation_backward(cache.pre, dy);
    if (accumulate) {
        grad_weights += matmul_tn(dpre, cache.input);
        for (std::size_t r = 0; r < dpre.rows(); ++r)
            for (std::size_t c = 0; c < dpre.cols(); ++c) grad_bias[c] += dpre(r, c);
    }
    return matmul_nn(dpre, weights);
}

void LinearLayer::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weights.data(), &grad_weights.data()});
    out.push_back({prefix + ".bias", &bias, &grad_bias});
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        layers_.emplace_back(widths[i], widths[i + 1], last ? output : hidden);
    }
}

void Mlp::initialize(Init init, RngStream& rng) {
    for (LinearLayer& l : layers_) l.initialize(init, rng);
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
    if (cache) cache->layers.assign(layers_.size(), {});
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        h = layers_[i].forward(h, cache ? &cache->layers[i] : nullptr);
    return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& dy, bool accumulate) {
    if (!cache.valid() || cache.layers.size() != layers_.size())
        throw std::logic_error("Mlp::backward called without a forward cache");
    Matrix g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i].backward(cache.layers[i], g, accumulate);
    return g;
}

Matrix Mlp::input_gradient(const MlpCache& cache) const {
    if (!cache.valid()) throw std::logic_error("Mlp::input_gradient called without a forward cache");
    if (out_dim() != 1) throw ShapeError("Mlp::input_gradient requires a scalar output");
    Matrix g(cache.layers.back().pre.rows(), 1, 1.0);
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Matrix dpre = layers_[i].activation_backward(cache.layers[i].pre, g);
        g = matmul_nn(dpre, layers_[i].weights);
    }
    return g;
}

void Mlp::accumulate_input_gradient_vjp(const MlpCache& cache, const Matrix& r) {
    if (!cache.valid()) throw std::logic_error("Mlp::accumulate_input_gradient_vjp without a forward cache");
    if (out_dim() != 1) throw ShapeError("accumulate_input_gradient_vjp requires a scalar output");
    for (const LinearLayer& l : layers_)
        if (l.act.kind == ActivationKind::sigmoid)
            throw std::logic_error("accumulate_input_gradient_vjp requires piecewise-linear activations");
    const std::size_t n = cache.layers.back().pre.rows();
    require_shape(r, n, in_dim(), "accumulate_input_gradient_vjp direction");

    // Backward sensitivities b_k = ∂f/∂pre_k for every layer.
    std::vector<Matrix> sens(layers_.size());
    Matrix g(n, 1, 1.0);
    for (std::size_t i = layers_.size(); i-- > 0;) {
        sens[i] = layers_[i].activation_backward(cache.layers[i].pre, g);
        g = matmul_nn(sens[i], layers_[i].weights);
    }
    // Forward tangent a_k of r through the linearized network; ∂(r·∇f)/∂W_k = b_kᵀ a_k.
    Matrix a = r;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].grad_weights += matmul_tn(sens[i], a);
        if (i + 1 < layers_.size()) a = layers_[i].activation_backward(cache.layers[i].pre, matmul_nt(a, layers_[i].weights));
    }
}

void Mlp::collect(ParamList& out, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i].collect(out, prefix + ".l" + std::to_string(i));
}

}  // namespace seeds
