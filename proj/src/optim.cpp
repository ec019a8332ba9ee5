#include "seeds/optim.hpp"

#include <cmath>

namespace seeds {

Adam::Adam(AdamConfig cfg, const ParamList& params) : cfg_(cfg) {
    if (!(cfg_.learning_rate > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
    if (!(cfg_.weight_decay >= 0.0)) throw std::invalid_argument("Adam: weight decay must be >= 0");
    if (!(cfg_.beta1 > 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 > 0.0 && cfg_.beta2 < 1.0))
        throw std::invalid_argument("Adam: moment coefficients must lie in (0, 1)");
    if (!(cfg_.epsilon > 0.0)) throw std::invalid_argument("Adam: numeric floor must be > 0");
    for (const ParamRef& p : params) {
        m_.emplace_back(p.value->size(), 0.0);
        v_.emplace_back(p.value->size(), 0.0);
    }
}

void Adam::set_learning_rate(double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
    cfg_.learning_rate = lr;
}

void Adam::step(const ParamList& params) {
    if (params.size() != m_.size())
        throw ShapeError("Adam::step: " + std::to_string(params.size()) + " parameter arrays, state has " +
                         std::to_string(m_.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        if (p.value->size() != m_[i].size() || p.grad->size() != m_[i].size())
            throw ShapeError("Adam::step: shape drift on " + p.name);
        for (double g : *p.grad)
            if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in parameter " + p.name);
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double>& w = *params[i].value;
        const std::vector<double>& g = *params[i].grad;
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * w[k]);
        }
    }
}

namespace {

double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff += (a[k] - n[k]) * (a[k] - n[k]);
        na += a[k] * a[k];
        nn += n[k] * n[k];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    if (scale < 1e-10) return 0.0;
    return std::sqrt(diff) / scale;
}

std::vector<double> numeric_gradient(std::vector<double>& x, const std::function<double()>& loss, double h) {
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = x[k];
        x[k] = saved + h;
        const double up = loss();
        x[k] = saved - h;
        const double down = loss();
        x[k] = saved;
        out[k] = (up - down) / (2.0 * h);
    }
    return out;
}

}  // namespace

GradCheckResult check_gradients(const ParamList& params, const std::function<double()>& loss, double h) {
    GradCheckResult res;
    for (const ParamRef& p : params) {
        const std::vector<double> analytic = *p.grad;
        const std::vector<double> numeric = numeric_gradient(*p.value, loss, h);
        const double err = relative_error(analytic, numeric);
        if (res.worst_param.empty() || err > res.max_relative_error) {
            res.max_relative_error = err;
            res.worst_param = p.name;
        }
    }
    return res;
}

double check_input_gradient(std::vector<double>& input, const std::vector<double>& analytic,
                            const std::function<double()>& loss, double h) {
    return relative_error(analytic, numeric_gradient(input, loss, h));
}

}  // namespace seeds
