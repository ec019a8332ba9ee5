#include "seeds/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace seeds {

ClassifierHead::ClassifierHead(std::vector<std::string> class_names, std::size_t d)
    : classes(std::move(class_names)),
      weights(classes.size(), d),
      bias(classes.size(), 0.0),
      grad_weights(classes.size(), d),
      grad_bias(classes.size(), 0.0) {}

Matrix ClassifierHead::logits(const Matrix& x) const {
    require_cols(x, dim(), "classifier input");
    Matrix out = matmul_nt(x, weights);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias[c];
    return out;
}

std::vector<std::size_t> ClassifierHead::predict(const Matrix& x) const {
    std::vector<std::size_t> all(class_count());
    std::iota(all.begin(), all.end(), 0);
    return predict_among(x, all);
}

std::vector<std::size_t> ClassifierHead::predict_among(const Matrix& x, std::span<const std::size_t> rows) const {
    const Matrix l = logits(x);
    std::vector<std::size_t> out(x.rows(), 0);
    if (rows.empty()) return out;
    for (std::size_t r = 0; r < l.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (l(r, rows[k]) > l(r, rows[best])) best = k;
        out[r] = best;
    }
    return out;
}

Matrix ClassifierHead::backward(const Matrix& x, const Matrix& grad_logits) {
    require_shape(grad_logits, x.rows(), class_count(), "ClassifierHead::backward");
    grad_weights += matmul_tn(grad_logits, x);
    for (std::size_t r = 0; r < grad_logits.rows(); ++r)
        for (std::size_t c = 0; c < grad_logits.cols(); ++c) grad_bias[c] += grad_logits(r, c);
    return matmul_nn(grad_logits, weights);
}

void ClassifierHead::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weights.data(), &grad_weights.data()});
    out.push_back({prefix + ".bias", &bias, &grad_bias});
}

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
    if (labels.size() != logits.rows())
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
    CrossEntropy out;
    out.grad_logits = Matrix(logits.rows(), logits.cols());
    const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(1, logits.rows()));
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        if (labels[r] >= logits.cols())
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(labels[r]) + " outside " +
                                    std::to_string(logits.cols()) + " classes");
        auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        auto g = out.grad_logits.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) g[c] = std::exp(row[c] - mx) / z;
        const double p = g[labels[r]];
        if (p > 1e-12) {
            out.value -= inv_n * std::log(p);
            for (std::size_t c = 0; c < row.size(); ++c) g[c] *= inv_n;
            g[labels[r]] -= inv_n;
        } else {
            // Clamped region: constant loss, zero gradient.
            out.value -= inv_n * std::log(1e-12);
            for (double& v : g) v = 0.0;
        }
    }
    return out;
}

HeadFitReport fit_head(ClassifierHead& head, const Matrix& x, std::span<const std::size_t> labels,
                       const HeadTraining& cfg) {
    if (x.rows() != labels.size()) throw ShapeError("fit_head: feature/label count mismatch");
    if (x.rows() == 0) throw std::invalid_argument("fit_head: empty training set");
    require_cols(x, head.dim(), "fit_head features");
    ParamList params;
    head.collect(params, "head");
    Adam opt(cfg.adam, params);
    RngStream rng(cfg.seed);
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), 0);

    HeadFitReport rep;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix xb = gather_rows(x, idx);
            std::vector<std::size_t> yb;
            for (std::size_t i : idx) yb.push_back(labels[i]);
            zero_grads(params);
            const CrossEntropy ce = softmax_cross_entropy(head.logits(xb), yb);
            head.backward(xb, ce.grad_logits);
            opt.step(params);
            total += ce.value * static_cast<double>(idx.size());
        }
        const double mean = total / static_cast<double>(order.size());
        rep.epochs = epoch + 1;
        rep.final_loss = mean;
        if (std::abs(prev - mean) < cfg.tolerance) break;
        prev = mean;
    }
    return rep;
}

double accuracy_percent(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
    if (predicted.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
    if (truth.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
    return 100.0 * static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace seeds
