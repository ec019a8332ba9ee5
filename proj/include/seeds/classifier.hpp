#pragma once

#include <string>
#include <vector>

#include "seeds/nn.hpp"
#include "seeds/optim.hpp"
#include "seeds/tensor.hpp"

namespace seeds {

/// Linear softmax classifier over region features.
struct ClassifierHead {
    std::vector<std::string> classes;  // row order of `weights`
    Matrix weights;                    // classes × d
    std::vector<double> bias;
    Matrix grad_weights;
    std::vector<double> grad_bias;

    ClassifierHead() = default;
    ClassifierHead(std::vector<std::string> class_names, std::size_t d);

    std::size_t class_count() const noexcept { return classes.size(); }
    std::size_t dim() const noexcept { return weights.cols(); }

    Matrix logits(const Matrix& x) const;
    /// Row-wise argmax of the logits (first maximum wins).
    std::vector<std::size_t> predict(const Matrix& x) const;
    /// Argmax restricted to the listed rows; returns indices into `rows`.
    std::vector<std::size_t> predict_among(const Matrix& x, std::span<const std::size_t> rows) const;

    /// Accumulates parameter gradients for dL/dlogits and returns dL/dx.
    Matrix backward(const Matrix& x, const Matrix& grad_logits);

    void collect(ParamList& out, const std::string& prefix);
};

struct CrossEntropy {
    double value = 0.0;
    Matrix grad_logits;
};

/// Mean −log softmax(logits)[label], probabilities clamped to ≥ 1e-12.
CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

struct HeadTraining {
    std::size_t max_epochs = 200;
    std::size_t batch = 64;
    double tolerance = 1e-5;  // stop when |Δ epoch loss| falls below this
    AdamConfig adam{1e-2, 0.0};
    std::uint64_t seed = 1;
};

struct HeadFitReport {
    std::size_t epochs = 0;
    double final_loss = 0.0;
};

/// Minibatch Adam on softmax cross-entropy. Labels index `head.classes`.
HeadFitReport fit_head(ClassifierHead& head, const Matrix& x, std::span<const std::size_t> labels,
                       const HeadTraining& cfg);

double accuracy_percent(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

}  // namespace seeds
