#pragma once

#include <cstdint>
#include <vector>

#include "seeds/classifier.hpp"
#include "seeds/nn.hpp"
#include "seeds/rng.hpp"
#include "seeds/tensor.hpp"

namespace seeds {

// ---------------------------------------------------------------------------
// Adversarial visual-content branch
// ---------------------------------------------------------------------------

/// Generator G(z ⊗ v) -> X ∈ R^d and conditional critic D(x ⊗ v) -> R.
struct ContentGenerator {
    ContentGenerator() = default;
    ContentGenerator(std::size_t d, std::size_t s, std::size_t hidden);

    std::size_t feature_dim() const { return generator.out_dim(); }
    std::size_t semantic_dim() const { return generator.in_dim() - generator.out_dim(); }

    void initialize(Init init, RngStream& rng);

    Mlp generator;  // d + s -> hidden -> d
    Mlp critic;     // d + s -> hidden -> hidden -> 1
};

/// X = G(z ⊗ v). `cache` receives the generator activations when given.
Matrix generate_content(const ContentGenerator& gen, const Matrix& z, const Matrix& v, MlpCache* cache = nullptr);

struct WganLosses {
    double critic_loss = 0.0;     // E D(fake) − E D(real) + λ·GP
    double wasserstein = 0.0;     // E D(fake) − E D(real)
    double penalty = 0.0;         // E (‖∇ₓD(x̂)‖ − 1)²
    double generator_loss = 0.0;  // −E D(fake)
};

/// WGAN-GP losses with interpolates x̂ = εx + (1−ε)x̃, ε ~ U(0, 1) per row.
/// With `accumulate`, critic parameter gradients of critic_loss are added.
WganLosses wgan_losses(Mlp& critic, const Matrix& real, const Matrix& fake, const Matrix& v, double penalty_weight,
                       RngStream& rng, bool accumulate);
WganLosses wgan_losses(const Mlp& critic, const Matrix& real, const Matrix& fake, const Matrix& v,
                       double penalty_weight, RngStream& rng);

struct LossWithGrad {
    double value = 0.0;
    Matrix grad;  // gradient w.r.t. the (first) feature argument
};

/// Generator side of the Wasserstein term, −E D(fake ⊗ v), and its gradient w.r.t. fake.
LossWithGrad generator_wasserstein(const Mlp& critic, const Matrix& fake, const Matrix& v);

/// Cross-entropy of a frozen seen-class head on synthesized features.
LossWithGrad classifier_alignment_loss(const ClassifierHead& head, const Matrix& x, std::span<const std::size_t> labels);

struct DivergingLoss {
    double value = 0.0;
    Matrix grad_x1;
    Matrix grad_x2;
};

constexpr double kDivergingFloor = 1e-6;

/// Mode-seeking ratio: mean over rows of ‖z₁ − z₂‖₁ / (‖X₁ − X₂‖₁ + floor).
DivergingLoss semantic_diverging_loss(const Matrix& x1, const Matrix& x2, const Matrix& z1, const Matrix& z2,
                                      double floor = kDivergingFloor);

// ---------------------------------------------------------------------------
// Multi-semantic synthesis fusion
// ---------------------------------------------------------------------------

/// N = DEC(ENC(z ⊗ X ⊗ V) ⊗ X ⊗ V). The V slot width is `cond`.
class ContentEncoder {
public:
    ContentEncoder() = default;
    ContentEncoder(std::size_t d, std::size_t cond, std::size_t hidden, std::size_t e);

    std::size_t feature_dim() const noexcept { return d_; }
    std::size_t cond_dim() const noexcept { return cond_; }
    std::size_t out_dim() const { return dec.out_dim(); }
    std::size_t latent_dim() const { return enc.out_dim(); }

    void initialize(Init init, RngStream& rng);

    struct Cache {
        MlpCache enc;
        MlpCache dec;
    };
    struct Grads {
        Matrix z;
        Matrix x;
        Matrix v;
    };

    Matrix forward(const Matrix& z, const Matrix& x, const Matrix& v, Cache* cache = nullptr) const;
    Grads backward(const Cache& cache, const Matrix& grad_out, bool accumulate = true);
    void collect(ParamList& out, const std::string& prefix);

    Mlp enc;
    Mlp dec;

private:
    std::size_t d_ = 0;
    std::size_t cond_ = 0;
};

Matrix content_encode(const ContentEncoder& ce, const Matrix& z, const Matrix& x, const Matrix& v);

constexpr double kAdainFloor = 1e-6;

/// σ(c)·(a − μ(a))/max(σ(a), floor) + μ(c), statistics over the coordinates
/// of each vector (population σ).
std::vector<double> adain(std::span<const double> a, std::span<const double> c, double floor = kAdainFloor);

struct AdainCache {
    Matrix normalized;           // (a − μ_a)/scale
    std::vector<double> scale;   // max(σ_a, floor)
    std::vector<bool> clamped;   // σ_a ≤ floor
    std::vector<double> mu_c;
    std::vector<double> sigma_c;
    Matrix c;
};

/// Row-wise AdaIN over a batch.
Matrix adain_forward(const Matrix& a, const Matrix& c, double floor, AdainCache* cache = nullptr);
void adain_backward(const AdainCache& cache, const Matrix& grad_out, Matrix& grad_a, Matrix& grad_c);

/// linear → AdaIN(·, N_C) → linear → AdaIN(·, N_C) → head.
class FusionDecoder {
public:
    FusionDecoder() = default;
    FusionDecoder(std::size_t e, std::size_t d, double std_floor = kAdainFloor);

    std::size_t content_dim() const { return first.in_dim(); }
    std::size_t out_dim() const { return head.out_dim(); }

    void initialize(Init init, RngStream& rng);

    struct Cache {
        LinearCache l1, l2, lh;
        AdainCache a1, a2;
        Matrix y1, y2;  // outputs of the two AdaIN blocks
    };
    struct Grads {
        Matrix n_i;
        Matrix n_c;
    };

    Matrix forward(const Matrix& n_i, const Matrix& n_c, Cache* cache = nullptr) const;
    Grads backward(const Cache& cache, const Matrix& grad_out, bool accumulate = true);
    void collect(ParamList& out, const std::string& prefix);

    LinearLayer first;
    LinearLayer second;
    LinearLayer head;
    double std_floor = kAdainFloor;
};

Matrix fuse(const FusionDecoder& fd, const Matrix& n_i, const Matrix& n_c);

/// One MSSF parameter set: two content encoders and a fusion decoder.
class Mssf {
public:
    Mssf() = default;
    Mssf(std::size_t d, std::size_t cond, std::size_t hidden, std::size_t e);

    void initialize(Init init, RngStream& rng);

    struct Cache {
        ContentEncoder::Cache ingredient;
        ContentEncoder::Cache cuisine;
        FusionDecoder::Cache fusion;
    };
    struct Grads {
        Matrix noise;
        Matrix x;
        Matrix v_i;
        Matrix v_c;
    };

    /// N_I = CE_I(noise, X, V_I), N_C = CE_C(noise, X, V_C), out = fuse(N_I, N_C).
    Matrix forward(const Matrix& noise, const Matrix& x, const Matrix& v_i, const Matrix& v_c,
                   Cache* cache = nullptr) const;
    Grads backward(const Cache& cache, const Matrix& grad_out, bool accumulate = true);
    void collect(ParamList& out, const std::string& prefix);

    ContentEncoder ingredient;
    ContentEncoder cuisine;
    FusionDecoder fusion;
};

// ---------------------------------------------------------------------------
// Unsupervised feature sampling
// ---------------------------------------------------------------------------

struct SamplingConfig {
    std::size_t clusters = 10;     // S
    std::size_t per_cluster = 25;  // P
    std::size_t max_iterations = 100;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    Matrix centroids;
    std::vector<std::size_t> assignment;
    std::size_t iterations = 0;
};

/// Seeded farthest-point initialization: a seeded random first centre, then
/// repeatedly the point farthest from all chosen centres (lowest index on ties).
Matrix farthest_point_init(const Matrix& x, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from farthest-point centres. Nearest-centre ties go to the
/// lowest cluster id; an empty cluster keeps its previous centre.
KMeansResult lloyd_kmeans(const Matrix& x, std::size_t k, std::size_t max_iterations, std::uint64_t seed);

struct Selection {
    std::vector<std::size_t> indices;  // rows of the input, grouped by cluster
    std::vector<std::size_t> cluster;  // cluster id for each selected row
    std::size_t borrowed = 0;          // rows taken from outside their cluster
};

/// Keeps the P rows nearest each of the S centroids; clusters with fewer than P
/// members borrow the nearest still-unselected rows.
Selection kmeans_select(const Matrix& features, const SamplingConfig& cfg);

}  // namespace seeds
