#pragma once

#include <cstddef>
#include <vector>

#include "seeds/rng.hpp"
#include "seeds/s3m.hpp"
#include "seeds/tensor.hpp"

namespace seeds {

/// Linear β schedule with α_t = 1 − β_t and ᾱ_t = Π_{i≤t} α_i. Arrays are
/// indexed by timestep 0..T, where index 0 holds β = 0, α = ᾱ = 1.
struct NoiseSchedule {
    std::size_t steps = 0;  // T
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
};

/// β interpolated linearly from β_start (t = 1) to β_end (t = T), inclusive.
NoiseSchedule build_schedule(std::size_t steps, double beta_start, double beta_end);

/// x_t = √(1−β_t)·x_{t−1} + √β_t·z_t
std::vector<double> diffuse_step(std::span<const double> x_prev, std::size_t t, std::span<const double> z,
                                 const NoiseSchedule& sched);

/// x_t = √ᾱ_t·x_0 + √(1−ᾱ_t)·z, with one timestep per row.
Matrix diffuse_closed(const Matrix& x0, std::span<const std::size_t> t, const Matrix& z, const NoiseSchedule& sched);
Matrix diffuse_closed(const Matrix& x0, std::size_t t, const Matrix& z, const NoiseSchedule& sched);

/// Conditioning triple (X, V_I, V_C), one row per sample.
struct Condition {
    Matrix x;
    Matrix v_i;
    Matrix v_c;

    std::size_t rows() const noexcept { return x.rows(); }
    Condition select(std::span<const std::size_t> idx) const;
};

enum class DenoiserMode { per_timestep, shared };

constexpr std::size_t kTimestepEmbeddingDim = 32;

/// Sinusoidal embedding [sin(t·ω_k), cos(t·ω_k)], ω_k = 10000^{−2k/dim}.
std::vector<double> timestep_embedding(std::size_t t, std::size_t dim = kTimestepEmbeddingDim);

/// Noise predictor built from MSSF parameter sets: one per timestep, or one
/// shared set whose semantic slots carry an appended timestep embedding.
class DenoiserBank {
public:
    DenoiserBank() = default;
    DenoiserBank(DenoiserMode mode, std::size_t steps, std::size_t d, std::size_t s, std::size_t hidden,
                 std::size_t e);

    DenoiserMode mode() const noexcept { return mode_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t feature_dim() const noexcept { return d_; }
    std::size_t semantic_dim() const noexcept { return s_; }

    void initialize(Init init, RngStream& rng);

    /// Parameter set serving timestep t (1-based).
    Mssf& set_for(std::size_t t);
    const Mssf& set_for(std::size_t t) const;
    std::vector<Mssf>& sets() noexcept { return sets_; }

    struct Group {
        std::size_t t = 0;  // 0 for the shared set
        std::vector<std::size_t> rows;
        Mssf::Cache cache;
    };
    struct Cache {
        std::vector<Group> groups;
        std::size_t rows = 0;
        bool valid = false;
    };
    struct Grads {
        Matrix x;
        Matrix v_i;
        Matrix v_c;
    };

    Matrix predict(const Matrix& x_t, std::span<const std::size_t> t, const Condition& cond,
                   Cache* cache = nullptr) const;
    Grads backward(const Cache& cache, const Matrix& grad_out, bool accumulate = true);

    void collect(ParamList& out, const std::string& prefix);

private:
    void check_inputs(const Matrix& x_t, std::span<const std::size_t> t, const Condition& cond) const;

    DenoiserMode mode_ = DenoiserMode::per_timestep;
    std::size_t steps_ = 0;
    std::size_t d_ = 0;
    std::size_t s_ = 0;
    std::vector<Mssf> sets_;
};

/// ẑ for every row at a common timestep t.
Matrix predict_noise(const DenoiserBank& bank, const Matrix& x_t, std::size_t t, const Condition& cond);

/// μ_θ = (x_t − (1−α_t)/√(1−ᾱ_t)·ẑ)/√α_t
Matrix predict_mu(const Matrix& x_t, std::size_t t, const Matrix& z_hat, const NoiseSchedule& sched);

/// x_{t−1} = μ_θ + √β_t·ζ, ζ ~ N(0, I) for t > 1 and ζ = 0 at t = 1.
Matrix reverse_step(const Matrix& x_t, std::size_t t, const Condition& cond, const DenoiserBank& bank,
                    const NoiseSchedule& sched, RngStream& rng);

/// Full reverse chain from x_T ~ N(0, I); one chain per condition row.
Matrix sample(const DenoiserBank& bank, const Condition& cond, const NoiseSchedule& sched, RngStream& rng);

/// Mean over rows of ‖z − ẑ‖².
double noise_mse(const Matrix& z, const Matrix& z_hat);

enum class TimestepSampling { uniform, all_timesteps };

struct RfddmLoss {
    double value = 0.0;
    DenoiserBank::Grads grads;  // w.r.t. the condition triple (filled when accumulating)
};

/// Noise-regression loss: mean over rows of ‖z − ẑ(x_t, t)‖². `uniform`
/// draws one t per row; `all_timesteps` averages over every t = 1..T.
/// With `accumulate`, bank parameter gradients are added.
RfddmLoss rfddm_loss(const Matrix& clean, const Condition& cond, DenoiserBank& bank, const NoiseSchedule& sched,
                     RngStream& rng, bool accumulate, TimestepSampling mode = TimestepSampling::uniform);
double rfddm_loss(const Matrix& clean, const Condition& cond, const DenoiserBank& bank, const NoiseSchedule& sched,
                  RngStream& rng, TimestepSampling mode = TimestepSampling::uniform);

}  // namespace seeds
