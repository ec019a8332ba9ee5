#pragma once

// Shared fixtures for the unit suites and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "seeds/classifier.hpp"
#include "seeds/nn.hpp"
#include "seeds/optim.hpp"
#include "seeds/rfddm.hpp"
#include "seeds/rng.hpp"
#include "seeds/s3m.hpp"
#include "seeds/semantic.hpp"

namespace seeds::testing {

inline Matrix randn(RngStream& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m = sample_gaussian(rng, r, c);
    m *= scale;
    return m;
}

/// Σ out ⊙ w, a generic scalar probe of a block output.
inline double project(const Matrix& out, const Matrix& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * w.data()[i];
    return s;
}

struct GradReport {
    std::string block;
    double param_error = 0.0;
    std::string worst;
    double input_error = 0.0;  // worst over the checked inputs; 0 when none
    double worst_error() const { return std::max(param_error, input_error); }
};

inline void fold(GradReport& r, const GradCheckResult& g) {
    if (g.max_relative_error >= r.param_error) {
        r.param_error = g.max_relative_error;
        r.worst = g.worst_param;
    }
}

inline std::vector<double> flat(const Matrix& m) { return m.data(); }

// Each check builds a small block (widths ≤ 8), runs its analytic backward
// pass, and compares against central differences.

inline GradReport check_branch_ae(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t s = 6, n = 5, a = 4;
    BranchAE ae(s, 8, 3);
    ae.initialize(Init::he, rng);
    Corpus corpus{Domain::ingredient, {"w0", "w1", "w2", "w3"}, randn(rng, a, s)};
    Matrix v = randn(rng, n, s);
    Matrix targets(n, a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < a; ++j) targets(i, j) = (i + j) % 2;
    ParamList params;
    ae.collect(params, "branch");
    auto loss = [&] { return angular_loss(ae.forward(v), corpus, targets).value; };
    zero_grads(params);
    BranchAE::Cache cache;
    const Matrix rec = ae.forward(v, &cache);
    const AngularLoss al = angular_loss(rec, corpus, targets);
    const Matrix dv = ae.backward(cache, al.grad_reconstructed);
    GradReport r{"branch autoencoder + angular loss"};
    fold(r, check_gradients(params, loss));
    r.input_error = check_input_gradient(v.data(), flat(dv), loss);
    return r;
}

inline GradReport check_content_encoder(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t d = 5, cond = 6, n = 4, e = 4;
    ContentEncoder ce(d, cond, 8, e);
    ce.initialize(Init::he, rng);
    Matrix z = randn(rng, n, d), x = randn(rng, n, d), v = randn(rng, n, cond), w = randn(rng, n, e);
    ParamList params;
    ce.collect(params, "ce");
    auto loss = [&] { return project(ce.forward(z, x, v), w); };
    zero_grads(params);
    ContentEncoder::Cache cache;
    ce.forward(z, x, v, &cache);
    const ContentEncoder::Grads g = ce.backward(cache, w);
    GradReport r{"content encoder"};
    fold(r, check_gradients(params, loss));
    r.input_error = std::max({check_input_gradient(z.data(), flat(g.z), loss),
                              check_input_gradient(x.data(), flat(g.x), loss),
                              check_input_gradient(v.data(), flat(g.v), loss)});
    return r;
}

inline GradReport check_fusion_decoder(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t e = 6, d = 5, n = 4;
    FusionDecoder fd(e, d);
    fd.initialize(Init::he, rng);
    Matrix ni = randn(rng, n, e), nc = randn(rng, n, e), w = randn(rng, n, d);
    ParamList params;
    fd.collect(params, "fusion");
    auto loss = [&] { return project(fd.forward(ni, nc), w); };
    zero_grads(params);
    FusionDecoder::Cache cache;
    fd.forward(ni, nc, &cache);
    const FusionDecoder::Grads g = fd.backward(cache, w);
    GradReport r{"fusion decoder (AdaIN)"};
    fold(r, check_gradients(params, loss));
    r.input_error = std::max(check_input_gradient(ni.data(), flat(g.n_i), loss),
                             check_input_gradient(nc.data(), flat(g.n_c), loss));
    return r;
}

inline GradReport check_generator(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t d = 5, s = 4, n = 6;
    ContentGenerator gen(d, s, 8);
    gen.initialize(Init::he, rng);
    Matrix z = randn(rng, n, d), v = randn(rng, n, s);
    ParamList params;
    gen.generator.collect(params, "generator");
    // Generator objective: Wasserstein term through a fixed critic.
    auto loss = [&] { return generator_wasserstein(gen.critic, generate_content(gen, z, v), v).value; };
    zero_grads(params);
    MlpCache cache;
    const Matrix x = generate_content(gen, z, v, &cache);
    const LossWithGrad lw = generator_wasserstein(gen.critic, x, v);
    gen.generator.backward(cache, lw.grad);
    GradReport r{"generator"};
    fold(r, check_gradients(params, loss));
    return r;
}

inline GradReport check_critic(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t d = 5, s = 4, n = 6;
    ContentGenerator gen(d, s, 8);
    gen.initialize(Init::he, rng);
    Matrix real = randn(rng, n, d), fake = randn(rng, n, d), v = randn(rng, n, s);
    const RngStream interp = rng;
    ParamList params;
    gen.critic.collect(params, "critic");
    auto loss = [&] {
        RngStream r = interp;
        return wgan_losses(std::as_const(gen.critic), real, fake, v, 10.0, r).critic_loss;
    };
    zero_grads(params);
    RngStream r0 = interp;
    wgan_losses(gen.critic, real, fake, v, 10.0, r0, true);
    GradReport r{"critic (WGAN-GP)"};
    fold(r, check_gradients(params, loss));
    return r;
}

inline GradReport check_denoiser(DenoiserMode mode, std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t d = 4, s = 5, n = 6, steps = 4;
    const NoiseSchedule sched = build_schedule(steps, 1e-2, 2e-1);
    DenoiserBank bank(mode, steps, d, s, 8, 4);
    bank.initialize(Init::he, rng);
    Matrix clean = randn(rng, n, d);
    Condition cond{randn(rng, n, d), randn(rng, n, s), randn(rng, n, s)};
    const RngStream noise = rng;
    ParamList params;
    bank.collect(params, "bank");
    auto loss = [&] {
        RngStream r = noise;
        return rfddm_loss(clean, cond, std::as_const(bank), sched, r, TimestepSampling::all_timesteps);
    };
    zero_grads(params);
    RngStream r0 = noise;
    const RfddmLoss l = rfddm_loss(clean, cond, bank, sched, r0, true, TimestepSampling::all_timesteps);
    GradReport r{mode == DenoiserMode::shared ? "denoiser (shared)" : "denoiser (per-timestep)"};
    fold(r, check_gradients(params, loss));
    r.input_error = std::max({check_input_gradient(cond.x.data(), flat(l.grads.x), loss),
                              check_input_gradient(cond.v_i.data(), flat(l.grads.v_i), loss),
                              check_input_gradient(cond.v_c.data(), flat(l.grads.v_c), loss)});
    return r;
}

inline GradReport check_classifier_head(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t d = 6, n = 7;
    ClassifierHead head({"a", "b", "c"}, d);
    head.weights = randn(rng, 3, d, 0.5);
    for (double& b : head.bias) b = rng.gaussian();
    Matrix x = randn(rng, n, d);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(i % 3);
    ParamList params;
    head.collect(params, "head");
    auto loss = [&] { return softmax_cross_entropy(head.logits(x), labels).value; };
    zero_grads(params);
    const CrossEntropy ce = softmax_cross_entropy(head.logits(x), labels);
    const Matrix dx = head.backward(x, ce.grad_logits);
    GradReport r{"classifier head"};
    fold(r, check_gradients(params, loss));
    r.input_error = check_input_gradient(x.data(), flat(dx), loss);
    return r;
}

inline std::vector<GradReport> gradient_suite(std::uint64_t seed = 11) {
    return {check_branch_ae(seed),       check_content_encoder(seed),
            check_fusion_decoder(seed),  check_generator(seed),
            check_critic(seed),          check_denoiser(DenoiserMode::per_timestep, seed),
            check_denoiser(DenoiserMode::shared, seed), check_classifier_head(seed)};
}

// ---------------------------------------------------------------------------
// Reference selection: a second, deliberately naive implementation of
// farthest-point init + Lloyd + nearest-P with borrowing.
// ---------------------------------------------------------------------------

inline double sqdist(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
    return s;
}

inline std::vector<std::size_t> reference_assign(const Matrix& x, const Matrix& cent) {
    std::vector<std::size_t> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < cent.rows(); ++k)
            if (sqdist(x, i, cent, k) < sqdist(x, i, cent, best)) best = k;
        out[i] = best;
    }
    return out;
}

struct ReferenceSelection {
    std::vector<std::vector<std::size_t>> per_cluster;
    Matrix centroids;
    std::vector<std::size_t> assignment;
};

inline ReferenceSelection reference_select(const Matrix& x, std::size_t S, std::size_t P, std::uint64_t seed,
                                           std::size_t max_iter = 100) {
    const std::size_t b = x.rows();
    Matrix cent(S, x.cols());
    RngStream rng(seed);
    std::vector<std::size_t> chosen{rng.index(b)};
    while (chosen.size() < S) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < b; ++i) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t c : chosen) m = std::min(m, sqdist(x, i, x, c));
            if (m > far_d) far_d = m, far = i;
        }
        chosen.push_back(far);
    }
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t c = 0; c < x.cols(); ++c) cent(k, c) = x(chosen[k], c);
    std::vector<std::size_t> asg = reference_assign(x, cent);
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t k = 0; k < S; ++k) {
            std::vector<double> sum(x.cols(), 0.0);
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < b; ++i)
                if (asg[i] == k) {
                    ++cnt;
                    for (std::size_t c = 0; c < x.cols(); ++c) sum[c] += x(i, c);
                }
            if (cnt)
                for (std::size_t c = 0; c < x.cols(); ++c) cent(k, c) = sum[c] / double(cnt);
        }
        auto next = reference_assign(x, cent);
        if (next == asg) break;
        asg = next;
    }
    ReferenceSelection out{std::vector<std::vector<std::size_t>>(S), cent, asg};
    std::vector<bool> taken(b, false);
    auto by_distance = [&](std::size_t k) {
        std::vector<std::size_t> idx(b);
        for (std::size_t i = 0; i < b; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t p, std::size_t q) { return sqdist(x, p, cent, k) < sqdist(x, q, cent, k); });
        return idx;
    };
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t i : by_distance(k))
            if (asg[i] == k && out.per_cluster[k].size() < P) out.per_cluster[k].push_back(i), taken[i] = true;
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t i : by_distance(k))
            if (!taken[i] && out.per_cluster[k].size() < P) out.per_cluster[k].push_back(i), taken[i] = true;
    return out;
}

/// Minimum within-cluster sum of squares over every assignment of b points
/// to at most S non-empty clusters (S^b candidates).
inline double exhaustive_min_sse(const Matrix& x, std::size_t S, std::vector<std::size_t>* best_labels = nullptr) {
    const std::size_t b = x.rows(), d = x.cols();
    std::vector<std::size_t> lab(b, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double sse = 0.0;
        for (std::size_t k = 0; k < S; ++k) {
            std::vector<double> mu(d, 0.0);
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < b; ++i)
                if (lab[i] == k) {
                    ++cnt;
                    for (std::size_t c = 0; c < d; ++c) mu[c] += x(i, c);
                }
            if (!cnt) continue;
            for (double& m : mu) m /= double(cnt);
            for (std::size_t i = 0; i < b; ++i)
                if (lab[i] == k)
                    for (std::size_t c = 0; c < d; ++c) sse += (x(i, c) - mu[c]) * (x(i, c) - mu[c]);
        }
        if (sse < best) {
            best = sse;
            if (best_labels) *best_labels = lab;
        }
        std::size_t pos = 0;
        while (pos < b && ++lab[pos] == S) lab[pos++] = 0;
        if (pos == b) break;
    }
    return best;
}

inline double assignment_sse(const Matrix& x, const std::vector<std::size_t>& lab, std::size_t S) {
    double sse = 0.0;
    for (std::size_t k = 0; k < S; ++k) {
        std::vector<double> mu(x.cols(), 0.0);
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            if (lab[i] == k) {
                ++cnt;
                for (std::size_t c = 0; c < x.cols(); ++c) mu[c] += x(i, c);
            }
        if (!cnt) continue;
        for (double& m : mu) m /= double(cnt);
        for (std::size_t i = 0; i < x.rows(); ++i)
            if (lab[i] == k)
                for (std::size_t c = 0; c < x.cols(); ++c) sse += (x(i, c) - mu[c]) * (x(i, c) - mu[c]);
    }
    return sse;
}

/// Well-separated instance: S blobs far apart with b points total.
inline Matrix separated_blobs(RngStream& rng, std::size_t b, std::size_t S, std::size_t d) {
    Matrix x(b, d);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t k = i % S;
        for (std::size_t c = 0; c < d; ++c) x(i, c) = 0.3 * rng.gaussian() + (c == k % d ? 10.0 * (1 + k / d) : 0.0);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Two-mode diffusion task
// ---------------------------------------------------------------------------

struct MixtureResult {
    double share[2] = {0, 0};  // [negative mode, positive mode]
    std::vector<double> mean[2];
    double max_mean_error = 0.0;
    double seconds_trained = 0.0;
};

/// x = ±2·e₁ + 0.3·N(0, I) in d = 4, unconditional (zero condition triple).
inline Matrix mixture_batch(RngStream& rng, std::size_t n, std::size_t d = 4) {
    Matrix x(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < d; ++c) x(r, c) = 0.3 * rng.gaussian();
        x(r, 0) += 2.0 * sign;
    }
    return x;
}

struct MixtureRecipe {
    std::size_t steps = 2000;
    std::size_t clean_rows = 16;  // each expanded over all T timesteps
    double lr = 3e-3;
    std::size_t samples = 2000;
    std::uint64_t seed = 1;
};

inline MixtureResult run_mixture(DenoiserMode mode, const MixtureRecipe& rc = {}) {
    const std::size_t d = 4, s = 4;
    const NoiseSchedule sched = build_schedule(100, 8.5e-4, 1.2e-2);
    DenoiserBank bank(mode, 100, d, s, 32, 16);
    RngStream rng(rc.seed);
    bank.initialize(Init::he, rng);
    ParamList params;
    bank.collect(params, "bank");
    Adam opt({rc.lr, 0.0}, params);
    const Condition cond{Matrix(rc.clean_rows, d), Matrix(rc.clean_rows, s), Matrix(rc.clean_rows, s)};
    for (std::size_t it = 0; it < rc.steps; ++it) {
        const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * double(it) / double(rc.steps)));
        opt.set_learning_rate(rc.lr * (0.05 + 0.95 * cosine));
        zero_grads(params);
        rfddm_loss(mixture_batch(rng, rc.clean_rows, d), cond, bank, sched, rng, true,
                   TimestepSampling::all_timesteps);
        opt.step(params);
    }
    const Condition sc{Matrix(rc.samples, d), Matrix(rc.samples, s), Matrix(rc.samples, s)};
    const Matrix out = sample(bank, sc, sched, rng);
    MixtureResult res;
    res.mean[0].assign(d, 0.0);
    res.mean[1].assign(d, 0.0);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const int m = out(r, 0) > 0.0 ? 1 : 0;  // nearest of ±2·e₁
        res.share[m] += 1.0;
        for (std::size_t c = 0; c < d; ++c) res.mean[m][c] += out(r, c);
    }
    for (int m = 0; m < 2; ++m) {
        for (std::size_t c = 0; c < d; ++c) {
            res.mean[m][c] /= std::max(1.0, res.share[m]);
            const double truth = c == 0 ? (m ? 2.0 : -2.0) : 0.0;
            res.max_mean_error = std::max(res.max_mean_error, std::abs(res.mean[m][c] - truth));
        }
        res.share[m] /= double(out.rows());
    }
    return res;
}

}  // namespace seeds::testing
