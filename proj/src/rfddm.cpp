#include "seeds/rfddm.hpp"

#include <cmath>
#include <stdexcept>

namespace seeds {

NoiseSchedule build_schedule(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1, got " +
                                    std::to_string(beta_start) + ", " + std::to_string(beta_end));
    if (steps == 1 && beta_start != beta_end)
        throw std::invalid_argument("build_schedule: T = 1 requires beta_start == beta_end");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.assign(steps + 1, 0.0);
    s.alpha.assign(steps + 1, 1.0);
    s.alpha_bar.assign(steps + 1, 1.0);
    for (std::size_t t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        s.beta[t] = beta_start + frac * (beta_end - beta_start);
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
}

namespace {

void check_t(std::size_t t, const NoiseSchedule& sched, std::size_t lo, const char* what) {
    if (t < lo || t > sched.steps)
        throw std::out_of_range(std::string(what) + ": timestep " + std::to_string(t) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(sched.steps) + "]");
}

}  // namespace

std::vector<double> diffuse_step(std::span<const double> x_prev, std::size_t t, std::span<const double> z,
                                 const NoiseSchedule& sched) {
    check_t(t, sched, 1, "diffuse_step");
    if (x_prev.size() != z.size()) throw ShapeError("diffuse_step: x and z widths differ");
    const double a = std::sqrt(1.0 - sched.beta[t]);
    const double b = std::sqrt(sched.beta[t]);
    std::vector<double> out(x_prev.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x_prev[i] + b * z[i];
    return out;
}

Matrix diffuse_closed(const Matrix& x0, std::span<const std::size_t> t, const Matrix& z, const NoiseSchedule& sched) {
    if (x0.rows() != z.rows() || x0.cols() != z.cols())
        throw ShapeError("diffuse_closed: x0 " + x0.shape_string() + " vs z " + z.shape_string());
    if (t.size() != x0.rows()) throw ShapeError("diffuse_closed: one timestep per row required");
    Matrix out(x0.rows(), x0.cols());
    for (std::size_t r = 0; r < x0.rows(); ++r) {
        check_t(t[r], sched, 0, "diffuse_closed");
        if (t[r] == 0) {
            std::copy(x0.row(r).begin(), x0.row(r).end(), out.row(r).begin());
            continue;
        }
        const double a = std::sqrt(sched.alpha_bar[t[r]]);
        const double b = std::sqrt(1.0 - sched.alpha_bar[t[r]]);
        for (std::size_t c = 0; c < x0.cols(); ++c) out(r, c) = a * x0(r, c) + b * z(r, c);
    }
    return out;
}

Matrix diffuse_closed(const Matrix& x0, std::size_t t, const Matrix& z, const NoiseSchedule& sched) {
    const std::vector<std::size_t> ts(x0.rows(), t);
    check_t(t, sched, 0, "diffuse_closed");
    return diffuse_closed(x0, ts, z, sched);
}

Condition Condition::select(std::span<const std::size_t> idx) const {
    return {gather_rows(x, idx), gather_rows(v_i, idx), gather_rows(v_c, idx)};
}

std::vector<double> timestep_embedding(std::size_t t, std::size_t dim) {
    std::vector<double> out(dim);
    const std::size_t half = dim / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double w = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
        out[k] = std::sin(static_cast<double>(t) * w);
        out[half + k] = std::cos(static_cast<double>(t) * w);
    }
    return out;
}

DenoiserBank::DenoiserBank(DenoiserMode mode, std::size_t steps, std::size_t d, std::size_t s, std::size_t hidden,
                           std::size_t e)
    : mode_(mode), steps_(steps), d_(d), s_(s) {
    if (steps == 0) throw std::invalid_argument("DenoiserBank: T must be >= 1");
    if (mode == DenoiserMode::per_timestep)
        sets_.assign(steps, Mssf(d, s, hidden, e));
    else
        sets_.assign(1, Mssf(d, s + kTimestepEmbeddingDim, hidden, e));
}

void DenoiserBank::initialize(Init init, RngStream& rng) {
    for (Mssf& m : sets_) m.initialize(init, rng);
}

Mssf& DenoiserBank::set_for(std::size_t t) {
    return const_cast<Mssf&>(static_cast<const DenoiserBank&>(*this).set_for(t));
}

const Mssf& DenoiserBank::set_for(std::size_t t) const {
    if (t < 1 || t > steps_)
        throw std::out_of_range("denoiser: timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps_) +
                                "]");
    return mode_ == DenoiserMode::per_timestep ? sets_[t - 1] : sets_.front();
}

void DenoiserBank::check_inputs(const Matrix& x_t, std::span<const std::size_t> t, const Condition& cond) const {
    require_cols(x_t, d_, "predict_noise x_t");
    require_cols(cond.x, d_, "predict_noise condition X");
    require_cols(cond.v_i, s_, "predict_noise condition V_I");
    require_cols(cond.v_c, s_, "predict_noise condition V_C");
    const std::size_t n = x_t.rows();
    if (cond.x.rows() != n || cond.v_i.rows() != n || cond.v_c.rows() != n || t.size() != n)
        throw ShapeError("predict_noise: condition rows / timesteps do not match x_t rows (" + std::to_string(n) + ")");
    for (std::size_t ti : t)
        if (ti < 1 || ti > steps_)
            throw std::out_of_range("predict_noise: timestep " + std::to_string(ti) + " outside [1, " +
                                    std::to_string(steps_) + "]");
}

Matrix DenoiserBank::predict(const Matrix& x_t, std::span<const std::size_t> t, const Condition& cond,
                             Cache* cache) const {
    check_inputs(x_t, t, cond);
    const std::size_t n = x_t.rows();
    Matrix out(n, d_);
    std::vector<Group> groups;
    if (mode_ == DenoiserMode::per_timestep) {
        std::vector<std::vector<std::size_t>> by_t(steps_ + 1);
        for (std::size_t r = 0; r < n; ++r) by_t[t[r]].push_back(r);
        for (std::size_t ti = 1; ti <= steps_; ++ti)
            if (!by_t[ti].empty()) groups.push_back({ti, std::move(by_t[ti]), {}});
    } else {
        Group g;
        g.rows.resize(n);
        for (std::size_t r = 0; r < n; ++r) g.rows[r] = r;
        groups.push_back(std::move(g));
    }
    for (Group& g : groups) {
        const Matrix xt = gather_rows(x_t, g.rows);
        const Matrix cx = gather_rows(cond.x, g.rows);
        Matrix vi = gather_rows(cond.v_i, g.rows);
        Matrix vc = gather_rows(cond.v_c, g.rows);
        const Mssf* net = &sets_.front();
        if (mode_ == DenoiserMode::per_timestep) {
            net = &sets_[g.t - 1];
        } else {
            Matrix emb(g.rows.size(), kTimestepEmbeddingDim);
            for (std::size_t i = 0; i < g.rows.size(); ++i) {
                const auto e = timestep_embedding(t[g.rows[i]]);
                std::copy(e.begin(), e.end(), emb.row(i).begin());
            }
            vi = hconcat({&vi, &emb});
            vc = hconcat({&vc, &emb});
        }
        const Matrix pred = net->forward(xt, cx, vi, vc, cache ? &g.cache : nullptr);
        for (std::size_t i = 0; i < g.rows.size(); ++i)
            std::copy(pred.row(i).begin(), pred.row(i).end(), out.row(g.rows[i]).begin());
    }
    if (cache) {
        cache->groups = std::move(groups);
        cache->rows = n;
        cache->valid = true;
    }
    return out;
}

DenoiserBank::Grads DenoiserBank::backward(const Cache& cache, const Matrix& grad_out, bool accumulate) {
    if (!cache.valid) throw std::logic_error("DenoiserBank::backward called without a forward cache");
    require_shape(grad_out, cache.rows, d_, "DenoiserBank::backward upstream gradient");
    Grads g{Matrix(cache.rows, d_), Matrix(cache.rows, s_), Matrix(cache.rows, s_)};
    for (const Group& grp : cache.groups) {
        Mssf& net = mode_ == DenoiserMode::per_timestep ? sets_[grp.t - 1] : sets_.front();
        const Mssf::Grads mg = net.backward(grp.cache, gather_rows(grad_out, grp.rows), accumulate);
        for (std::size_t i = 0; i < grp.rows.size(); ++i) {
            const std::size_t r = grp.rows[i];
            for (std::size_t c = 0; c < d_; ++c) g.x(r, c) += mg.x(i, c);
            for (std::size_t c = 0; c < s_; ++c) {
                g.v_i(r, c) += mg.v_i(i, c);
                g.v_c(r, c) += mg.v_c(i, c);
            }
        }
    }
    return g;
}

void DenoiserBank::collect(ParamList& out, const std::string& prefix) {
    if (mode_ == DenoiserMode::shared) {
        sets_.front().collect(out, prefix + ".shared");
        return;
    }
    for (std::size_t i = 0; i < sets_.size(); ++i) sets_[i].collect(out, prefix + ".t" + std::to_string(i + 1));
}

Matrix predict_noise(const DenoiserBank& bank, const Matrix& x_t, std::size_t t, const Condition& cond) {
    const std::vector<std::size_t> ts(x_t.rows(), t);
    return bank.predict(x_t, ts, cond);
}

Matrix predict_mu(const Matrix& x_t, std::size_t t, const Matrix& z_hat, const NoiseSchedule& sched) {
    check_t(t, sched, 1, "predict_mu");
    if (x_t.rows() != z_hat.rows() || x_t.cols() != z_hat.cols())
        throw ShapeError("predict_mu: x_t " + x_t.shape_string() + " vs predicted noise " + z_hat.shape_string());
    const double one_minus_ab = 1.0 - sched.alpha_bar[t];
    if (!(one_minus_ab > 0.0)) throw std::domain_error("predict_mu: alpha_bar_t == 1 at t >= 1");
    const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha[t]);
    const double coef = (1.0 - sched.alpha[t]) / std::sqrt(one_minus_ab);
    Matrix out(x_t.rows(), x_t.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = inv_sqrt_a * (x_t.data()[i] - coef * z_hat.data()[i]);
    return out;
}

Matrix reverse_step(const Matrix& x_t, std::size_t t, const Condition& cond, const DenoiserBank& bank,
                    const NoiseSchedule& sched, RngStream& rng) {
    check_t(t, sched, 1, "reverse_step");
    Matrix mu = predict_mu(x_t, t, predict_noise(bank, x_t, t, cond), sched);
    if (t > 1) {
        const double sigma = std::sqrt(sched.beta[t]);
        for (double& v : mu.data()) v += sigma * rng.gaussian();
    }
    return mu;
}

Matrix sample(const DenoiserBank& bank, const Condition& cond, const NoiseSchedule& sched, RngStream& rng) {
    if (bank.steps() != sched.steps)
        throw std::invalid_argument("sample: bank built for T = " + std::to_string(bank.steps()) +
                                    ", schedule has T = " + std::to_string(sched.steps));
    Matrix x = sample_gaussian(rng, cond.rows(), bank.feature_dim());
    for (std::size_t t = sched.steps; t >= 1; --t) x = reverse_step(x, t, cond, bank, sched, rng);
    return x;
}

double noise_mse(const Matrix& z, const Matrix& z_hat) {
    if (z.rows() != z_hat.rows() || z.cols() != z_hat.cols()) throw ShapeError("noise_mse: shapes differ");
    if (z.rows() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += (z.data()[i] - z_hat.data()[i]) * (z.data()[i] - z_hat.data()[i]);
    return acc / static_cast<double>(z.rows());
}

namespace {

RfddmLoss rfddm_loss_impl(const Matrix& clean, const Condition& cond, const DenoiserBank& bank,
                          DenoiserBank* grad_target, const NoiseSchedule& sched, RngStream& rng,
                          TimestepSampling mode) {
    const bool accumulate = grad_target != nullptr;
    require_cols(clean, bank.feature_dim(), "rfddm_loss clean batch");
    if (bank.steps() != sched.steps) throw std::invalid_argument("rfddm_loss: bank and schedule T differ");
    const std::size_t n = clean.rows();

    // Rows of the expanded problem: (source row, timestep).
    std::vector<std::size_t> src;
    std::vector<std::size_t> ts;
    if (mode == TimestepSampling::uniform) {
        for (std::size_t r = 0; r < n; ++r) {
            src.push_back(r);
            ts.push_back(1 + rng.index(sched.steps));
        }
    } else {
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t t = 1; t <= sched.steps; ++t) {
                src.push_back(r);
                ts.push_back(t);
            }
    }
    const Matrix x0 = gather_rows(clean, src);
    const Condition c = cond.select(src);
    const Matrix z = sample_gaussian(rng, src.size(), bank.feature_dim());
    const Matrix xt = diffuse_closed(x0, ts, z, sched);

    DenoiserBank::Cache cache;
    const Matrix z_hat = bank.predict(xt, ts, c, accumulate ? &cache : nullptr);

    RfddmLoss out;
    const double inv = 1.0 / static_cast<double>(src.size());
    Matrix grad(src.size(), bank.feature_dim());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double diff = z_hat.data()[i] - z.data()[i];
        out.value += inv * diff * diff;
        grad.data()[i] = 2.0 * inv * diff;
    }
    if (!accumulate) return out;

    const DenoiserBank::Grads g = grad_target->backward(cache, grad);
    out.grads = {Matrix(n, bank.feature_dim()), Matrix(n, bank.semantic_dim()), Matrix(n, bank.semantic_dim())};
    for (std::size_t i = 0; i < src.size(); ++i) {
        const std::size_t r = src[i];
        for (std::size_t col = 0; col < bank.feature_dim(); ++col) out.grads.x(r, col) += g.x(i, col);
        for (std::size_t col = 0; col < bank.semantic_dim(); ++col) {
            out.grads.v_i(r, col) += g.v_i(i, col);
            out.grads.v_c(r, col) += g.v_c(i, col);
        }
    }
    return out;
}

}  // namespace

RfddmLoss rfddm_loss(const Matrix& clean, const Condition& cond, DenoiserBank& bank, const NoiseSchedule& sched,
                     RngStream& rng, bool accumulate, TimestepSampling mode) {
    return rfddm_loss_impl(clean, cond, bank, accumulate ? &bank : nullptr, sched, rng, mode);
}

double rfddm_loss(const Matrix& clean, const Condition& cond, const DenoiserBank& bank, const NoiseSchedule& sched,
                  RngStream& rng, TimestepSampling mode) {
    return rfddm_loss_impl(clean, cond, bank, nullptr, sched, rng, mode).value;
}

}  // namespace seeds
