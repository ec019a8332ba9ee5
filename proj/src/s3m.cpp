#include "seeds/s3m.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "seeds/log.hpp"

namespace seeds {

ContentGenerator::ContentGenerator(std::size_t d, std::size_t s, std::size_t hidden)
    : generator({d + s, hidden, d}, Activation::leaky(), Activation::identity()),
      critic({d + s, hidden, hidden, 1}, Activation::leaky(), Activation::identity()) {}

void ContentGenerator::initialize(Init init, RngStream& rng) {
    generator.initialize(init, rng);
    critic.initialize(init, rng);
}

Matrix generate_content(const ContentGenerator& gen, const Matrix& z, const Matrix& v, MlpCache* cache) {
    require_cols(z, gen.feature_dim(), "generate_content noise z");
    require_cols(v, gen.semantic_dim(), "generate_content class vectors v");
    if (z.rows() != v.rows()) throw ShapeError("generate_content: z and v row counts differ");
    return gen.generator.forward(hconcat({&z, &v}), cache);
}

WganLosses wgan_losses(Mlp& critic, const Matrix& real, const Matrix& fake, const Matrix& v, double penalty_weight,
                       RngStream& rng, bool accumulate) {
    if (real.cols() != fake.cols() || real.rows() != fake.rows())
        throw ShapeError("wgan_losses: real " + real.shape_string() + " vs fake " + fake.shape_string());
    if (v.rows() != real.rows()) throw ShapeError("wgan_losses: class vectors do not match batch");
    const std::size_t n = real.rows();
    const std::size_t d = real.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    MlpCache cr, cf, ci;
    const Matrix dr = critic.forward(hconcat({&real, &v}), &cr);
    const Matrix df = critic.forward(hconcat({&fake, &v}), &cf);

    Matrix interp(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        const double eps = rng.uniform();
        for (std::size_t c = 0; c < d; ++c) interp(r, c) = eps * real(r, c) + (1.0 - eps) * fake(r, c);
    }
    critic.forward(hconcat({&interp, &v}), &ci);
    const Matrix grad_in = critic.input_gradient(ci);

    WganLosses out;
    double mean_real = 0.0, mean_fake = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        mean_real += dr(r, 0) * inv_n;
        mean_fake += df(r, 0) * inv_n;
    }
    Matrix r_dir(n, critic.in_dim());
    for (std::size_t r = 0; r < n; ++r) {
        double norm2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) norm2 += grad_in(r, c) * grad_in(r, c);
        const double norm = std::sqrt(norm2);
        out.penalty += (norm - 1.0) * (norm - 1.0) * inv_n;
        if (norm > 0.0) {
            const double k = penalty_weight * 2.0 * (norm - 1.0) / norm * inv_n;
            for (std::size_t c = 0; c < d; ++c) r_dir(r, c) = k * grad_in(r, c);
        }
    }
    out.wasserstein = mean_fake - mean_real;
    out.critic_loss = out.wasserstein + penalty_weight * out.penalty;
    out.generator_loss = -mean_fake;

    if (accumulate) {
        critic.backward(cr, Matrix(n, 1, -inv_n));
        critic.backward(cf, Matrix(n, 1, inv_n));
        if (penalty_weight != 0.0) critic.accumulate_input_gradient_vjp(ci, r_dir);
    }
    return out;
}

WganLosses wgan_losses(const Mlp& critic, const Matrix& real, const Matrix& fake, const Matrix& v,
                       double penalty_weight, RngStream& rng) {
    Mlp scratch = critic;
    return wgan_losses(scratch, real, fake, v, penalty_weight, rng, false);
}

LossWithGrad generator_wasserstein(const Mlp& critic, const Matrix& fake, const Matrix& v) {
    MlpCache cache;
    const Matrix score = critic.forward(hconcat({&fake, &v}), &cache);
    const Matrix gin = critic.input_gradient(cache);
    const double inv_n = 1.0 / static_cast<double>(fake.rows());
    LossWithGrad out;
    out.grad = Matrix(fake.rows(), fake.cols());
    for (std::size_t r = 0; r < fake.rows(); ++r) {
        out.value -= score(r, 0) * inv_n;
        for (std::size_t c = 0; c < fake.cols(); ++c) out.grad(r, c) = -gin(r, c) * inv_n;
    }
    return out;
}

LossWithGrad classifier_alignment_loss(const ClassifierHead& head, const Matrix& x, std::span<const std::size_t> labels) {
    for (std::size_t y : labels)
        if (y >= head.class_count())
            throw std::out_of_range("classifier_alignment_loss: label " + std::to_string(y) +
                                    " is not a seen class (" + std::to_string(head.class_count()) + " seen)");
    const CrossEntropy ce = softmax_cross_entropy(head.logits(x), labels);
    return {ce.value, matmul_nn(ce.grad_logits, head.weights)};
}

DivergingLoss semantic_diverging_loss(const Matrix& x1, const Matrix& x2, const Matrix& z1, const Matrix& z2,
                                      double floor) {
    if (x1.rows() != x2.rows() || x1.cols() != x2.cols() || z1.rows() != z2.rows() || z1.cols() != z2.cols() ||
        z1.rows() != x1.rows())
        throw ShapeError("semantic_diverging_loss: mismatched batches");
    const std::size_t n = x1.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    DivergingLoss out{0.0, Matrix(n, x1.cols()), Matrix(n, x1.cols())};
    for (std::size_t r = 0; r < n; ++r) {
        double dz = 0.0, dx = 0.0;
        for (std::size_t c = 0; c < z1.cols(); ++c) dz += std::abs(z1(r, c) - z2(r, c));
        for (std::size_t c = 0; c < x1.cols(); ++c) dx += std::abs(x1(r, c) - x2(r, c));
        const double denom = dx + floor;
        out.value += inv_n * dz / denom;
        const double k = -inv_n * dz / (denom * denom);
        for (std::size_t c = 0; c < x1.cols(); ++c) {
            const double diff = x1(r, c) - x2(r, c);
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            out.grad_x1(r, c) = k * sgn;
            out.grad_x2(r, c) = -k * sgn;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

ContentEncoder::ContentEncoder(std::size_t d, std::size_t cond, std::size_t hidden, std::size_t e)
    : enc({2 * d + cond, hidden, hidden}, Activation::leaky(), Activation::leaky()),
      dec({hidden + d + cond, hidden, e}, Activation::leaky(), Activation::identity()),
      d_(d),
      cond_(cond) {}

void ContentEncoder::initialize(Init init, RngStream& rng) {
    enc.initialize(init, rng);
    dec.initialize(init, rng);
}

Matrix ContentEncoder::forward(const Matrix& z, const Matrix& x, const Matrix& v, Cache* cache) const {
    require_cols(z, d_, "content_encode segment Z (noise)");
    require_cols(x, d_, "content_encode segment X (visual content)");
    require_cols(v, cond_, "content_encode segment V (semantic condition)");
    if (z.rows() != x.rows() || z.rows() != v.rows())
        throw ShapeError("content_encode: segments Z, X, V have row counts " + std::to_string(z.rows()) + ", " +
                         std::to_string(x.rows()) + ", " + std::to_string(v.rows()));
    const Matrix latent = enc.forward(hconcat({&z, &x, &v}), cache ? &cache->enc : nullptr);
    return dec.forward(hconcat({&latent, &x, &v}), cache ? &cache->dec : nullptr);
}

ContentEncoder::Grads ContentEncoder::backward(const Cache& cache, const Matrix& grad_out, bool accumulate) {
    const std::size_t l = latent_dim();
    const Matrix g2 = dec.backward(cache.dec, grad_out, accumulate);
    const Matrix g1 = enc.backward(cache.enc, column_slice(g2, 0, l), accumulate);
    Grads g;
    g.z = column_slice(g1, 0, d_);
    g.x = column_slice(g1, d_, d_);
    g.x += column_slice(g2, l, d_);
    g.v = column_slice(g1, 2 * d_, cond_);
    g.v += column_slice(g2, l + d_, cond_);
    return g;
}

void ContentEncoder::collect(ParamList& out, const std::string& prefix) {
    enc.collect(out, prefix + ".enc");
    dec.collect(out, prefix + ".dec");
}

Matrix content_encode(const ContentEncoder& ce, const Matrix& z, const Matrix& x, const Matrix& v) {
    return ce.forward(z, x, v);
}

namespace {

void mean_std(std::span<const double> v, double& mu, double& sigma) {
    mu = 0.0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mu) * (x - mu);
    sigma = std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

std::vector<double> adain(std::span<const double> a, std::span<const double> c, double floor) {
    if (a.size() != c.size()) throw ShapeError("adain: widths differ");
    const Matrix am(1, a.size(), std::vector<double>(a.begin(), a.end()));
    const Matrix cm(1, c.size(), std::vector<double>(c.begin(), c.end()));
    return adain_forward(am, cm, floor).data();
}

Matrix adain_forward(const Matrix& a, const Matrix& c, double floor, AdainCache* cache) {
    if (a.rows() != c.rows() || a.cols() != c.cols())
        throw ShapeError("adain: content " + a.shape_string() + " vs style " + c.shape_string());
    if (!(floor > 0.0)) throw std::invalid_argument("adain: std floor must be > 0");
    const std::size_t n = a.rows();
    Matrix out(n, a.cols());
    AdainCache local;
    AdainCache& k = cache ? *cache : local;
    k.normalized = Matrix(n, a.cols());
    k.scale.assign(n, 0.0);
    k.clamped.assign(n, false);
    k.mu_c.assign(n, 0.0);
    k.sigma_c.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double mu_a, sig_a;
        mean_std(a.row(r), mu_a, sig_a);
        mean_std(c.row(r), k.mu_c[r], k.sigma_c[r]);
        k.clamped[r] = !(sig_a > floor);
        k.scale[r] = k.clamped[r] ? floor : sig_a;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            k.normalized(r, j) = (a(r, j) - mu_a) / k.scale[r];
            out(r, j) = k.sigma_c[r] * k.normalized(r, j) + k.mu_c[r];
        }
    }
    if (cache) k.c = c;
    return out;
}

void adain_backward(const AdainCache& k, const Matrix& gy, Matrix& grad_a, Matrix& grad_c) {
    const std::size_t n = gy.rows();
    const std::size_t e = gy.cols();
    const double inv_e = 1.0 / static_cast<double>(e);
    grad_a = Matrix(n, e);
    grad_c = Matrix(n, e);
    for (std::size_t r = 0; r < n; ++r) {
        double d_mu = 0.0, d_sigma = 0.0;
        for (std::size_t j = 0; j < e; ++j) {
            d_mu += gy(r, j);
            d_sigma += gy(r, j) * k.normalized(r, j);
        }
        for (std::size_t j = 0; j < e; ++j) {
            double g = d_mu * inv_e;
            if (k.sigma_c[r] > 0.0) g += d_sigma * (k.c(r, j) - k.mu_c[r]) * inv_e / k.sigma_c[r];
            grad_c(r, j) = g;
        }
        double mean_gn = 0.0, mean_gnn = 0.0;
        for (std::size_t j = 0; j < e; ++j) {
            const double gn = k.sigma_c[r] * gy(r, j);
            mean_gn += gn * inv_e;
            mean_gnn += gn * k.normalized(r, j) * inv_e;
        }
        for (std::size_t j = 0; j < e; ++j) {
            const double gn = k.sigma_c[r] * gy(r, j);
            double g = gn - mean_gn;
            if (!k.clamped[r]) g -= k.normalized(r, j) * mean_gnn;
            grad_a(r, j) = g / k.scale[r];
        }
    }
}

FusionDecoder::FusionDecoder(std::size_t e, std::size_t d, double floor)
    : first(e, e, Activation::identity()),
      second(e, e, Activation::identity()),
      head(e, d, Activation::identity()),
      std_floor(floor) {}

void FusionDecoder::initialize(Init init, RngStream& rng) {
    first.initialize(init, rng);
    second.initialize(init, rng);
    head.initialize(init, rng);
}

Matrix FusionDecoder::forward(const Matrix& n_i, const Matrix& n_c, Cache* cache) const {
    require_cols(n_i, content_dim(), "fuse ingredient content N_I");
    require_cols(n_c, content_dim(), "fuse cuisine content N_C");
    if (n_i.rows() != n_c.rows()) throw ShapeError("fuse: N_I and N_C row counts differ");
    if (cache) {
        cache->y1 = adain_forward(first.forward(n_i, &cache->l1), n_c, std_floor, &cache->a1);
        cache->y2 = adain_forward(second.forward(cache->y1, &cache->l2), n_c, std_floor, &cache->a2);
        return head.forward(cache->y2, &cache->lh);
    }
    const Matrix y1 = adain_forward(first.forward(n_i), n_c, std_floor);
    const Matrix y2 = adain_forward(second.forward(y1), n_c, std_floor);
    return head.forward(y2);
}

FusionDecoder::Grads FusionDecoder::backward(const Cache& cache, const Matrix& grad_out, bool accumulate) {
    Grads g;
    const Matrix gy2 = head.backward(cache.lh, grad_out, accumulate);
    Matrix ga2, gc2;
    adain_backward(cache.a2, gy2, ga2, gc2);
    const Matrix gy1 = second.backward(cache.l2, ga2, accumulate);
    Matrix ga1, gc1;
    adain_backward(cache.a1, gy1, ga1, gc1);
    g.n_i = first.backward(cache.l1, ga1, accumulate);
    g.n_c = gc1 + gc2;
    return g;
}

void FusionDecoder::collect(ParamList& out, const std::string& prefix) {
    first.collect(out, prefix + ".lin1");
    second.collect(out, prefix + ".lin2");
    head.collect(out, prefix + ".head");
}

Matrix fuse(const FusionDecoder& fd, const Matrix& n_i, const Matrix& n_c) { return fd.forward(n_i, n_c); }

Mssf::Mssf(std::size_t d, std::size_t cond, std::size_t hidden, std::size_t e)
    : ingredient(d, cond, hidden, e), cuisine(d, cond, hidden, e), fusion(e, d) {}

void Mssf::initialize(Init init, RngStream& rng) {
    ingredient.initialize(init, rng);
    cuisine.initialize(init, rng);
    fusion.initialize(init, rng);
}

Matrix Mssf::forward(const Matrix& noise, const Matrix& x, const Matrix& v_i, const Matrix& v_c, Cache* cache) const {
    const Matrix n_i = ingredient.forward(noise, x, v_i, cache ? &cache->ingredient : nullptr);
    const Matrix n_c = cuisine.forward(noise, x, v_c, cache ? &cache->cuisine : nullptr);
    return fusion.forward(n_i, n_c, cache ? &cache->fusion : nullptr);
}

Mssf::Grads Mssf::backward(const Cache& cache, const Matrix& grad_out, bool accumulate) {
    const FusionDecoder::Grads gf = fusion.backward(cache.fusion, grad_out, accumulate);
    const ContentEncoder::Grads gi = ingredient.backward(cache.ingredient, gf.n_i, accumulate);
    const ContentEncoder::Grads gc = cuisine.backward(cache.cuisine, gf.n_c, accumulate);
    return {gi.z + gc.z, gi.x + gc.x, gi.v, gc.v};
}

void Mssf::collect(ParamList& out, const std::string& prefix) {
    ingredient.collect(out, prefix + ".ce_i");
    cuisine.collect(out, prefix + ".ce_c");
    fusion.collect(out, prefix + ".fusion");
}

// ---------------------------------------------------------------------------

namespace {

std::size_t nearest_centroid(std::span<const double> p, const Matrix& centroids) {
    std::size_t best = 0;
    double best_d = squared_distance(p, centroids.row(0));
    for (std::size_t k = 1; k < centroids.rows(); ++k) {
        const double dd = squared_distance(p, centroids.row(k));
        if (dd < best_d) {
            best_d = dd;
            best = k;
        }
    }
    return best;
}

std::vector<std::size_t> assign_all(const Matrix& x, const Matrix& centroids) {
    std::vector<std::size_t> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = nearest_centroid(x.row(i), centroids);
    return out;
}

}  // namespace

Matrix farthest_point_init(const Matrix& x, std::size_t k, std::uint64_t seed) {
    if (k == 0 || k > x.rows()) throw std::invalid_argument("farthest_point_init: need 1 <= k <= rows");
    RngStream rng(seed);
    Matrix centroids(k, x.cols());
    std::size_t first = rng.index(x.rows());
    std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());
    std::vector<double> min_d(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) min_d[i] = squared_distance(x.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < x.rows(); ++i)
            if (min_d[i] > min_d[far]) far = i;
        std::copy(x.row(far).begin(), x.row(far).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < x.rows(); ++i)
            min_d[i] = std::min(min_d[i], squared_distance(x.row(i), centroids.row(c)));
    }
    return centroids;
}

KMeansResult lloyd_kmeans(const Matrix& x, std::size_t k, std::size_t max_iterations, std::uint64_t seed) {
    KMeansResult res;
    res.centroids = farthest_point_init(x, k, seed);
    res.assignment = assign_all(x, res.centroids);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        res.iterations = it + 1;
        Matrix sums(k, x.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            auto dst = sums.row(res.assignment[i]);
            auto src = x.row(i);
            for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += src[c];
            ++counts[res.assignment[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            for (std::size_t c = 0; c < x.cols(); ++c)
                res.centroids(j, c) = sums(j, c) / static_cast<double>(counts[j]);
        }
        std::vector<std::size_t> next = assign_all(x, res.centroids);
        if (next == res.assignment) break;
        res.assignment = std::move(next);
    }
    return res;
}

Selection kmeans_select(const Matrix& features, const SamplingConfig& cfg) {
    const std::size_t b = features.rows();
    if (cfg.clusters == 0 || cfg.per_cluster == 0)
        throw std::invalid_argument("kmeans_select: cluster count and per-cluster keep must be >= 1");
    const std::size_t want = cfg.clusters * cfg.per_cluster;
    if (b < want)
        throw std::invalid_argument("kmeans_select: " + std::to_string(b) + " features cannot supply S*P = " +
                                    std::to_string(want));
    if (!features.all_finite()) throw std::invalid_argument("kmeans_select: non-finite feature values");

    const KMeansResult km = lloyd_kmeans(features, cfg.clusters, cfg.max_iterations, cfg.seed);
    std::vector<bool> taken(b, false);
    std::vector<std::vector<std::size_t>> picks(cfg.clusters);

    auto ranked = [&](std::size_t cluster, auto&& filter) {
        std::vector<std::pair<double, std::size_t>> cand;
        for (std::size_t i = 0; i < b; ++i)
            if (filter(i)) cand.emplace_back(squared_distance(features.row(i), km.centroids.row(cluster)), i);
        std::sort(cand.begin(), cand.end());
        return cand;
    };

    for (std::size_t c = 0; c < cfg.clusters; ++c) {
        for (auto [dist, i] : ranked(c, [&](std::size_t i) { return km.assignment[i] == c; })) {
            if (picks[c].size() == cfg.per_cluster) break;
            picks[c].push_back(i);
            taken[i] = true;
        }
    }
    Selection sel;
    for (std::size_t c = 0; c < cfg.clusters; ++c) {
        if (picks[c].size() < cfg.per_cluster) {
            for (auto [dist, i] : ranked(c, [&](std::size_t i) { return !taken[i]; })) {
                if (picks[c].size() == cfg.per_cluster) break;
                picks[c].push_back(i);
                taken[i] = true;
                ++sel.borrowed;
            }
        }
        for (std::size_t i : picks[c]) {
            sel.indices.push_back(i);
            sel.cluster.push_back(c);
        }
    }
    if (sel.borrowed > 0)
        log::info("kmeans_select: borrowed " + std::to_string(sel.borrowed) + " rows for under-filled clusters");
    return sel;
}

}  // namespace seeds
