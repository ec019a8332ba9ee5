#include "seeds/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "seeds/log.hpp"

namespace seeds {

namespace {

const char* const kIngredientWords[] = {"tomato", "egg",    "beef",   "tofu",    "potato", "chicken",
                                        "shrimp", "noodle", "rice",   "pork",    "fish",   "mushroom"};
const char* const kCuisineWords[] = {"fried",  "stewed", "steamed", "roasted", "braised", "grilled",
                                     "boiled", "baked",  "smoked",  "pickled", "sauteed", "poached"};

std::string word(const char* const* list, std::size_t n, std::size_t i, const char* fallback) {
    if (i < n) return list[i];
    return std::string(fallback) + std::to_string(i);
}

void normalize_row(std::span<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

std::string pair_string(const std::pair<std::size_t, std::size_t>& p) {
    return "(" + std::to_string(p.first) + ", " + std::to_string(p.second) + ")";
}

}  // namespace

void BenchmarkSpec::validate_and_complete() {
    if (ingredients == 0 || cuisines == 0) throw std::invalid_argument("benchmark: need >= 1 ingredient and cuisine");
    if (d == 0 || s == 0) throw std::invalid_argument("benchmark: d and s must be >= 1");
    if (modes_per_class == 0) throw std::invalid_argument("benchmark: modes-per-class must be >= 1");
    if (train_per_class == 0 || test_per_class == 0)
        throw std::invalid_argument("benchmark: per-class sample counts must be >= 1");
    if (!(sigma >= 0.0) || !(feature_scale >= 0.0) || !(offset_scale >= 0.0) || !(semantic_noise >= 0.0))
        throw std::invalid_argument("benchmark: scales must be non-negative");

    if (seen_pairs.empty() && unseen_pairs.empty())
        for (std::size_t i = 0; i < std::min(ingredients, cuisines); ++i) unseen_pairs.emplace_back(i, i);
    if (seen_pairs.empty()) {
        const std::set<std::pair<std::size_t, std::size_t>> held(unseen_pairs.begin(), unseen_pairs.end());
        for (std::size_t i = 0; i < ingredients; ++i)
            for (std::size_t c = 0; c < cuisines; ++c)
                if (!held.count({i, c})) seen_pairs.emplace_back(i, c);
    }

    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::set<std::size_t> seen_ing, seen_cui;
    for (const auto& p : seen_pairs) {
        if (p.first >= ingredients || p.second >= cuisines)
            throw std::invalid_argument("benchmark: seen pair " + pair_string(p) + " out of range");
        if (!seen.insert(p).second) throw std::invalid_argument("benchmark: duplicate seen pair " + pair_string(p));
        seen_ing.insert(p.first);
        seen_cui.insert(p.second);
    }
    std::set<std::pair<std::size_t, std::size_t>> unseen;
    for (const auto& p : unseen_pairs) {
        if (p.first >= ingredients || p.second >= cuisines)
            throw std::invalid_argument("benchmark: unseen pair " + pair_string(p) + " out of range");
        if (seen.count(p)) throw std::invalid_argument("benchmark: pair " + pair_string(p) + " is both seen and unseen");
        if (!unseen.insert(p).second)
            throw std::invalid_argument("benchmark: duplicate unseen pair " + pair_string(p));
        if (!seen_ing.count(p.first) || !seen_cui.count(p.second))
            throw std::invalid_argument("benchmark: unseen pair " + pair_string(p) +
                                        " uses an ingredient or cuisine absent from every seen pair");
    }
    if (seen_pairs.size() < 2) throw std::invalid_argument("benchmark: need >= 2 seen pairs");
}

std::string_view split_name(DatasetSplit s) {
    switch (s) {
        case DatasetSplit::seen_train: return "seen-train";
        case DatasetSplit::seen_test: return "seen-test";
        case DatasetSplit::unseen_test: return "unseen-test";
        case DatasetSplit::unseen_train: return "unseen-train";
    }
    return "?";
}

Benchmark gen_benchmark(BenchmarkSpec spec) {
    spec.validate_and_complete();
    Benchmark b;
    RngStream rng(spec.seed);

    // Base vectors double as corpus embeddings, so lexical masks and the
    // class vectors share one geometry.
    b.ingredients.domain = Domain::ingredient;
    b.cuisines.domain = Domain::cuisine;
    b.ingredients.vectors = sample_gaussian(rng, spec.ingredients, spec.s);
    b.cuisines.vectors = sample_gaussian(rng, spec.cuisines, spec.s);
    for (std::size_t i = 0; i < spec.ingredients; ++i) {
        normalize_row(b.ingredients.vectors.row(i));
        b.ingredients.tokens.push_back(word(kIngredientWords, std::size(kIngredientWords), i, "ingredient"));
    }
    for (std::size_t c = 0; c < spec.cuisines; ++c) {
        normalize_row(b.cuisines.vectors.row(c));
        b.cuisines.tokens.push_back(word(kCuisineWords, std::size(kCuisineWords), c, "cuisine"));
    }

    Matrix map = sample_gaussian(rng, spec.d, spec.ingredients + spec.cuisines);
    map *= spec.feature_scale;

    b.table = SemanticTable(spec.s);
    std::vector<std::pair<std::size_t, std::size_t>> pairs = spec.seen_pairs;
    pairs.insert(pairs.end(), spec.unseen_pairs.begin(), spec.unseen_pairs.end());
    std::vector<Matrix> modes;
    b.class_means = Matrix(pairs.size(), spec.d);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [ing, cui] = pairs[k];
        const std::string& it = b.ingredients.tokens[ing];
        const std::string& ct = b.cuisines.tokens[cui];
        std::vector<double> v(spec.s);
        for (std::size_t j = 0; j < spec.s; ++j)
            v[j] = b.ingredients.vectors(ing, j) + b.cuisines.vectors(cui, j) + spec.semantic_noise * rng.gaussian();
        normalize_row(v);
        b.table.add(ct + "_" + it, v, k < spec.seen_pairs.size() ? Split::seen : Split::unseen);
        b.display_names.push_back(ct + " " + it);

        Matrix m = sample_gaussian(rng, spec.modes_per_class, spec.d);
        m *= spec.offset_scale;
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t j = 0; j < spec.d; ++j) {
                m(r, j) += map(j, ing) + map(j, spec.ingredients + cui);
                b.class_means(k, j) += m(r, j) / static_cast<double>(spec.modes_per_class);
            }
        modes.push_back(std::move(m));
    }

    auto draw = [&](FeatureDataset& ds, std::size_t cls, std::size_t count) {
        const Matrix& m = modes[cls];
        const std::size_t start = ds.labels.size();
        Matrix grown(start + count, spec.d);
        std::copy(ds.features.data().begin(), ds.features.data().end(), grown.data().begin());
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t mode = rng.index(m.rows());
            for (std::size_t j = 0; j < spec.d; ++j) grown(start + r, j) = m(mode, j) + spec.sigma * rng.gaussian();
            ds.labels.push_back(cls);
        }
        ds.features = std::move(grown);
    };
    b.seen_train.split = DatasetSplit::seen_train;
    b.seen_test.split = DatasetSplit::seen_test;
    b.unseen_test.split = DatasetSplit::unseen_test;
    b.unseen_train.split = DatasetSplit::unseen_train;
    for (FeatureDataset* ds : {&b.seen_train, &b.seen_test, &b.unseen_test, &b.unseen_train})
        ds->features = Matrix(0, spec.d);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const bool seen = k < spec.seen_pairs.size();
        draw(seen ? b.seen_train : b.unseen_train, k, spec.train_per_class);
        draw(seen ? b.seen_test : b.unseen_test, k, spec.test_per_class);
    }
    b.spec = std::move(spec);
    return b;
}

double nearest_mean_accuracy(const Matrix& class_means, const FeatureDataset& data,
                             const std::vector<std::size_t>& classes) {
    if (data.size() == 0 || classes.empty()) return 0.0;
    std::vector<std::size_t> pred(data.size());
    for (std::size_t r = 0; r < data.size(); ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k : classes) {
            const double dist = squared_distance(data.features.row(r), class_means.row(k));
            if (dist < best) {
                best = dist;
                pred[r] = k;
            }
        }
    }
    return accuracy_percent(pred, data.labels);
}

// ---------------------------------------------------------------------------

namespace {

ClassifierHead fit_on_dataset(const FeatureDataset& data, const SemanticTable& table, const HeadTraining& cfg,
                              const char* what) {
    const std::set<std::size_t> present(data.labels.begin(), data.labels.end());
    if (present.size() < 2)
        throw std::invalid_argument(std::string(what) + ": need >= 2 classes, got " + std::to_string(present.size()));
    std::vector<std::string> names;
    std::unordered_map<std::size_t, std::size_t> row_of;
    for (std::size_t id : present) {
        row_of[id] = names.size();
        names.push_back(table.name(id));
    }
    std::vector<std::size_t> rows;
    rows.reserve(data.size());
    for (std::size_t id : data.labels) rows.push_back(row_of.at(id));
    ClassifierHead head(names, data.features.cols());
    fit_head(head, data.features, rows, cfg);
    return head;
}

}  // namespace

ClassifierHead train_seen_classifier(const FeatureDataset& data, const SemanticTable& table,
                                     const HeadTraining& cfg) {
    for (std::size_t id : data.labels)
        if (table.split(id) != Split::seen)
            throw std::invalid_argument("train_seen_classifier: class '" + table.name(id) + "' is not seen");
    return fit_on_dataset(data, table, cfg, "train_seen_classifier");
}

ClassifierHead train_oracle_classifier(const FeatureDataset& unseen_train, const SemanticTable& table,
                                       const HeadTraining& cfg) {
    return fit_on_dataset(unseen_train, table, cfg, "train_oracle_classifier");
}

std::size_t FeatureBank::per_class() const {
    if (labels.size() != features.rows()) throw ShapeError("feature bank: label/row count mismatch");
    std::vector<std::size_t> counts(classes.size(), 0);
    for (std::size_t l : labels) {
        if (l >= classes.size()) throw std::out_of_range("feature bank: label outside class table");
        ++counts[l];
    }
    if (counts.empty()) return 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
        if (counts[k] != counts[0])
            throw std::invalid_argument("feature bank: class '" + classes[k] + "' has " + std::to_string(counts[k]) +
                                        " rows, class '" + classes[0] + "' has " + std::to_string(counts[0]));
    return counts[0];
}

ClassifierHead train_unseen_classifier(const FeatureBank& bank, const HeadTraining& cfg) {
    if (bank.classes.size() < 2) throw std::invalid_argument("train_unseen_classifier: need >= 2 unseen classes");
    if (bank.per_class() == 0) throw std::invalid_argument("train_unseen_classifier: empty bank");
    ClassifierHead head(bank.classes, bank.features.cols());
    fit_head(head, bank.features, bank.labels, cfg);
    return head;
}

// ---------------------------------------------------------------------------

void LossWeights::validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0))
        throw std::invalid_argument("loss weights must be >= 0");
}

void SynthesizerConfig::validate() const {
    if (d == 0 || s == 0 || e == 0 || hidden == 0 || branch_hidden == 0)
        throw std::invalid_argument("synthesizer: dims must be >= 1");
    if (batch == 0) throw std::invalid_argument("synthesizer: batch must be >= 1");
    if (!(gp_weight >= 0.0)) throw std::invalid_argument("synthesizer: gradient-penalty weight must be >= 0");
    if (!(mask_l1 >= 0.0)) throw std::invalid_argument("synthesizer: mask L1 weight must be >= 0");
    weights.validate();
    build_schedule(steps, beta_start, beta_end);
    Adam probe(adam, {});
}

ParamList SynthesizerState::branch_params() {
    ParamList p;
    branch_i.collect(p, "branch_i");
    branch_c.collect(p, "branch_c");
    return p;
}

ParamList SynthesizerState::mask_params() {
    return {{"mask_i.logits", &mask_i.logits.data(), &mask_grad_i.data()},
            {"mask_c.logits", &mask_c.logits.data(), &mask_grad_c.data()}};
}

ParamList SynthesizerState::generator_params() {
    ParamList p;
    generator.generator.collect(p, "generator");
    return p;
}

ParamList SynthesizerState::critic_params() {
    ParamList p;
    generator.critic.collect(p, "critic");
    return p;
}

ParamList SynthesizerState::denoiser_params() {
    ParamList p;
    bank.collect(p, "denoiser");
    return p;
}

ParamList SynthesizerState::all_params() {
    ParamList p = branch_params();
    for (ParamList part : {mask_params(), generator_params(), critic_params(), denoiser_params()})
        p.insert(p.end(), part.begin(), part.end());
    seen_head.collect(p, "seen_head");
    return p;
}

SynthesizerState make_synthesizer(const SynthesizerConfig& cfg, const SemanticTable& table,
                                  const Corpus& ingredients, const Corpus& cuisines, ClassifierHead seen_head) {
    cfg.validate();
    if (table.dim() != cfg.s)
        throw ShapeError("synthesizer: semantic table dim " + std::to_string(table.dim()) + " != s " +
                         std::to_string(cfg.s));
    ingredients.validate();
    cuisines.validate();
    if (ingredients.dim() != cfg.s || cuisines.dim() != cfg.s)
        throw ShapeError("synthesizer: corpus dim does not match s = " + std::to_string(cfg.s));
    if (seen_head.dim() != cfg.d)
        throw ShapeError("synthesizer: seen classifier dim " + std::to_string(seen_head.dim()) + " != d " +
                         std::to_string(cfg.d));

    SynthesizerState st;
    st.config = cfg;
    st.schedule = build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end);
    st.corpus_i = cfg.single_branch ? merge_corpora(ingredients, cuisines) : ingredients;
    st.corpus_c = cuisines;

    std::vector<std::string> names;
    for (std::size_t k = 0; k < table.size(); ++k) names.push_back(table.name(k));
    LexicalMaskReport ri, rc;
    st.mask_i = lexical_mask_init(names, st.corpus_i, cfg.mask_mode, 10.0, &ri);
    st.mask_c = lexical_mask_init(names, st.corpus_c, cfg.mask_mode, 10.0, &rc);
    st.mask_grad_i = Matrix(st.mask_i.logits.rows(), st.mask_i.logits.cols());
    st.mask_grad_c = Matrix(st.mask_c.logits.rows(), st.mask_c.logits.cols());

    const std::size_t latent = cfg.latent ? cfg.latent : default_latent_dim(cfg.s);
    st.branch_i = BranchAE(cfg.s, cfg.branch_hidden, latent);
    st.branch_c = BranchAE(cfg.s, cfg.branch_hidden, latent);
    st.generator = ContentGenerator(cfg.d, cfg.s, cfg.hidden);
    st.bank = DenoiserBank(cfg.denoiser, cfg.steps, cfg.d, cfg.s, cfg.hidden, cfg.e);

    RngStream init = RngStream(cfg.seed).fork(0x1417);
    st.branch_i.initialize(Init::he, init);
    st.branch_c.initialize(Init::he, init);
    st.generator.initialize(Init::he, init);
    st.bank.initialize(Init::he, init);

    st.seen_head = std::move(seen_head);
    st.opt_branches = Adam(cfg.adam, st.branch_params());
    st.opt_masks = Adam(cfg.adam, st.mask_params());
    st.opt_generator = Adam(cfg.adam, st.generator_params());
    st.opt_critic = Adam(cfg.adam, st.critic_params());
    st.opt_denoiser = Adam(cfg.adam, st.denoiser_params());
    st.rng = RngStream(cfg.seed).fork(0x7a41);
    return st;
}

BranchSemantics state_semantics(const SynthesizerState& state, const SemanticTable& table,
                                std::span<const std::size_t> ids) {
    const Matrix v = table.gather(ids);
    BranchSemantics out;
    out.ingredient = state.branch_i.forward(v);
    out.cuisine = state.config.single_branch ? out.ingredient : state.branch_c.forward(v);
    return out;
}

namespace {

void check_finite(double v, const char* name, std::size_t epoch) {
    if (!std::isfinite(v)) throw TrainingDiverged(epoch, std::string(name) + " is not finite");
}

void scale_grads(const ParamList& params, double k) {
    for (const ParamRef& p : params)
        for (double& g : *p.grad) g *= k;
}

// d/dlogit of sigmoid targets, scattered into the rows of the mask gradient.
void mask_backward(const AttentionMask& mask, Matrix& grad, std::span<const std::size_t> ids, const Matrix& gt,
                   double scale) {
    for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t j = 0; j < grad.cols(); ++j) {
            const double sg = sigmoid(mask.logits(ids[r], j));
            grad(ids[r], j) += scale * gt(r, j) * sg * (1.0 - sg);
        }
}

double mask_l1(const AttentionMask& mask, Matrix& grad, std::span<const std::size_t> seen, double weight) {
    if (seen.empty() || grad.cols() == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(seen.size() * grad.cols());
    double value = 0.0;
    for (std::size_t k : seen)
        for (std::size_t j = 0; j < grad.cols(); ++j) {
            const double sg = sigmoid(mask.logits(k, j));
            value += weight * inv * sg;
            grad(k, j) += weight * inv * sg * (1.0 - sg);
        }
    return value;
}

}  // namespace

void train_synthesizer(SynthesizerState& st, const FeatureDataset& data, const SemanticTable& table,
                       std::size_t epochs) {
    const SynthesizerConfig& cfg = st.config;
    require_cols(data.features, cfg.d, "train_synthesizer features");
    if (data.labels.size() != data.features.rows()) throw ShapeError("train_synthesizer: label/row mismatch");
    if (data.size() == 0 && epochs > 0) throw std::invalid_argument("train_synthesizer: empty training set");
    if (st.mask_i.logits.rows() != table.size())
        throw std::invalid_argument("train_synthesizer: state was built for a different semantic table");

    std::unordered_map<std::string, std::size_t> head_row;
    for (std::size_t k = 0; k < st.seen_head.class_count(); ++k) head_row[st.seen_head.classes[k]] = k;
    std::vector<std::size_t> head_label(table.size(), st.seen_head.class_count());
    for (std::size_t id = 0; id < table.size(); ++id) {
        auto it = head_row.find(table.name(id));
        if (it != head_row.end()) head_label[id] = it->second;
    }
    for (std::size_t id : data.labels)
        if (table.split(id) != Split::seen)
            throw std::invalid_argument("train_synthesizer: class '" + table.name(id) + "' in training data is unseen");
    const std::vector<std::size_t> seen_ids = table.ids(Split::seen);

    const LossWeights& w = cfg.weights;
    const bool learn_masks = cfg.mask_mode == MaskMode::learnable && w.lambda1 > 0.0;
    const bool step_branches = w.lambda1 > 0.0 || w.lambda3 > 0.0;
    const bool step_generator = w.lambda2 > 0.0 || w.lambda3 > 0.0;
    const bool step_critic = w.lambda2 > 0.0;
    const bool step_denoiser = w.lambda3 > 0.0;

    const std::size_t n = data.size();
    const std::size_t per_epoch = (n + cfg.batch - 1) / cfg.batch;
    const double total_steps = static_cast<double>(std::max<std::size_t>(1, cfg.epochs * per_epoch));
    std::vector<std::size_t> order(n);

    for (std::size_t ep = 0; ep < epochs; ++ep) {
        const std::size_t epoch_no = static_cast<std::size_t>(st.epoch) + 1;
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[st.rng.index(i)]);
        LossRecord rec;
        rec.epoch = epoch_no;

        for (std::size_t b = 0; b < per_epoch; ++b) {
            if (cfg.cosine_decay) {
                const double progress =
                    std::min(1.0, static_cast<double>(st.epoch * per_epoch + b) / total_steps);
                const double lr = cfg.adam.learning_rate * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
                for (Adam* opt : {&st.opt_branches, &st.opt_masks, &st.opt_generator, &st.opt_critic,
                                  &st.opt_denoiser})
                    opt->set_learning_rate(lr);
            }
            const std::size_t start = b * cfg.batch;
            const std::span<const std::size_t> idx(order.data() + start, std::min(n, start + cfg.batch) - start);
            const std::size_t m = idx.size();
            const Matrix x0 = gather_rows(data.features, idx);
            std::vector<std::size_t> ids, hl;
            for (std::size_t i : idx) {
                ids.push_back(data.labels[i]);
                hl.push_back(head_label[data.labels[i]]);
            }
            const Matrix v = table.gather(ids);

            try {
                if (step_critic) {
                    const ParamList cp = st.critic_params();
                    for (std::size_t k = 0; k < cfg.critic_iters; ++k) {
                        std::vector<std::size_t> cidx(m), cids(m);
                        for (std::size_t r = 0; r < m; ++r) {
                            cidx[r] = st.rng.index(n);
                            cids[r] = data.labels[cidx[r]];
                        }
                        const Matrix real = gather_rows(data.features, cidx);
                        const Matrix cv = table.gather(cids);
                        const Matrix z = sample_gaussian(st.rng, m, cfg.d);
                        const Matrix fake = generate_content(st.generator, z, cv);
                        zero_grads(cp);
                        const WganLosses wl =
                            wgan_losses(st.generator.critic, real, fake, cv, cfg.gp_weight, st.rng, true);
                        check_finite(wl.critic_loss, "critic loss", epoch_no);
                        st.opt_critic.step(cp);
                    }
                }

                const ParamList bp = st.branch_params();
                const ParamList mp = st.mask_params();
                const ParamList gp = st.generator_params();
                const ParamList dp = st.denoiser_params();
                zero_grads(bp);
                zero_grads(mp);
                zero_grads(gp);
                zero_grads(dp);

                BranchAE::Cache ci, cc;
                const Matrix vi = st.branch_i.forward(v, &ci);
                const Matrix vc = cfg.single_branch ? vi : st.branch_c.forward(v, &cc);
                const AngularLoss a1 = angular_loss(vi, st.corpus_i, st.mask_i.targets(ids));
                AngularLoss a2;
                if (!cfg.single_branch) a2 = angular_loss(vc, st.corpus_c, st.mask_c.targets(ids));

                const Matrix z1 = sample_gaussian(st.rng, m, cfg.d);
                const Matrix z2 = sample_gaussian(st.rng, m, cfg.d);
                MlpCache g1, g2;
                const Matrix x1 = generate_content(st.generator, z1, v, &g1);
                const Matrix x2 = generate_content(st.generator, z2, v, &g2);
                const LossWithGrad lw = generator_wasserstein(st.generator.critic, x1, v);
                const LossWithGrad lc = classifier_alignment_loss(st.seen_head, x1, hl);
                const DivergingLoss ls = semantic_diverging_loss(x1, x2, z1, z2);
                const double adv = lw.value + lc.value + ls.value;

                const Condition cond{x1, vi, vc};
                RfddmLoss rf;
                if (step_denoiser)
                    rf = rfddm_loss(x0, cond, st.bank, st.schedule, st.rng, true, cfg.t_sampling);
                else
                    rf.value = rfddm_loss(x0, cond, std::as_const(st.bank), st.schedule, st.rng, cfg.t_sampling);

                double penalty = 0.0;
                if (cfg.mask_mode == MaskMode::learnable && w.lambda1 > 0.0) {
                    penalty += mask_l1(st.mask_i, st.mask_grad_i, seen_ids, w.lambda1 * cfg.mask_l1);
                    if (!cfg.single_branch)
                        penalty += mask_l1(st.mask_c, st.mask_grad_c, seen_ids, w.lambda1 * cfg.mask_l1);
                }
                const double total = w.total(a1.value, a2.value, adv, rf.value) + penalty;
                check_finite(a1.value, "l_ang1", epoch_no);
                check_finite(a2.value, "l_ang2", epoch_no);
                check_finite(adv, "l_adv", epoch_no);
                check_finite(rf.value, "l_r", epoch_no);

                if (step_generator) {
                    Matrix dx1(m, cfg.d), dx2(m, cfg.d);
                    for (std::size_t i = 0; i < dx1.size(); ++i) {
                        dx1.data()[i] = w.lambda2 * (lw.grad.data()[i] + lc.grad.data()[i] + ls.grad_x1.data()[i]);
                        dx2.data()[i] = w.lambda2 * ls.grad_x2.data()[i];
                        if (step_denoiser) dx1.data()[i] += w.lambda3 * rf.grads.x.data()[i];
                    }
                    st.generator.generator.backward(g1, dx1);
                    st.generator.generator.backward(g2, dx2);
                }
                if (step_branches) {
                    Matrix dvi(m, cfg.s), dvc(m, cfg.s);
                    for (std::size_t i = 0; i < dvi.size(); ++i) {
                        dvi.data()[i] = w.lambda1 * a1.grad_reconstructed.data()[i];
                        if (!cfg.single_branch) dvc.data()[i] = w.lambda1 * a2.grad_reconstructed.data()[i];
                        if (step_denoiser) {
                            const double gi = w.lambda3 * rf.grads.v_i.data()[i];
                            const double gc = w.lambda3 * rf.grads.v_c.data()[i];
                            dvi.data()[i] += gi;
                            (cfg.single_branch ? dvi : dvc).data()[i] += gc;
                        }
                    }
                    st.branch_i.backward(ci, dvi);
                    if (!cfg.single_branch) st.branch_c.backward(cc, dvc);
                }
                if (learn_masks) {
                    mask_backward(st.mask_i, st.mask_grad_i, ids, a1.grad_targets, w.lambda1);
                    if (!cfg.single_branch) mask_backward(st.mask_c, st.mask_grad_c, ids, a2.grad_targets, w.lambda1);
                }
                if (step_denoiser) scale_grads(dp, w.lambda3);

                if (step_branches) st.opt_branches.step(bp);
                if (learn_masks) st.opt_masks.step(mp);
                if (step_generator) st.opt_generator.step(gp);
                if (step_denoiser) st.opt_denoiser.step(dp);

                const double wgt = static_cast<double>(m) / static_cast<double>(n);
                rec.ang1 += wgt * a1.value;
                rec.ang2 += wgt * a2.value;
                rec.adv += wgt * adv;
                rec.rec += wgt * rf.value;
                rec.total += wgt * total;
            } catch (const NonFiniteGradient& e) {
                throw TrainingDiverged(epoch_no, e.what());
            }
        }
        st.curve.push_back(rec);
        ++st.epoch;
        log::info("epoch " + std::to_string(rec.epoch) + " l_ang1=" + std::to_string(rec.ang1) +
                  " l_ang2=" + std::to_string(rec.ang2) + " l_adv=" + std::to_string(rec.adv) +
                  " l_r=" + std::to_string(rec.rec) + " l_total=" + std::to_string(rec.total));
    }
}

FeatureBank synthesize_unseen(const SynthesizerState& state, const SemanticTable& table,
                              const std::vector<std::string>& classes, std::size_t per_class) {
    if (per_class == 0) throw std::invalid_argument("synthesize_unseen: per-class count must be >= 1");
    const SynthesizerConfig& cfg = state.config;
    std::vector<std::size_t> ids;
    for (const std::string& name : classes) {
        const auto id = table.find(name);
        if (!id) throw std::invalid_argument("synthesize_unseen: class '" + name + "' missing from semantic table");
        ids.push_back(*id);
    }
    FeatureBank out;
    out.classes = classes;
    out.features = Matrix(classes.size() * per_class, cfg.d);
    RngStream rng = RngStream(cfg.seed).fork(0x5e7d);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const std::vector<std::size_t> rep(per_class, ids[k]);
        const BranchSemantics sem = state_semantics(state, table, rep);
        const Matrix v = table.gather(rep);
        const Matrix z = sample_gaussian(rng, per_class, cfg.d);
        const Condition cond{generate_content(state.generator, z, v), sem.ingredient, sem.cuisine};
        const Matrix x = sample(state.bank, cond, state.schedule, rng);
        if (!x.all_finite()) throw std::runtime_error("synthesize_unseen: non-finite feature for '" + classes[k] + "'");
        std::copy(x.data().begin(), x.data().end(), out.features.row(k * per_class).begin());
        out.labels.insert(out.labels.end(), per_class, k);
    }
    return out;
}

FeatureBank select_features(const FeatureBank& bank, const SamplingConfig& cfg) {
    bank.per_class();
    FeatureBank out;
    out.classes = bank.classes;
    const std::size_t keep = cfg.clusters * cfg.per_cluster;
    out.features = Matrix(bank.classes.size() * keep, bank.features.cols());
    for (std::size_t k = 0; k < bank.classes.size(); ++k) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < bank.labels.size(); ++r)
            if (bank.labels[r] == k) rows.push_back(r);
        SamplingConfig c = cfg;
        c.seed = cfg.seed + k;
        const Selection sel = kmeans_select(gather_rows(bank.features, rows), c);
        if (sel.borrowed)
            log::info("select_features: class '" + bank.classes[k] + "' borrowed " + std::to_string(sel.borrowed) +
                      " rows");
        for (std::size_t i = 0; i < sel.indices.size(); ++i) {
            const auto src = bank.features.row(rows[sel.indices[i]]);
            std::copy(src.begin(), src.end(), out.features.row(k * keep + i).begin());
        }
        out.labels.insert(out.labels.end(), keep, k);
    }
    return out;
}

// ---------------------------------------------------------------------------

double harmonic_mean(double seen, double unseen) {
    if (seen < 0.0 || unseen < 0.0 || std::isnan(seen) || std::isnan(unseen))
        throw std::invalid_argument("harmonic_mean: scores must be >= 0");
    if (seen + unseen == 0.0) return 0.0;
    return 2.0 * seen * unseen / (seen + unseen);
}

ClassifierHead merge_heads(const ClassifierHead& seen, const ClassifierHead& unseen) {
    const std::set<std::string> names(seen.classes.begin(), seen.classes.end());
    for (const std::string& c : unseen.classes)
        if (names.count(c)) throw std::invalid_argument("merge: class '" + c + "' appears in both heads");
    if (seen.class_count() && unseen.class_count() && seen.dim() != unseen.dim())
        throw ShapeError("merge: head dims " + std::to_string(seen.dim()) + " and " + std::to_string(unseen.dim()));
    std::vector<std::string> all = seen.classes;
    all.insert(all.end(), unseen.classes.begin(), unseen.classes.end());
    ClassifierHead out(all, seen.class_count() ? seen.dim() : unseen.dim());
    std::copy(seen.weights.data().begin(), seen.weights.data().end(), out.weights.data().begin());
    std::copy(unseen.weights.data().begin(), unseen.weights.data().end(),
              out.weights.data().begin() + static_cast<std::ptrdiff_t>(seen.weights.size()));
    std::copy(seen.bias.begin(), seen.bias.end(), out.bias.begin());
    std::copy(unseen.bias.begin(), unseen.bias.end(),
              out.bias.begin() + static_cast<std::ptrdiff_t>(seen.bias.size()));
    return out;
}

namespace {

std::vector<std::size_t> rows_in_head(const ClassifierHead& head, const FeatureDataset& data,
                                      const SemanticTable& table) {
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t k = 0; k < head.class_count(); ++k) row[head.classes[k]] = k;
    std::vector<std::size_t> out;
    out.reserve(data.size());
    for (std::size_t id : data.labels) {
        auto it = row.find(table.name(id));
        if (it == row.end())
            throw std::invalid_argument("evaluate: test class '" + table.name(id) + "' is not in the classifier");
        out.push_back(it->second);
    }
    return out;
}

double score(const ClassifierHead& head, const FeatureDataset& data, const SemanticTable& table) {
    if (data.size() == 0 || head.class_count() == 0) return 0.0;
    const std::vector<std::size_t> truth = rows_in_head(head, data, table);
    return accuracy_percent(head.predict(data.features), truth);
}

}  // namespace

double head_accuracy(const ClassifierHead& head, const FeatureDataset& data, const SemanticTable& table) {
    return score(head, data, table);
}

EvalReport merge_and_evaluate(const ClassifierHead& seen_head, const ClassifierHead& unseen_head,
                              const FeatureDataset& seen_test, const FeatureDataset& unseen_test,
                              const SemanticTable& table) {
    const ClassifierHead merged = merge_heads(seen_head, unseen_head);
    EvalReport r;
    r.seen_classes = seen_head.class_count();
    r.unseen_classes = unseen_head.class_count();
    r.zsd = score(unseen_head, unseen_test, table);
    r.gzsd_seen = score(merged, seen_test, table);
    r.gzsd_unseen = unseen_head.class_count() ? score(merged, unseen_test, table) : 0.0;
    r.hm = harmonic_mean(r.gzsd_seen, r.gzsd_unseen);
    return r;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "# scores are per-feature top-1 accuracies in percent over region features, not detection mAP\n"
       << "zsd=" << fmt(zsd) << "\n"
       << "gzsd_seen=" << fmt(gzsd_seen) << "\n"
       << "gzsd_unseen=" << fmt(gzsd_unseen) << "\n"
       << "hm=" << fmt(hm) << "\n"
       << "seen_classes=" << seen_classes << "\n"
       << "unseen_classes=" << unseen_classes << "\n";
    return os.str();
}

std::string EvalReport::csv_header() { return "zsd,gzsd_seen,gzsd_unseen,hm,seen_classes,unseen_classes"; }

std::string EvalReport::to_csv_row() const {
    return fmt(zsd) + "," + fmt(gzsd_seen) + "," + fmt(gzsd_unseen) + "," + fmt(hm) + "," +
           std::to_string(seen_classes) + "," + std::to_string(unseen_classes);
}

}  // namespace seeds
