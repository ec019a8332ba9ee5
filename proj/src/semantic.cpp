#include "seeds/semantic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "seeds/log.hpp"

namespace seeds {

std::size_t SemanticTable::add(const std::string& name, std::span<const double> vec, Split split) {
    if (vec.size() != dim_)
        throw ShapeError("SemanticTable: vector for '" + name + "' has length " + std::to_string(vec.size()) +
                         ", table dim is " + std::to_string(dim_));
    if (index_.contains(name)) throw std::invalid_argument("SemanticTable: duplicate class '" + name + "'");
    const std::size_t id = names_.size();
    std::vector<double> data = std::move(vectors_.data());
    data.insert(data.end(), vec.begin(), vec.end());
    vectors_ = Matrix(id + 1, dim_, std::move(data));
    names_.push_back(name);
    splits_.push_back(split);
    index_.emplace(name, id);
    return id;
}

std::optional<std::size_t> SemanticTable::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t SemanticTable::index_of(std::string_view name) const {
    auto id = find(name);
    if (!id) throw std::out_of_range("unknown class '" + std::string(name) + "'");
    return *id;
}

std::vector<std::size_t> SemanticTable::ids(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits_.size(); ++i)
        if (splits_[i] == s) out.push_back(i);
    return out;
}

Matrix SemanticTable::gather(std::span<const std::size_t> ids) const {
    for (std::size_t id : ids)
        if (id >= size()) throw std::out_of_range("SemanticTable: class id " + std::to_string(id) + " out of range");
    return gather_rows(vectors_, ids);
}

Domain parse_domain(std::string_view tag) {
    std::string t(tag);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "ingredient" || t == "texture" || t == "color") return Domain::ingredient;
    if (t == "cuisine" || t == "shape" || t == "edge") return Domain::cuisine;
    throw std::invalid_argument("unknown corpus domain '" + std::string(tag) + "'");
}

std::string_view domain_name(Domain d) { return d == Domain::ingredient ? "ingredient" : "cuisine"; }

void Corpus::validate() const {
    if (tokens.empty()) throw std::invalid_argument("corpus is empty");
    if (vectors.rows() != tokens.size())
        throw ShapeError("corpus: " + std::to_string(tokens.size()) + " tokens but " +
                         std::to_string(vectors.rows()) + " vectors");
    std::set<std::string> seen;
    for (const auto& t : tokens)
        if (!seen.insert(t).second) throw std::invalid_argument("corpus: duplicate token '" + t + "'");
}

Corpus merge_corpora(const Corpus& a, const Corpus& b) {
    if (a.dim() != b.dim()) throw ShapeError("merge_corpora: dims differ");
    Corpus out;
    out.domain = a.domain;
    out.tokens = a.tokens;
    out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
    std::vector<double> data = a.vectors.data();
    data.insert(data.end(), b.vectors.data().begin(), b.vectors.data().end());
    out.vectors = Matrix(out.tokens.size(), a.dim(), std::move(data));
    out.validate();
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isspace(c) || std::ispunct(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Matrix AttentionMask::targets(std::span<const std::size_t> class_rows) const {
    Matrix out(class_rows.size(), logits.cols());
    for (std::size_t i = 0; i < class_rows.size(); ++i) {
        if (class_rows[i] >= logits.rows())
            throw std::out_of_range("AttentionMask: no mask row for class " + std::to_string(class_rows[i]));
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            const double l = logits(class_rows[i], j);
            out(i, j) = mode == MaskMode::fixed_lexical ? (l > 0.0 ? 1.0 : 0.0) : sigmoid(l);
        }
    }
    return out;
}

namespace {

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

AttentionMask lexical_mask_init(const std::vector<std::string>& class_names, const Corpus& corpus, MaskMode mode,
                                double margin, LexicalMaskReport* report) {
    AttentionMask mask;
    mask.mode = mode;
    mask.logits = Matrix(class_names.size(), corpus.size(), -margin);
    std::vector<std::vector<std::string>> corpus_tokens;
    corpus_tokens.reserve(corpus.size());
    for (const auto& t : corpus.tokens) corpus_tokens.push_back(tokenize(t));
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        const auto name_tokens = tokenize(class_names[i]);
        bool any = false;
        for (std::size_t j = 0; j < corpus.size(); ++j) {
            if (contains_sequence(name_tokens, corpus_tokens[j])) {
                mask.logits(i, j) = margin;
                any = true;
            }
        }
        if (!any) {
            log::info("lexical mask: class '" + class_names[i] + "' matches no " +
                      std::string(domain_name(corpus.domain)) + " word");
            if (report) report->empty_rows.push_back(i);
        }
    }
    return mask;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b, double floor) {
    if (a.size() != b.size())
        throw ShapeError("cosine_similarity: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (!(floor > 0.0)) throw std::invalid_argument("cosine_similarity: floor must be > 0");
    return dot(a, b) / std::max(l2_norm(a) * l2_norm(b), floor);
}

AngularLoss angular_loss(const Matrix& recon, const Corpus& corpus, const Matrix& targets, double floor) {
    const std::size_t n = recon.rows();
    const std::size_t a = corpus.size();
    if (a == 0) throw std::invalid_argument("angular_loss: empty corpus");
    require_cols(recon, corpus.dim(), "angular_loss reconstructed vectors");
    if (targets.cols() != a || targets.rows() != n)
        throw ShapeError("angular_loss: mask " + targets.shape_string() + " vs batch " + std::to_string(n) +
                         " and corpus width " + std::to_string(a));

    AngularLoss out;
    out.grad_reconstructed = Matrix(n, recon.cols());
    out.grad_targets = Matrix(n, a);
    const double scale = 1.0 / static_cast<double>(n * a);

    std::vector<double> knorm(a);
    for (std::size_t j = 0; j < a; ++j) knorm[j] = l2_norm(corpus.vectors.row(j));

    for (std::size_t i = 0; i < n; ++i) {
        auto v = recon.row(i);
        const double vn = l2_norm(v);
        auto gv = out.grad_reconstructed.row(i);
        for (std::size_t j = 0; j < a; ++j) {
            auto k = corpus.vectors.row(j);
            const double denom_raw = vn * knorm[j];
            const bool clamped = denom_raw < floor;
            const double denom = clamped ? floor : denom_raw;
            const double cos = dot(v, k) / denom;
            const double s = sigmoid(cos);
            const double m = targets(i, j);
            const double ls = std::log(std::max(s, kLogClamp));
            const double l1s = std::log(std::max(1.0 - s, kLogClamp));
            out.value -= scale * (m * ls + (1.0 - m) * l1s);
            out.grad_targets(i, j) = -scale * (ls - l1s);

            // ∂loss/∂s, respecting the clamps, then through the sigmoid.
            const double dls = s > kLogClamp ? 1.0 / s : 0.0;
            const double dl1s = 1.0 - s > kLogClamp ? -1.0 / (1.0 - s) : 0.0;
            const double dcos = -scale * (m * dls + (1.0 - m) * dl1s) * s * (1.0 - s);
            if (dcos == 0.0) continue;
            for (std::size_t c = 0; c < v.size(); ++c) {
                double g = k[c] / denom;
                if (!clamped) g -= cos * v[c] / (vn * vn);
                gv[c] += dcos * g;
            }
        }
    }
    return out;
}

BranchAE::BranchAE(std::size_t s, std::size_t hidden, std::size_t latent)
    : encoder({s, hidden, latent}, Activation::leaky(), Activation::leaky()),
      decoder({latent, hidden, s}, Activation::leaky(), Activation::identity()) {}

void BranchAE::initialize(Init init, RngStream& rng) {
    encoder.initialize(init, rng);
    decoder.initialize(init, rng);
}

Matrix BranchAE::forward(const Matrix& v, Cache* cache) const {
    require_cols(v, dim(), "branch autoencoder input");
    return decoder.forward(encoder.forward(v, cache ? &cache->enc : nullptr), cache ? &cache->dec : nullptr);
}

Matrix BranchAE::backward(const Cache& cache, const Matrix& grad_out, bool accumulate) {
    return encoder.backward(cache.enc, decoder.backward(cache.dec, grad_out, accumulate), accumulate);
}

void BranchAE::collect(ParamList& out, const std::string& prefix) {
    encoder.collect(out, prefix + ".enc");
    decoder.collect(out, prefix + ".dec");
}

std::vector<double> branch_reconstruct(const BranchAE& ae, std::span<const double> v) {
    if (v.size() != ae.dim())
        throw ShapeError("branch_reconstruct: vector length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(ae.dim()));
    Matrix in(1, v.size(), std::vector<double>(v.begin(), v.end()));
    return ae.forward(in).data();
}

BranchSemantics branch_semantics(const BranchAE& ingredient, const BranchAE& cuisine, const SemanticTable& table,
                                 const std::vector<std::string>& classes) {
    std::vector<std::size_t> ids;
    ids.reserve(classes.size());
    for (const auto& c : classes) ids.push_back(table.index_of(c));
    const Matrix v = table.gather(ids);
    return {ingredient.forward(v), cuisine.forward(v)};
}

}  // namespace seeds
