#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seeds/nn.hpp"
#include "seeds/tensor.hpp"

namespace seeds {

enum class Split { seen, unseen };

/// Per-class word-embedding vectors, each class tagged seen or unseen.
class SemanticTable {
public:
    SemanticTable() = default;
    explicit SemanticTable(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return names_.size(); }

    /// Rejects duplicate names and wrong-length vectors.
    std::size_t add(const std::string& name, std::span<const double> vec, Split split);

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws std::out_of_range naming the class when absent.
    std::size_t index_of(std::string_view name) const;

    const std::string& name(std::size_t id) const { return names_.at(id); }
    std::span<const double> vector(std::size_t id) const { return vectors_.row(id); }
    Split split(std::size_t id) const { return splits_.at(id); }
    void set_split(std::size_t id, Split s) { splits_.at(id) = s; }

    std::vector<std::size_t> ids(Split s) const;
    const Matrix& vectors() const noexcept { return vectors_; }
    /// Rows of the requested classes stacked in order.
    Matrix gather(std::span<const std::size_t> ids) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> names_;
    std::vector<Split> splits_;
    Matrix vectors_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Ingredient/cuisine corpora; for general object detection the same two
/// slots hold texture/color and shape/edge words.
enum class Domain { ingredient, cuisine };

Domain parse_domain(std::string_view tag);
std::string_view domain_name(Domain d);

/// Bag of domain words with their embeddings.
struct Corpus {
    Domain domain = Domain::ingredient;
    std::vector<std::string> tokens;
    Matrix vectors;  // a × s

    std::size_t size() const noexcept { return tokens.size(); }
    std::size_t dim() const noexcept { return vectors.cols(); }
    /// Checks non-emptiness, token uniqueness and row count.
    void validate() const;
};

/// Concatenation of two corpora (single-branch ablation).
Corpus merge_corpora(const Corpus& a, const Corpus& b);

/// Case-folds and splits on whitespace and punctuation (underscores included).
std::vector<std::string> tokenize(std::string_view text);

enum class MaskMode { fixed_lexical, learnable };

/// Per-class attention over corpus words, stored as logits.
struct AttentionMask {
    Matrix logits;  // classes × a
    MaskMode mode = MaskMode::fixed_lexical;

    bool active(std::size_t cls, std::size_t word) const { return logits(cls, word) > 0.0; }
    /// BCE targets for the given classes: hard 0/1 in fixed mode, sigmoid(logits) when learnable.
    Matrix targets(std::span<const std::size_t> class_rows) const;
};

struct LexicalMaskReport {
    std::vector<std::size_t> empty_rows;
};

/// M[i][j] = 1 iff the token sequence of corpus word j appears contiguously in
/// the tokens of class name i. Logits are set to ±margin.
AttentionMask lexical_mask_init(const std::vector<std::string>& class_names, const Corpus& corpus,
                                MaskMode mode = MaskMode::fixed_lexical, double margin = 10.0,
                                LexicalMaskReport* report = nullptr);

constexpr double kCosineFloor = 1e-8;
constexpr double kLogClamp = 1e-12;

/// a·b / max(‖a‖‖b‖, floor)
double cosine_similarity(std::span<const double> a, std::span<const double> b, double floor = kCosineFloor);

struct AngularLoss {
    double value = 0.0;
    Matrix grad_reconstructed;  // n × s
    Matrix grad_targets;        // n × a
};

/// Binary cross-entropy between mask targets and sigmoid(cosine(Ṽᵢ, Kⱼ)),
/// averaged over the n × a grid.
AngularLoss angular_loss(const Matrix& reconstructed, const Corpus& corpus, const Matrix& targets,
                         double floor = kCosineFloor);

/// Per-branch autoencoder over class semantic vectors: s → h → latent → h → s.
class BranchAE {
public:
    BranchAE() = default;
    BranchAE(std::size_t s, std::size_t hidden, std::size_t latent);

    std::size_t dim() const { return encoder.in_dim(); }
    std::size_t latent_dim() const { return encoder.out_dim(); }

    void initialize(Init init, RngStream& rng);

    struct Cache {
        MlpCache enc;
        MlpCache dec;
    };
    Matrix forward(const Matrix& v, Cache* cache = nullptr) const;
    Matrix backward(const Cache& cache, const Matrix& grad_out, bool accumulate = true);
    void collect(ParamList& out, const std::string& prefix);

    Mlp encoder;
    Mlp decoder;
};

/// Latent width used when none is configured: ⌈s/2⌉.
inline std::size_t default_latent_dim(std::size_t s) { return (s + 1) / 2; }

/// Single-vector reconstruction Ṽ = DEC(ENC(v)).
std::vector<double> branch_reconstruct(const BranchAE& ae, std::span<const double> v);

struct BranchSemantics {
    Matrix ingredient;  // V_I, n × s
    Matrix cuisine;     // V_C, n × s
};

/// Decoded semantic vectors of both branches for the named classes.
BranchSemantics branch_semantics(const BranchAE& ingredient, const BranchAE& cuisine,
                                 const SemanticTable& table, const std::vector<std::string>& classes);

}  // namespace seeds
