#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seeds/classifier.hpp"
#include "seeds/optim.hpp"
#include "seeds/rfddm.hpp"
#include "seeds/s3m.hpp"
#include "seeds/semantic.hpp"

namespace seeds {

// ---------------------------------------------------------------------------
// Synthetic compositional benchmark
// ---------------------------------------------------------------------------

struct BenchmarkSpec {
    std::size_t ingredients = 4;
    std::size_t cuisines = 4;
    // (ingredient id, cuisine id); empty lists mean "diagonal unseen, rest seen".
    std::vector<std::pair<std::size_t, std::size_t>> seen_pairs;
    std::vector<std::pair<std::size_t, std::size_t>> unseen_pairs;
    std::size_t d = 16;
    std::size_t s = 16;
    std::size_t modes_per_class = 3;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    double sigma = 0.3;
    double feature_scale = 1.0;  // std of the pair → mean linear map
    double offset_scale = 0.5;   // std of per-mode offsets
    double semantic_noise = 0.05;
    std::uint64_t seed = 7;

    /// Fills default pair lists and checks the compositional invariants.
    void validate_and_complete();
};

enum class DatasetSplit { seen_train, seen_test, unseen_test, unseen_train };

std::string_view split_name(DatasetSplit s);

/// Region features with class labels; labels are SemanticTable ids.
struct FeatureDataset {
    DatasetSplit split = DatasetSplit::seen_train;
    Matrix features;
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

struct Benchmark {
    BenchmarkSpec spec;
    SemanticTable table;  // names are class-id tokens "cuisine_ingredient"
    std::vector<std::string> display_names;  // "cuisine ingredient", table order
    Corpus ingredients;
    Corpus cuisines;
    FeatureDataset seen_train;
    FeatureDataset seen_test;
    FeatureDataset unseen_test;
    FeatureDataset unseen_train;  // oracle reference only; never used for synthesis
    Matrix class_means;           // table order × d, averaged over modes
};

Benchmark gen_benchmark(BenchmarkSpec spec);

/// Fraction (percent) of `data` rows whose nearest class mean among `classes` is the true one.
double nearest_mean_accuracy(const Matrix& class_means, const FeatureDataset& data,
                             const std::vector<std::size_t>& classes);

// ---------------------------------------------------------------------------
// Classifiers
// ---------------------------------------------------------------------------

/// Softmax head over the classes present in `data`, in ascending table-id order.
ClassifierHead train_seen_classifier(const FeatureDataset& data, const SemanticTable& table,
                                     const HeadTraining& cfg = {});

/// Balanced per-class feature set, rows grouped by class.
struct FeatureBank {
    std::vector<std::string> classes;
    Matrix features;
    std::vector<std::size_t> labels;  // indices into `classes`

    std::size_t per_class() const;  // throws when classes are unbalanced
};

ClassifierHead train_unseen_classifier(const FeatureBank& bank, const HeadTraining& cfg = {});

/// Head trained on real unseen features (upper-bound reference).
ClassifierHead train_oracle_classifier(const FeatureDataset& unseen_train, const SemanticTable& table,
                                       const HeadTraining& cfg = {});

// ---------------------------------------------------------------------------
// Synthesizer
// ---------------------------------------------------------------------------

struct LossWeights {
    double lambda1 = 1.0;  // angular
    double lambda2 = 1.0;  // adversarial
    double lambda3 = 0.1;  // diffusion reconstruction

    void validate() const;
    double total(double ang1, double ang2, double adv, double rec) const {
        return lambda1 * (ang1 + ang2) + lambda2 * adv + lambda3 * rec;
    }
};

struct SynthesizerConfig {
    std::size_t d = 16;
    std::size_t s = 16;
    std::size_t e = 16;
    std::size_t hidden = 32;         // content encoders, generator, critic
    std::size_t branch_hidden = 32;  // branch autoencoders
    std::size_t latent = 0;          // 0 → ⌈s/2⌉

    std::size_t steps = 100;
    double beta_start = 8.5e-4;
    double beta_end = 1.2e-2;
    DenoiserMode denoiser = DenoiserMode::per_timestep;

    LossWeights weights;
    double gp_weight = 10.0;
    AdamConfig adam{1e-4, 1e-5};
    bool cosine_decay = false;  // lr → 5% of base over the run

    std::size_t epochs = 50;
    std::size_t batch = 64;
    std::size_t critic_iters = 5;
    TimestepSampling t_sampling = TimestepSampling::uniform;

    MaskMode mask_mode = MaskMode::fixed_lexical;
    double mask_l1 = 1e-3;
    bool single_branch = false;  // merged corpora, V_C = V_I

    std::uint64_t seed = 1;

    void validate() const;
};

struct LossRecord {
    std::size_t epoch = 0;
    double ang1 = 0.0;
    double ang2 = 0.0;
    double adv = 0.0;
    double rec = 0.0;
    double total = 0.0;
};

/// All trainable state of the synthesizer plus its optimizers and rng.
struct SynthesizerState {
    SynthesizerConfig config;
    NoiseSchedule schedule;

    Corpus corpus_i;  // merged corpus in single-branch mode
    Corpus corpus_c;
    BranchAE branch_i;
    BranchAE branch_c;
    AttentionMask mask_i;  // rows follow SemanticTable ids
    AttentionMask mask_c;
    Matrix mask_grad_i;
    Matrix mask_grad_c;

    ContentGenerator generator;
    DenoiserBank bank;
    ClassifierHead seen_head;  // frozen

    Adam opt_branches;
    Adam opt_masks;
    Adam opt_generator;
    Adam opt_critic;
    Adam opt_denoiser;

    RngStream rng;
    std::uint64_t epoch = 0;
    std::vector<LossRecord> curve;

    ParamList branch_params();
    ParamList mask_params();
    ParamList generator_params();
    ParamList critic_params();
    ParamList denoiser_params();
    /// Every named array: the groups above plus the frozen head.
    ParamList all_params();
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t epoch, const std::string& what)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

/// Builds and initializes the state; `seen_head` is frozen for L_C.
SynthesizerState make_synthesizer(const SynthesizerConfig& cfg, const SemanticTable& table,
                                  const Corpus& ingredients, const Corpus& cuisines, ClassifierHead seen_head);

/// Runs `epochs` more epochs (defaults to the configured count) and appends to the loss curve.
void train_synthesizer(SynthesizerState& state, const FeatureDataset& seen_train, const SemanticTable& table,
                       std::size_t epochs);
inline void train_synthesizer(SynthesizerState& state, const FeatureDataset& seen_train,
                              const SemanticTable& table) {
    train_synthesizer(state, seen_train, table, state.config.epochs);
}

/// V_I, V_C for the given table ids (V_C = V_I in single-branch mode).
BranchSemantics state_semantics(const SynthesizerState& state, const SemanticTable& table,
                                std::span<const std::size_t> ids);

FeatureBank synthesize_unseen(const SynthesizerState& state, const SemanticTable& table,
                              const std::vector<std::string>& classes, std::size_t per_class = 500);

/// Per-class kmeans_select; the result keeps S·P rows per class.
FeatureBank select_features(const FeatureBank& bank, const SamplingConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// 2su/(s+u); 0 when s+u = 0. Negative inputs are rejected.
double harmonic_mean(double seen, double unseen);

/// Seen rows first, then unseen rows, copied verbatim (raw stacking).
ClassifierHead merge_heads(const ClassifierHead& seen, const ClassifierHead& unseen);

struct EvalReport {
    double zsd = 0.0;          // unseen test vs unseen classes only
    double gzsd_seen = 0.0;    // seen test vs all classes
    double gzsd_unseen = 0.0;  // unseen test vs all classes
    double hm = 0.0;
    std::size_t seen_classes = 0;
    std::size_t unseen_classes = 0;

    std::string to_text() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

EvalReport merge_and_evaluate(const ClassifierHead& seen_head, const ClassifierHead& unseen_head,
                              const FeatureDataset& seen_test, const FeatureDataset& unseen_test,
                              const SemanticTable& table);

/// ZSD-style accuracy of a head over its own classes.
double head_accuracy(const ClassifierHead& head, const FeatureDataset& data, const SemanticTable& table);

}  // namespace seeds
