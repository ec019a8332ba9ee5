#pragma once

#include <iosfwd>
#include <string>

#include "seeds/config.hpp"
#include "seeds/io.hpp"

namespace seeds::cli {

// Artifact file names inside paths.out.
inline constexpr const char* kClassEmbeddings = "classes.emb";
inline constexpr const char* kSplit = "split.txt";
inline constexpr const char* kIngredientCorpus = "ingredients.emb";
inline constexpr const char* kCuisineCorpus = "cuisines.emb";
inline constexpr const char* kSeenTrain = "seen_train.csv";
inline constexpr const char* kSeenTest = "seen_test.csv";
inline constexpr const char* kUnseenTest = "unseen_test.csv";
inline constexpr const char* kUnseenTrain = "unseen_train.csv";
inline constexpr const char* kSeenHead = "seen_head.csv";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kLossCurve = "loss_curve.csv";
inline constexpr const char* kSynthBank = "synth_bank.bin";
inline constexpr const char* kSelectedBank = "selected_bank.bin";
inline constexpr const char* kUnseenHead = "unseen_head.csv";
inline constexpr const char* kOracleHead = "oracle_head.csv";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kFeaturesCsv = "synth_features.csv";

std::string out_path(const RunConfig& cfg, const char* file);

/// Inputs of the training stages, read from the configured paths.
struct Inputs {
    SemanticTable table;
    Corpus ingredients;
    Corpus cuisines;
};
Inputs load_inputs(const RunConfig& cfg);

/// Refuses structural mismatches (naming both values) and warns on other drift.
void check_snapshot(const std::string& snapshot, const RunConfig& cfg);

/// Rebuilds the synthesizer from the configured checkpoint.
SynthesizerState load_state(const RunConfig& cfg, const Inputs& in, const std::string& path);

std::string gen_benchmark_stage(const RunConfig& cfg);
std::string train_stage(const RunConfig& cfg, bool resume);
std::string synthesize_stage(const RunConfig& cfg);
std::string select_stage(const RunConfig& cfg);
std::string train_classifier_stage(const RunConfig& cfg, bool oracle);
std::string eval_stage(const RunConfig& cfg, EvalReport* report = nullptr);
std::string export_stage(const RunConfig& cfg, const std::string& bank, const std::string& csv);

/// Full command-line entry point; returns the process exit status.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace seeds::cli
