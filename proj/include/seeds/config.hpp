#pragma once

#include <map>
#include <string>
#include <vector>

#include "seeds/pipeline.hpp"

namespace seeds {

struct RunPaths {
    std::string out = "seeds_out";
    // Inputs; empty means "<out>/<default file name>".
    std::string class_embeddings;
    std::string split;
    std::string ingredient_corpus;
    std::string cuisine_corpus;
    std::string seen_train;
    std::string seen_test;
    std::string unseen_test;
    std::string unseen_train;

    std::string resolve(const std::string& configured, const std::string& file) const;
};

/// Every tunable of a run. Loaded from flat "section.key=value" text.
struct RunConfig {
    BenchmarkSpec bench;
    SynthesizerConfig synth;
    SamplingConfig sampling;
    std::size_t synth_per_class = 500;
    HeadTraining head;
    std::uint64_t seed = 1;
    RunPaths paths;

    /// Propagates run.seed into every stage and runs all stage validators.
    void finalize();

    /// Deterministic key=value dump; paths are omitted when `with_paths` is false.
    std::string to_text(bool with_paths = true) const;
};

/// Applies one assignment; throws std::invalid_argument on unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses config text; errors name the line. `finalize` is not called.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Defaults, then the file (if any), then `overrides` ("key=value"), then
/// SEEDS_SEED from the environment; finally validated.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Flat key → value view of a dump produced by to_text.
std::map<std::string, std::string> parse_pairs(const std::string& text);

}  // namespace seeds
