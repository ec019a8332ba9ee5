#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "seeds/pipeline.hpp"

namespace seeds::io {

/// Malformed input; the message carries "path:line[:field]: what".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what, std::size_t field = 0);
    std::size_t line() const noexcept { return line_; }
    std::size_t field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::size_t field_;
};

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// %.17g, enough to round-trip any double.
std::string format_double(double v);

// Embedding text files: "count dim" header, then "token v1 ... vdim" per line.
struct Embeddings {
    std::vector<std::string> tokens;
    Matrix vectors;
};

Embeddings parse_embeddings(const std::string& text, const std::string& path = "<memory>");
Embeddings load_embeddings(const std::string& path);
std::string format_embeddings(const std::vector<std::string>& tokens, const Matrix& vectors);
void save_embeddings(const std::string& path, const std::vector<std::string>& tokens, const Matrix& vectors);

Corpus load_corpus(const std::string& path, Domain domain);
void save_corpus(const std::string& path, const Corpus& corpus);

/// "class-id seen|unseen" per line; '#' starts a comment.
std::map<std::string, Split> load_split(const std::string& path);
void save_split(const std::string& path, const SemanticTable& table);

/// Class table from an embedding file plus a split file covering every class.
SemanticTable load_semantic_table(const std::string& embeddings_path, const std::string& split_path);
void save_semantic_table(const std::string& embeddings_path, const std::string& split_path,
                         const SemanticTable& table);

// Dataset CSV: header "class,f0,...,f{d-1}", one feature per row.
void save_dataset_csv(const std::string& path, const FeatureDataset& data, const SemanticTable& table);
FeatureDataset load_dataset_csv(const std::string& path, const SemanticTable& table, DatasetSplit split);

// Feature bank binary: "SEEDSFB1", u64 classes, u64 rows per class, u64 d,
// row-major f64 rows, then per class a u64 length and the class-id bytes.
std::string encode_feature_bank(const FeatureBank& bank);
FeatureBank decode_feature_bank(const std::string& bytes, const std::string& path = "<memory>");
void save_feature_bank(const std::string& path, const FeatureBank& bank);
FeatureBank load_feature_bank(const std::string& path);

/// Lossless text export of a bank (same CSV layout as datasets).
std::string format_bank_csv(const FeatureBank& bank);
FeatureBank parse_bank_csv(const std::string& text, const std::string& path = "<memory>");

// Classifier head CSV: "class,bias,w0,...".
void save_head(const std::string& path, const ClassifierHead& head);
ClassifierHead load_head(const std::string& path);

void save_loss_curve(const std::string& path, const std::vector<LossRecord>& curve);

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

constexpr std::uint32_t kCheckpointVersion = 1;

/// One named array of the checkpoint directory.
using Entry = std::variant<std::vector<double>, std::vector<std::uint64_t>, std::vector<std::string>>;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config;  // key=value snapshot, paths excluded
    std::vector<std::pair<std::string, Entry>> entries;

    const Entry* find(const std::string& key) const;
};

/// Layout: magic "SEEDSCP1", u32 version, u64 config length + bytes, u64
/// entry count, then per entry (u64 key length, key, u8 kind, u64 count,
/// u64 offset) followed by the data section. All integers little-endian.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& path = "<memory>");

Checkpoint capture(SynthesizerState& state, const std::string& config_snapshot);
/// Copies every array into `state`; sizes must match exactly.
void restore(const Checkpoint& ckpt, SynthesizerState& state);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace seeds::io
