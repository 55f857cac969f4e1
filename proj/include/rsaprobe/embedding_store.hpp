// SPDX-License-Identifier: Apache-2.0
//
// On-disk embedding sets (RSAE1 binary + JSON sidecar, TSV fallback) and
// identity-based alignment of two sets.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rsaprobe {

enum class Modality { kUnimodalPl, kBimodalNlPl, kNlOnly };
enum class Language { kGo, kJava, kJavascript, kPhp, kPython, kRuby, kNone };
enum class Correctness { kCorrect, kIncorrect, kNotApplicable };
enum class Pooling { kFirstToken, kMean };

std::string_view to_string(Modality m);
std::string_view to_string(Language l);
std::string_view to_string(Correctness c);
std::string_view to_string(Pooling p);

// Parsers accept the canonical names printed by to_string ("unimodal-pl",
// "javascript", "n/a", "first-token", ...) and throw ValidationError otherwise.
Modality parse_modality(std::string_view s);
Language parse_language(std::string_view s);
Correctness parse_correctness(std::string_view s);
Pooling parse_pooling(std::string_view s);

/// The six programming languages, in canonical order.
inline constexpr Language kProgrammingLanguages[] = {Language::kGo,     Language::kJava,
                                                     Language::kJavascript, Language::kPhp,
                                                     Language::kPython, Language::kRuby};

/// Fine-tuning checkpoint label x0, x1, x2, ..., x32.
class Checkpoint {
 public:
  /// Throws ValidationError unless `label` is one of x0|x1|x2|x4|x8|x16|x32.
  static Checkpoint parse(std::string_view label);
  static Checkpoint from_multiplier(int k);

  int multiplier() const noexcept { return k_; }
  std::string label() const { return "x" + std::to_string(k_); }

  friend auto operator<=>(const Checkpoint&, const Checkpoint&) = default;

 private:
  explicit Checkpoint(int k) : k_(k) {}
  int k_ = 0;
};

inline constexpr int kDefaultModelDepth = 12;

struct EmbeddingMeta {
  std::string model_id;
  int layer = 0;
  Modality modality = Modality::kUnimodalPl;
  Language language = Language::kNone;
  std::string checkpoint = "x0";
  Correctness correctness = Correctness::kNotApplicable;
  Pooling pooling = Pooling::kFirstToken;

  friend bool operator==(const EmbeddingMeta&, const EmbeddingMeta&) = default;
};

/// Throws ValidationError if layer is outside [0, model_depth] or the
/// checkpoint label is malformed.
void validate(const EmbeddingMeta& meta, int model_depth = kDefaultModelDepth);

/// N pooled sample vectors of dimension d, stored row-major as f32.
/// Immutable after construction; the constructor enforces d >= 1, unique
/// non-empty ids without newlines, and finite values. An empty set is
/// representable but cannot be written or analysed.
class EmbeddingSet {
 public:
  EmbeddingSet(std::vector<std::string> sample_ids, std::size_t dim, std::vector<float> values,
               EmbeddingMeta meta = {});

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& sample_ids() const noexcept { return ids_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  const EmbeddingMeta& meta() const noexcept { return meta_; }

  /// Rows whose ids appear in `ids`, in the order given. Throws
  /// AlignmentError if an id is absent.
  EmbeddingSet select(std::span<const std::string> ids) const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_;
  std::vector<float> values_;
  EmbeddingMeta meta_;
};

/// `<stem>.meta.json` next to the payload file.
std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Writes the RSAE1 payload and its metadata sidecar.
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// Reads an RSAE1 payload. Metadata comes from the sidecar when it exists,
/// defaults otherwise.
EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             int model_depth = kDefaultModelDepth);

/// Reads only the id block of an RSAE1 payload (seeks past the matrix).
std::vector<std::string> read_embedding_ids(const std::filesystem::path& path);

/// Tab-separated fallback: header `id\tv0\t...\tv{d-1}`, one row per sample.
EmbeddingSet read_embeddings_tsv(const std::filesystem::path& path,
                                 int model_depth = kDefaultModelDepth);

/// Dispatches on the first bytes: RSAE1 magic or TSV text.
EmbeddingSet load_embeddings(const std::filesystem::path& path,
                             int model_depth = kDefaultModelDepth);

std::string encode_meta_json(const EmbeddingMeta& meta);
EmbeddingMeta decode_meta_json(std::string_view json);

/// Restricts both sets to their common ids, ordered ascending. Throws
/// AlignmentError when fewer than two ids are shared.
std::pair<EmbeddingSet, EmbeddingSet> align_sets(const EmbeddingSet& a, const EmbeddingSet& b);

}  // namespace rsaprobe
