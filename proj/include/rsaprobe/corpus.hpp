// SPDX-License-Identifier: Apache-2.0
//
// NL-PL pair manifests from a CodeNet-style corpus: problem filtering,
// per-cell submission selection and nested fine-tuning splits.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsaprobe/embedding_store.hpp"

namespace rsaprobe {

enum class Verdict { kAccepted, kRejected };
enum class SplitKind { kTest, kTrain, kValidation };
enum class ProblemPolicy { kTest, kTrain };

std::string_view to_string(Verdict v);
std::string_view to_string(SplitKind s);
Verdict parse_verdict(std::string_view s);
SplitKind parse_split(std::string_view s);
ProblemPolicy parse_policy(std::string_view s);

struct SubmissionRecord {
  std::string problem_id;
  std::string submission_id;
  Language language = Language::kGo;
  Verdict verdict = Verdict::kAccepted;
  std::filesystem::path code_path;

  friend bool operator==(const SubmissionRecord&, const SubmissionRecord&) = default;
};

struct MetadataIngest {
  std::vector<SubmissionRecord> records;
  /// Rows dropped because their language is not one of the six supported.
  std::size_t skipped_rows = 0;
};

/// Reads delimiter-separated metadata exports. `source` is one file or a
/// directory whose *.csv files are read in name order. Columns are located by
/// header name: problem_id, submission_id, language, status, and optionally
/// path. Language names match case-insensitively; status "Accepted" maps to
/// accepted and anything else to rejected. Without a path column the code
/// path is `<problem_id>/<language>/<submission_id>`; relative paths resolve
/// against `code_root` when given. Duplicate (problem, submission) pairs are
/// a ValidationError.
MetadataIngest load_submission_metadata(const std::filesystem::path& source,
                                        const std::filesystem::path& code_root = {},
                                        char delimiter = ',');

/// Problems with >= 1 accepted and >= 1 rejected submission in each of the
/// six languages (test), or >= 1 accepted in each (train). Sorted ascending.
std::vector<std::string> select_problems(std::span<const SubmissionRecord> records,
                                         ProblemPolicy policy);

struct ManifestRow {
  std::string problem_id;
  std::string submission_id;
  Language language = Language::kGo;
  Verdict verdict = Verdict::kAccepted;
  std::filesystem::path description_path;
  std::filesystem::path code_path;
  SplitKind split = SplitKind::kTest;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct PairManifest {
  std::vector<ManifestRow> rows;
  /// Problems skipped for a missing or empty description.
  std::size_t skipped_problems = 0;
};

struct ManifestOptions {
  /// Submissions kept per (problem, language, verdict), lowest ids first.
  std::optional<std::size_t> per_cell_limit = 1;
  /// Split written on every row, except problems listed in `validation`.
  SplitKind split = SplitKind::kTest;
  std::set<std::string> validation;
};

/// One row per kept submission of the given problems, ordered by
/// (problem_id, language, verdict, submission_id). Descriptions are
/// `<descriptions_dir>/<problem_id>.txt`. Throws if the directory is missing
/// or more than half of the problems had to be skipped.
PairManifest build_pair_manifest(std::span<const std::string> problem_ids,
                                 const std::filesystem::path& descriptions_dir,
                                 std::span<const SubmissionRecord> records,
                                 const ManifestOptions& options = {});

/// Seeded choice of `count` validation problems (returned sorted).
std::set<std::string> choose_validation_problems(std::span<const std::string> problem_ids,
                                                 std::size_t count, std::uint64_t seed);

inline constexpr std::string_view kManifestHeader =
    "problem_id,submission_id,language,verdict,description_path,code_path,split";

void write_manifest(const PairManifest& manifest, const std::filesystem::path& path);
PairManifest read_manifest(const std::filesystem::path& path);

/// Nested fine-tuning subsets per language: x_k is the first k*unit ids of one
/// seeded shuffle, unit = floor(count / 32).
class SplitPlan {
 public:
  static constexpr int kMultipliers[] = {1, 2, 4, 8, 16, 32};

  std::uint64_t seed() const noexcept { return seed_; }
  std::vector<Language> languages() const;
  std::size_t unit(Language language) const;

  /// Ids of x_k for one language (empty for x0).
  std::vector<std::string> ids(Checkpoint checkpoint, Language language) const;
  /// Ids of x_k over all languages, language-major.
  std::vector<std::string> ids(Checkpoint checkpoint) const;

  /// {"seed": s, "x1": [...], ..., "x32": [...], "unit": {"go": n, ...}}
  std::string to_json() const;
  static SplitPlan from_json(std::string_view text);

  friend SplitPlan make_ft_splits(std::span<const ManifestRow> train_rows, std::uint64_t seed);
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;

 private:
  std::uint64_t seed_ = 0;
  // Shuffled order truncated to 32 * unit ids.
  std::map<Language, std::vector<std::string>> order_;
};

/// Builds the plan from rows whose split is train. Sample ids are submission
/// ids. Throws ValidationError naming the language when a language present in
/// the rows has fewer than 32 of them.
SplitPlan make_ft_splits(std::span<const ManifestRow> train_rows, std::uint64_t seed);

}  // namespace rsaprobe
