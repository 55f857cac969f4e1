// SPDX-License-Identifier: Apache-2.0
//
// Experimental grid over (language, layer, checkpoint, modality,
// correctness): one RSA score per cell, plus the report renderers.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsaprobe/embedding_store.hpp"
#include "rsaprobe/geometry.hpp"

namespace rsaprobe {

struct SweepConfig {
  /// Relative paths below resolve against this directory (not fingerprinted).
  std::filesystem::path base_dir;
  std::filesystem::path embedding_root;
  /// Code embedding path relative to embedding_root. Placeholders:
  /// {language} {layer} {checkpoint} {modality} {correctness}; {layer} is
  /// zero-padded to two digits.
  std::string embedding_pattern = "{language}/{checkpoint}/{modality}/{correctness}/layer{layer}.rsae";
  /// NL (ground-truth) embedding set per language.
  std::map<Language, std::filesystem::path> semantic_sets;

  std::vector<int> layers;
  std::vector<Language> languages;
  std::vector<Checkpoint> checkpoints;
  std::vector<Modality> modalities;
  std::vector<Correctness> correctness;

  Metric metric = Metric::kSpearman;
  ConstantPolicy constant_policy = ConstantPolicy::kZeroSimilarity;
  double max_degenerate_fraction = 0.01;
  bool allow_degenerate = false;
  std::optional<std::size_t> max_conditions;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> permutations;

  /// Parses the JSON config and sets base_dir.
  static SweepConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static SweepConfig from_file(const std::filesystem::path& path);

  /// Canonical JSON (sorted, de-duplicated axes); the fingerprint hashes it.
  std::string canonical_json() const;
  /// 16 hex digits of FNV-1a 64 over canonical_json().
  std::string fingerprint() const;

  std::filesystem::path semantic_path(Language language) const;
  std::filesystem::path code_path(Language language, int layer, Checkpoint checkpoint,
                                  Modality modality, Correctness correctness) const;

  /// Throws ValidationError for an empty axis; returns descriptions of
  /// referenced inputs that do not exist (flagged, not fatal).
  std::vector<std::string> validate() const;
};

enum class CellStatus { kOk, kMissingInput, kDegenerate };

std::string_view to_string(CellStatus s);
CellStatus parse_cell_status(std::string_view s);

struct ScoreRecord {
  Language language = Language::kGo;
  int layer = 0;
  Checkpoint checkpoint = Checkpoint::parse("x0");
  Modality modality = Modality::kUnimodalPl;
  Correctness correctness = Correctness::kCorrect;
  std::optional<double> rs;
  std::optional<double> p_analytic;
  std::optional<double> p_permutation;
  std::uint64_t n_conditions = 0;
  CellStatus status = CellStatus::kMissingInput;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

/// Canonical grid order: language, layer, checkpoint, modality, correctness.
bool grid_less(const ScoreRecord& a, const ScoreRecord& b);

struct ScoreTable {
  std::vector<ScoreRecord> records;
  std::string config_fingerprint;
  // Provenance carried by the JSON report (the CSV holds only the fingerprint).
  Metric metric = Metric::kSpearman;
  std::optional<std::size_t> max_conditions;
  std::uint64_t seed = 0;

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

struct SweepOptions {
  std::optional<int> threads;
  /// Previously written table. Its ok records are reused; a fingerprint that
  /// differs from the config's is an error.
  std::optional<ScoreTable> resume;
};

/// Scores every grid cell. Conditions are the ids shared by the language's
/// NL set and every present code set of the same (language, correctness);
/// with max_conditions they are subsampled once per (language, correctness)
/// from the seed, so all layers, checkpoints and modalities see the same
/// conditions. Missing inputs and degenerate data mark the cell, not the job.
/// Throws if no cell could be resolved.
ScoreTable run_sweep(const SweepConfig& config, const SweepOptions& options = {});

/// Seeded subset of at most `max` ids (sorted ascending); all ids when
/// max is unset or not smaller than the input.
std::vector<std::string> subsample_ids(std::vector<std::string> ids, std::optional<std::size_t> max,
                                       std::uint64_t seed, std::uint64_t stream = 0);

/// 100 * (a - b) / |b|; nullopt when b == 0.
std::optional<double> relative_gain(double a, double b);

enum class ReportFormat { kCsv, kJson, kHeatmapSvg, kLinechartSvg, kGainCsv };

ReportFormat parse_report_format(std::string_view s);

enum class GainAxis { kModality, kCorrectness };

struct ReportOptions {
  std::vector<int> line_layers = {1, 4, 8, 12};
  /// kModality: bimodal over unimodal; kCorrectness: correct over incorrect.
  GainAxis gain_axis = GainAxis::kModality;
};

inline constexpr std::string_view kScoreCsvHeader =
    "language,layer,checkpoint,modality,correctness,rs,p_analytic,p_permutation,n_conditions,"
    "status,config_fingerprint";

/// Pure function of the table. Throws ValidationError on an empty table.
std::string render_report(const ScoreTable& table, ReportFormat format,
                          const ReportOptions& options = {});

void emit_report(const ScoreTable& table, ReportFormat format, const std::filesystem::path& out,
                 const ReportOptions& options = {});

/// Reads a table written as csv or json (chosen by extension).
ScoreTable read_score_table(const std::filesystem::path& path);
ScoreTable parse_score_csv(std::string_view text);
ScoreTable parse_score_json(std::string_view text);

}  // namespace rsaprobe
