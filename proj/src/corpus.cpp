// SPDX-License-Identifier: Apache-2.0
#include "rsaprobe/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "binary_io.hpp"
#include "rsaprobe/csv.hpp"
#include "rsaprobe/errors.hpp"
#include "rsaprobe/random.hpp"

namespace rsaprobe {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<Language> programming_language(std::string_view name) {
  const auto l = lower(name);
  for (Language lang : kProgrammingLanguages) {
    if (to_string(lang) == l) return lang;
  }
  return std::nullopt;
}

int language_index(Language l) { return static_cast<int>(l); }

bool has_text(const std::filesystem::path& p) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) return false;
  std::ifstream f(p);
  char c;
  while (f.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return true;
  }
  return false;
}

void ingest_file(const std::filesystem::path& file, const std::filesystem::path& code_root,
                 char delimiter, MetadataIngest& out) {
  const auto rows = csv::parse(detail::slurp(file.string()), delimiter);
  if (rows.empty()) return;
  const auto& header = rows.front();
  const int c_problem = csv::column(header, "problem_id");
  const int c_submission = csv::column(header, "submission_id");
  const int c_language = csv::column(header, "language");
  const int c_status = csv::column(header, "status");
  const int c_path = csv::column(header, "path");
  if (c_problem < 0 || c_submission < 0 || c_language < 0 || c_status < 0) {
    throw FormatError("metadata '" + file.string() +
                          "' lacks one of the columns problem_id, submission_id, language, status",
                      0);
  }
  const int needed = std::max({c_problem, c_submission, c_language, c_status, c_path});
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (static_cast<int>(row.size()) <= needed) {
      throw FormatError("metadata '" + file.string() + "' row " + std::to_string(r + 1) +
                            " has too few columns",
                        0);
    }
    auto lang = programming_language(row[c_language]);
    if (!lang) {
      ++out.skipped_rows;
      continue;
    }
    SubmissionRecord rec;
    rec.problem_id = row[c_problem];
    rec.submission_id = row[c_submission];
    rec.language = *lang;
    rec.verdict = row[c_status] == "Accepted" ? Verdict::kAccepted : Verdict::kRejected;
    rec.code_path = c_path >= 0 ? std::filesystem::path(row[c_path])
                                : std::filesystem::path(rec.problem_id) /
                                      std::string(to_string(rec.language)) / rec.submission_id;
    if (!code_root.empty() && rec.code_path.is_relative()) rec.code_path = code_root / rec.code_path;
    out.records.push_back(std::move(rec));
  }
}

}  // namespace

std::string_view to_string(Verdict v) { return v == Verdict::kAccepted ? "accepted" : "rejected"; }

std::string_view to_string(SplitKind s) {
  switch (s) {
    case SplitKind::kTest: return "test";
    case SplitKind::kTrain: return "train";
    case SplitKind::kValidation: return "validation";
  }
  return "?";
}

Verdict parse_verdict(std::string_view s) {
  if (s == "accepted") return Verdict::kAccepted;
  if (s == "rejected") return Verdict::kRejected;
  throw ValidationError("unknown verdict '" + std::string(s) + "'");
}

SplitKind parse_split(std::string_view s) {
  if (s == "test") return SplitKind::kTest;
  if (s == "train") return SplitKind::kTrain;
  if (s == "validation") return SplitKind::kValidation;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

ProblemPolicy parse_policy(std::string_view s) {
  if (s == "test") return ProblemPolicy::kTest;
  if (s == "train") return ProblemPolicy::kTrain;
  throw ValidationError("unknown problem policy '" + std::string(s) + "'");
}

MetadataIngest load_submission_metadata(const std::filesystem::path& source,
                                        const std::filesystem::path& code_root, char delimiter) {
  MetadataIngest out;
  if (std::filesystem::is_directory(source)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(source)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) ingest_file(f, code_root, delimiter, out);
  } else {
    ingest_file(source, code_root, delimiter, out);
  }

  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const auto& r : out.records) {
    if (!seen.emplace(r.problem_id, r.submission_id).second) {
      throw ValidationError("duplicate submission " + r.submission_id + " for problem " +
                            r.problem_id);
    }
  }
  return out;
}

std::vector<std::string> select_problems(std::span<const SubmissionRecord> records,
                                         ProblemPolicy policy) {
  // Per problem: bit (2 * language + verdict) is set when such a submission exists.
  std::map<std::string, std::uint32_t> coverage;
  for (const auto& r : records) {
    const int bit = 2 * language_index(r.language) + (r.verdict == Verdict::kRejected ? 1 : 0);
    coverage[r.problem_id] |= 1u << bit;
  }
  std::uint32_t required = 0;
  for (Language l : kProgrammingLanguages) {
    required |= 1u << (2 * language_index(l));
    if (policy == ProblemPolicy::kTest) required |= 1u << (2 * language_index(l) + 1);
  }
  std::vector<std::string> out;
  for (const auto& [problem, bits] : coverage) {
    if ((bits & required) == required) out.push_back(problem);
  }
  return out;  // std::map iteration is already ascending
}

PairManifest build_pair_manifest(std::span<const std::string> problem_ids,
                                 const std::filesystem::path& descriptions_dir,
                                 std::span<const SubmissionRecord> records,
                                 const ManifestOptions& options) {
  if (!std::filesystem::is_directory(descriptions_dir)) {
    throw Error("descriptions directory '" + descriptions_dir.string() + "' does not exist");
  }
  std::set<std::string> wanted(problem_ids.begin(), problem_ids.end());
  std::map<std::string, std::filesystem::path> descriptions;
  PairManifest manifest;
  for (const auto& p : wanted) {
    auto path = descriptions_dir / (p + ".txt");
    if (has_text(path)) {
      descriptions.emplace(p, std::move(path));
    } else {
      ++manifest.skipped_problems;
    }
  }
  if (!wanted.empty() && 2 * manifest.skipped_problems > wanted.size()) {
    throw Error(std::to_string(manifest.skipped_problems) + " of " +
                std::to_string(wanted.size()) +
                " problems have no usable description; is the descriptions directory right?");
  }

  std::vector<const SubmissionRecord*> kept;
  for (const auto& r : records) {
    if (descriptions.count(r.problem_id)) kept.push_back(&r);
  }
  auto key = [](const SubmissionRecord* r) {
    return std::tie(r->problem_id, r->language, r->verdict, r->submission_id);
  };
  std::sort(kept.begin(), kept.end(), [&](auto* a, auto* b) { return key(a) < key(b); });

  std::size_t in_cell = 0;
  const SubmissionRecord* prev = nullptr;
  for (const auto* r : kept) {
    const bool same_cell = prev && prev->problem_id == r->problem_id &&
                           prev->language == r->language && prev->verdict == r->verdict;
    in_cell = same_cell ? in_cell + 1 : 0;
    prev = r;
    if (options.per_cell_limit && in_cell >= *options.per_cell_limit) continue;
    ManifestRow row;
    row.problem_id = r->problem_id;
    row.submission_id = r->submission_id;
    row.language = r->language;
    row.verdict = r->verdict;
    row.description_path = descriptions.at(r->problem_id);
    row.code_path = r->code_path;
    row.split = options.validation.count(r->problem_id) ? SplitKind::kValidation : options.split;
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

std::set<std::string> choose_validation_problems(std::span<const std::string> problem_ids,
                                                 std::size_t count, std::uint64_t seed) {
  std::vector<std::string> ids(problem_ids.begin(), problem_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (count > ids.size()) {
    throw ValidationError("cannot hold out " + std::to_string(count) + " of " +
                          std::to_string(ids.size()) + " problems");
  }
  SplitMix64 rng(seed);
  seeded_shuffle(std::span<std::string>(ids), rng);
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count)};
}

void write_manifest(const PairManifest& manifest, const std::filesystem::path& path) {
  std::string out(kManifestHeader);
  out.push_back('\n');
  for (const auto& r : manifest.rows) {
    out += csv::join({r.problem_id, r.submission_id, std::string(to_string(r.language)),
                      std::string(to_string(r.verdict)), r.description_path.string(),
                      r.code_path.string(), std::string(to_string(r.split))});
    out.push_back('\n');
  }
  detail::spit(path.string(), out);
}

PairManifest read_manifest(const std::filesystem::path& path) {
  const auto rows = csv::parse(detail::slurp(path.string()));
  if (rows.empty() || csv::join(rows.front()) != kManifestHeader) {
    throw FormatError("manifest header must be '" + std::string(kManifestHeader) + "'", 0);
  }
  PairManifest m;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 7) {
      throw FormatError("manifest row " + std::to_string(i + 1) + " has " +
                            std::to_string(r.size()) + " fields, expected 7",
                        0);
    }
    ManifestRow row;
    row.problem_id = r[0];
    row.submission_id = r[1];
    row.language = parse_language(r[2]);
    row.verdict = parse_verdict(r[3]);
    row.description_path = r[4];
    row.code_path = r[5];
    row.split = parse_split(r[6]);
    m.rows.push_back(std::move(row));
  }
  return m;
}

std::vector<Language> SplitPlan::languages() const {
  std::vector<Language> out;
  for (const auto& [lang, ids] : order_) out.push_back(lang);
  return out;
}

std::size_t SplitPlan::unit(Language language) const {
  auto it = order_.find(language);
  return it == order_.end() ? 0 : it->second.size() / 32;
}

std::vector<std::string> SplitPlan::ids(Checkpoint checkpoint, Language language) const {
  auto it = order_.find(language);
  if (it == order_.end()) return {};
  const std::size_t n = unit(language) * static_cast<std::size_t>(checkpoint.multiplier());
  return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<std::string> SplitPlan::ids(Checkpoint checkpoint) const {
  std::vector<std::string> out;
  for (const auto& [lang, ids] : order_) {
    auto part = this->ids(checkpoint, lang);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::string SplitPlan::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed_;
  for (int k : kMultipliers) {
    j["x" + std::to_string(k)] = ids(Checkpoint::from_multiplier(k));
  }
  nlohmann::ordered_json unit_sizes = nlohmann::ordered_json::object();
  for (const auto& [lang, ids] : order_) unit_sizes[std::string(to_string(lang))] = unit(lang);
  j["unit"] = unit_sizes;
  return j.dump(2) + "\n";
}

SplitPlan SplitPlan::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("split plan is not valid JSON: ") + e.what(), e.byte);
  }
  SplitPlan plan;
  try {
    plan.seed_ = j.at("seed").get<std::uint64_t>();
    const auto all = j.at("x32").get<std::vector<std::string>>();
    std::size_t offset = 0;
    // "unit" keys iterate alphabetically, which is also the canonical language order.
    for (const auto& [name, u] : j.at("unit").items()) {
      const auto lang = parse_language(name);
      const auto len = u.get<std::size_t>() * 32;
      if (offset + len > all.size()) throw ValidationError("split plan x32 shorter than units imply");
      plan.order_[lang] = {all.begin() + static_cast<std::ptrdiff_t>(offset),
                           all.begin() + static_cast<std::ptrdiff_t>(offset + len)};
      offset += len;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("split plan: ") + e.what());
  }
  return plan;
}

SplitPlan make_ft_splits(std::span<const ManifestRow> train_rows, std::uint64_t seed) {
  std::map<Language, std::vector<std::string>> by_language;
  for (const auto& r : train_rows) {
    if (r.split == SplitKind::kTrain) by_language[r.language].push_back(r.submission_id);
  }
  SplitPlan plan;
  plan.seed_ = seed;
  for (auto& [lang, ids] : by_language) {
    if (ids.size() < 32) {
      throw ValidationError("language " + std::string(to_string(lang)) + " has only " +
                            std::to_string(ids.size()) + " training rows, need >= 32");
    }
    std::sort(ids.begin(), ids.end());
    auto rng = SplitMix64::split(seed, static_cast<std::uint64_t>(language_index(lang)));
    seeded_shuffle(std::span<std::string>(ids), rng);
    ids.resize(ids.size() / 32 * 32);
    plan.order_.emplace(lang, std::move(ids));
  }
  return plan;
}

}  // namespace rsaprobe
