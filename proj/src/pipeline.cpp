// SPDX-License-Identifier: Apache-2.0
#include "rsaprobe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <set>
#include <tuple>

#include <json.hpp>

#include "binary_io.hpp"
#include "rsaprobe/errors.hpp"
#include "rsaprobe/random.hpp"
#include "rsaprobe/rsa_stats.hpp"

namespace rsaprobe {
namespace {

using Json = nlohmann::ordered_json;

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

auto grid_key(const ScoreRecord& r) {
  return std::make_tuple(r.language, r.layer, r.checkpoint, r.modality, r.correctness);
}

}  // namespace

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::kOk: return "ok";
    case CellStatus::kMissingInput: return "missing-input";
    case CellStatus::kDegenerate: return "degenerate";
  }
  return "?";
}

CellStatus parse_cell_status(std::string_view s) {
  if (s == "ok") return CellStatus::kOk;
  if (s == "missing-input") return CellStatus::kMissingInput;
  if (s == "degenerate") return CellStatus::kDegenerate;
  throw ValidationError("unknown cell status '" + std::string(s) + "'");
}

bool grid_less(const ScoreRecord& a, const ScoreRecord& b) { return grid_key(a) < grid_key(b); }

SweepConfig SweepConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("sweep config is not valid JSON: ") + e.what(), e.byte);
  }
  SweepConfig c;
  c.base_dir = base_dir;
  try {
    c.embedding_root = j.at("embedding_root").get<std::string>();
    if (j.contains("embedding_pattern")) c.embedding_pattern = j["embedding_pattern"].get<std::string>();
    for (const auto& [lang, path] : j.at("semantic_sets").items()) {
      c.semantic_sets[parse_language(lang)] = path.get<std::string>();
    }
    c.layers = j.at("layers").get<std::vector<int>>();
    for (const auto& s : j.at("languages")) c.languages.push_back(parse_language(s.get<std::string>()));
    for (const auto& s : j.at("checkpoints")) c.checkpoints.push_back(Checkpoint::parse(s.get<std::string>()));
    for (const auto& s : j.at("modalities")) c.modalities.push_back(parse_modality(s.get<std::string>()));
    for (const auto& s : j.at("correctness")) {
      c.correctness.push_back(parse_correctness(s.get<std::string>()));
    }
    if (j.contains("metric")) c.metric = parse_metric(j["metric"].get<std::string>());
    if (j.contains("constant_policy")) {
      c.constant_policy = parse_constant_policy(j["constant_policy"].get<std::string>());
    }
    if (j.contains("max_degenerate_fraction")) {
      c.max_degenerate_fraction = j["max_degenerate_fraction"].get<double>();
    }
    if (j.contains("allow_degenerate")) c.allow_degenerate = j["allow_degenerate"].get<bool>();
    if (j.contains("max_conditions") && !j["max_conditions"].is_null()) {
      c.max_conditions = j["max_conditions"].get<std::size_t>();
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("permutations") && !j["permutations"].is_null()) {
      c.permutations = j["permutations"].get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sweep config: ") + e.what());
  }
  sort_unique(c.layers);
  sort_unique(c.languages);
  sort_unique(c.checkpoints);
  sort_unique(c.modalities);
  sort_unique(c.correctness);
  return c;
}

SweepConfig SweepConfig::from_file(const std::filesystem::path& path) {
  return from_json(detail::slurp(path.string()), path.parent_path());
}

std::string SweepConfig::canonical_json() const {
  Json j;
  j["embedding_root"] = embedding_root.generic_string();
  j["embedding_pattern"] = embedding_pattern;
  Json sem = Json::object();
  for (const auto& [lang, path] : semantic_sets) sem[std::string(to_string(lang))] = path.generic_string();
  j["semantic_sets"] = sem;
  auto layers_sorted = layers;
  sort_unique(layers_sorted);
  j["layers"] = layers_sorted;
  auto names = [](auto values) {
    sort_unique(values);
    Json arr = Json::array();
    for (auto v : values) arr.push_back(std::string(to_string(v)));
    return arr;
  };
  j["languages"] = names(languages);
  auto cps = checkpoints;
  sort_unique(cps);
  Json cp = Json::array();
  for (auto c : cps) cp.push_back(c.label());
  j["checkpoints"] = cp;
  j["modalities"] = names(modalities);
  j["correctness"] = names(correctness);
  j["metric"] = to_string(metric);
  j["constant_policy"] = to_string(constant_policy);
  j["max_degenerate_fraction"] = max_degenerate_fraction;
  j["allow_degenerate"] = allow_degenerate;
  j["max_conditions"] = max_conditions ? Json(*max_conditions) : Json(nullptr);
  j["seed"] = seed;
  j["permutations"] = permutations ? Json(*permutations) : Json(nullptr);
  return j.dump();
}

std::string SweepConfig::fingerprint() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : canonical_json()) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path SweepConfig::semantic_path(Language language) const {
  auto it = semantic_sets.find(language);
  return it == semantic_sets.end() ? std::filesystem::path{} : resolve(base_dir, it->second);
}

std::filesystem::path SweepConfig::code_path(Language language, int layer, Checkpoint checkpoint,
                                             Modality modality, Correctness correctness_) const {
  char layer_buf[16];
  std::snprintf(layer_buf, sizeof layer_buf, "%02d", layer);
  std::string rel = embedding_pattern;
  rel = replace_all(rel, "{language}", to_string(language));
  rel = replace_all(rel, "{layer}", layer_buf);
  rel = replace_all(rel, "{checkpoint}", checkpoint.label());
  rel = replace_all(rel, "{modality}", to_string(modality));
  // "n/a" would introduce a directory level.
  rel = replace_all(rel, "{correctness}",
                    correctness_ == Correctness::kNotApplicable ? "na" : to_string(correctness_));
  return resolve(base_dir, embedding_root) / rel;
}

std::vector<std::string> SweepConfig::validate() const {
  if (layers.empty() || languages.empty() || checkpoints.empty() || modalities.empty() ||
      correctness.empty()) {
    throw ValidationError("sweep config has an empty axis");
  }
  std::vector<std::string> missing;
  const auto root = resolve(base_dir, embedding_root);
  if (!std::filesystem::is_directory(root)) missing.push_back("embedding_root " + root.string());
  for (Language l : languages) {
    const auto p = semantic_path(l);
    if (p.empty()) {
      missing.push_back("no semantic set configured for " + std::string(to_string(l)));
    } else if (!std::filesystem::exists(p)) {
      missing.push_back("semantic set " + p.string());
    }
  }
  return missing;
}

std::vector<std::string> subsample_ids(std::vector<std::string> ids, std::optional<std::size_t> max,
                                       std::uint64_t seed, std::uint64_t stream) {
  std::sort(ids.begin(), ids.end());
  if (max && *max < ids.size()) {
    auto rng = SplitMix64::split(seed, stream);
    seeded_shuffle(std::span<std::string>(ids), rng);
    ids.resize(*max);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

std::optional<double> relative_gain(double a, double b) {
  if (b == 0.0) return std::nullopt;
  return 100.0 * (a - b) / std::fabs(b);
}

ScoreTable run_sweep(const SweepConfig& config, const SweepOptions& options) {
  config.validate();
  const std::string fingerprint = config.fingerprint();
  if (options.resume && options.resume->config_fingerprint != fingerprint) {
    throw ValidationError("cannot resume: table was produced by config " +
                          options.resume->config_fingerprint + ", current config is " +
                          fingerprint);
  }

  GeometryOptions gopts;
  gopts.metric = config.metric;
  gopts.constant_policy = config.constant_policy;
  gopts.max_degenerate_fraction = config.max_degenerate_fraction;
  gopts.allow_degenerate = config.allow_degenerate;
  gopts.threads = options.threads;
  RsaOptions ropts;
  ropts.threads = options.threads;

  ScoreTable table;
  table.config_fingerprint = fingerprint;
  table.metric = config.metric;
  table.max_conditions = config.max_conditions;
  table.seed = config.seed;

  auto reusable = [&](const ScoreRecord& key) -> const ScoreRecord* {
    if (!options.resume) return nullptr;
    for (const auto& r : options.resume->records) {
      if (r.status == CellStatus::kOk && grid_key(r) == grid_key(key)) return &r;
    }
    return nullptr;
  };

  std::size_t resolved = 0;
  for (Language language : config.languages) {
    for (Correctness correctness : config.correctness) {
      // Group: every cell sharing this (language, correctness).
      struct Cell {
        ScoreRecord record;
        std::filesystem::path path;
        bool present;
      };
      std::vector<Cell> cells;
      for (int layer : config.layers) {
        for (Checkpoint cp : config.checkpoints) {
          for (Modality modality : config.modalities) {
            Cell c;
            c.record.language = language;
            c.record.layer = layer;
            c.record.checkpoint = cp;
            c.record.modality = modality;
            c.record.correctness = correctness;
            c.path = config.code_path(language, layer, cp, modality, correctness);
            c.present = std::filesystem::exists(c.path);
            cells.push_back(std::move(c));
          }
        }
      }

      const auto nl_path = config.semantic_path(language);
      const bool have_nl = !nl_path.empty() && std::filesystem::exists(nl_path);
      const bool any_code = std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.present; });

      std::vector<std::string> conditions;
      std::optional<Geometry> nl_geometry;
      bool group_degenerate = false;
      if (have_nl && any_code) {
        const auto nl_set = load_embeddings(nl_path);
        std::vector<std::string> shared = nl_set.sample_ids();
        std::sort(shared.begin(), shared.end());
        for (const auto& c : cells) {
          if (!c.present) continue;
          auto ids = read_embedding_ids(c.path);
          std::sort(ids.begin(), ids.end());
          std::vector<std::string> next;
          std::set_intersection(shared.begin(), shared.end(), ids.begin(), ids.end(),
                                std::back_inserter(next));
          shared.swap(next);
        }
        const std::uint64_t stream = static_cast<std::uint64_t>(language) * 8 +
                                     static_cast<std::uint64_t>(correctness);
        conditions = subsample_ids(std::move(shared), config.max_conditions, config.seed, stream);
        if (conditions.size() < 4) {
          group_degenerate = true;
        } else {
          try {
            nl_geometry = compute_geometry(nl_set.select(conditions), gopts);
          } catch (const DegenerateError&) {
            group_degenerate = true;
          }
        }
      }

      for (auto& c : cells) {
        ScoreRecord& rec = c.record;
        if (!c.present || !have_nl) {
          rec.status = CellStatus::kMissingInput;
          table.records.push_back(rec);
          continue;
        }
        ++resolved;
        if (const ScoreRecord* prior = reusable(rec)) {
          table.records.push_back(*prior);
          continue;
        }
        rec.n_conditions = conditions.size();
        if (group_degenerate) {
          rec.status = CellStatus::kDegenerate;
          table.records.push_back(rec);
          continue;
        }
        try {
          const auto code = load_embeddings(c.path).select(conditions);
          const auto g = compute_geometry(code, gopts);
          const auto result = config.permutations
                                  ? rsa_with_permutations(g, *nl_geometry, *config.permutations,
                                                          config.seed, ropts)
                                  : rsa_score(g, *nl_geometry, ropts);
          rec.rs = result.score;
          rec.p_analytic = result.p_analytic;
          rec.p_permutation = result.p_permutation;
          rec.status = CellStatus::kOk;
        } catch (const DegenerateError&) {
          rec.status = CellStatus::kDegenerate;
        }
        table.records.push_back(rec);
      }
    }
  }
  if (resolved == 0) throw Error("no grid cell has both its code and semantic inputs present");
  std::sort(table.records.begin(), table.records.end(), grid_less);
  return table;
}

}  // namespace rsaprobe
