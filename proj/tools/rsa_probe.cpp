// SPDX-License-Identifier: Apache-2.0
//
// rsa-probe: command-line front end for corpus preparation, geometries,
// RSA scoring, grid sweeps and reports.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsaprobe/corpus.hpp"
#include "rsaprobe/embedding_store.hpp"
#include "rsaprobe/errors.hpp"
#include "rsaprobe/geometry.hpp"
#include "rsaprobe/pipeline.hpp"
#include "rsaprobe/rsa_stats.hpp"

namespace {

using namespace rsaprobe;
namespace fs = std::filesystem;

const CLI::IsMember kMetrics({"spearman", "pearson", "cosine"});
const CLI::IsMember kPolicies({"zero-similarity", "zero", "fail"});

struct Common {
  std::string metric = "spearman";
  std::string constant_policy = "zero-similarity";
  bool allow_degenerate = false;
  std::optional<std::size_t> max_conditions;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> permutations;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c, bool with_permutations) {
  cmd->add_option("--metric", c.metric, "spearman | pearson | cosine")
      ->capture_default_str()
      ->check(kMetrics);
  cmd->add_option("--constant-policy", c.constant_policy, "zero-similarity | fail")
      ->capture_default_str()
      ->check(kPolicies);
  cmd->add_flag("--allow-degenerate", c.allow_degenerate,
                "Do not fail when >1% of pairs involve constant vectors");
  cmd->add_option("--max-conditions", c.max_conditions, "Seeded subsample of the condition set");
  cmd->add_option("--seed", c.seed, "Seed for subsampling and permutations")->capture_default_str();
  if (with_permutations) {
    cmd->add_option("--permutations", c.permutations, "Run a permutation test with this many draws");
  }
  cmd->add_option("--threads", c.threads, "Worker threads (overrides RSAPROBE_THREADS; 0 = all)");
}

GeometryOptions geometry_options(const Common& c) {
  GeometryOptions o;
  o.metric = parse_metric(c.metric);
  o.constant_policy = parse_constant_policy(c.constant_policy);
  o.allow_degenerate = c.allow_degenerate;
  o.threads = c.threads;
  return o;
}

void write_text(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + out + "' for writing");
  f << text;
}

bool is_geometry_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  char magic[5] = {};
  f.read(magic, 5);
  return f.gcount() == 5 && std::string(magic, 5) == "RSAG1";
}

EmbeddingSet subsampled(const EmbeddingSet& set, const Common& c) {
  if (!c.max_conditions) return set;
  return set.select(subsample_ids(set.sample_ids(), c.max_conditions, c.seed));
}

// --- prep -------------------------------------------------------------------

struct PrepArgs {
  std::string metadata, code_root, descriptions, problems_file, manifest, out;
  std::string policy = "test";
  std::string split = "test";
  char delimiter = ',';
  std::size_t per_cell_limit = 1;
  std::size_t validation_count = 0;
  std::uint64_t seed = 0;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

int run_prep_select(const PrepArgs& a) {
  const auto ingest = load_submission_metadata(a.metadata, a.code_root, a.delimiter);
  const auto problems = select_problems(ingest.records, parse_policy(a.policy));
  std::string text;
  for (const auto& p : problems) text += p + "\n";
  write_text(a.out, text);
  std::cerr << problems.size() << " problems meet the " << a.policy << " policy ("
            << ingest.records.size() << " submissions, " << ingest.skipped_rows
            << " rows in other languages skipped)\n";
  return 0;
}

int run_prep_manifest(const PrepArgs& a) {
  const auto ingest = load_submission_metadata(a.metadata, a.code_root, a.delimiter);
  const auto problems = a.problems_file.empty()
                            ? select_problems(ingest.records, parse_policy(a.policy))
                            : read_lines(a.problems_file);
  ManifestOptions o;
  if (a.per_cell_limit == 0) o.per_cell_limit.reset();
  else o.per_cell_limit = a.per_cell_limit;
  o.split = parse_split(a.split);
  if (a.validation_count) o.validation = choose_validation_problems(problems, a.validation_count, a.seed);
  const auto manifest = build_pair_manifest(problems, a.descriptions, ingest.records, o);
  if (manifest.skipped_problems) {
    std::cerr << "warning: " << manifest.skipped_problems
              << " problems skipped for missing or empty descriptions\n";
  }
  write_manifest(manifest, a.out);
  std::cerr << manifest.rows.size() << " manifest rows written to " << a.out << "\n";
  return 0;
}

int run_prep_splits(const PrepArgs& a) {
  const auto manifest = read_manifest(a.manifest);
  const auto plan = make_ft_splits(manifest.rows, a.seed);
  write_text(a.out, plan.to_json());
  return 0;
}

// --- geometry / score ---------------------------------------------------------

int run_geometry(const std::string& input, const std::string& out, const Common& c) {
  const auto set = subsampled(load_embeddings(input), c);
  const auto g = compute_geometry(set, geometry_options(c));
  if (!out.empty()) write_geometry(g, out);
  nlohmann::ordered_json j;
  j["n_conditions"] = g.size();
  j["n_cells"] = g.cells().size();
  j["metric"] = to_string(g.metric());
  j["degenerate_pairs"] = g.degenerate_pairs();
  j["max_conditions"] = c.max_conditions ? nlohmann::ordered_json(*c.max_conditions) : nullptr;
  j["seed"] = c.seed;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_score(const std::string& code, const std::string& semantic, const std::string& out,
              const Common& c) {
  std::optional<Geometry> gc, gs;
  const bool code_geom = is_geometry_file(code);
  const bool sem_geom = is_geometry_file(semantic);
  if (code_geom != sem_geom) {
    throw UsageError("--code and --semantic must both be embedding sets or both geometries");
  }
  if (code_geom) {
    gc = read_geometry(code);
    gs = read_geometry(semantic);
  } else {
    auto [a, b] = align_sets(load_embeddings(code), load_embeddings(semantic));
    const auto ids = subsample_ids(a.sample_ids(), c.max_conditions, c.seed);
    const auto opts = geometry_options(c);
    gc = compute_geometry(a.select(ids), opts);
    gs = compute_geometry(b.select(ids), opts);
  }
  RsaOptions ro;
  ro.threads = c.threads;
  const auto result = c.permutations ? rsa_with_permutations(*gc, *gs, *c.permutations, c.seed, ro)
                                     : rsa_score(*gc, *gs, ro);
  write_text(out, to_json(result) + "\n");
  return 0;
}

// --- sweep / report ---------------------------------------------------------

struct SweepArgs {
  std::string config, out = "scores.csv", json_out;
  bool resume = false;
  std::optional<std::string> metric, constant_policy;
  std::optional<std::size_t> max_conditions;
  std::optional<std::uint64_t> seed, permutations;
  std::optional<int> threads;
};

int run_sweep_cmd(const SweepArgs& a) {
  auto cfg = SweepConfig::from_file(a.config);
  if (a.metric) cfg.metric = parse_metric(*a.metric);
  if (a.constant_policy) cfg.constant_policy = parse_constant_policy(*a.constant_policy);
  if (a.max_conditions) cfg.max_conditions = a.max_conditions;
  if (a.seed) cfg.seed = *a.seed;
  if (a.permutations) cfg.permutations = a.permutations;
  for (const auto& m : cfg.validate()) std::cerr << "warning: missing " << m << "\n";

  SweepOptions o;
  o.threads = a.threads;
  if (a.resume && fs::exists(a.out)) o.resume = read_score_table(a.out);
  const auto table = run_sweep(cfg, o);
  emit_report(table, ReportFormat::kCsv, a.out);
  if (!a.json_out.empty()) emit_report(table, ReportFormat::kJson, a.json_out);

  std::size_t ok = 0, missing = 0, degenerate = 0;
  for (const auto& r : table.records) {
    ok += r.status == CellStatus::kOk;
    missing += r.status == CellStatus::kMissingInput;
    degenerate += r.status == CellStatus::kDegenerate;
  }
  std::cerr << table.records.size() << " cells: " << ok << " ok, " << missing << " missing-input, "
            << degenerate << " degenerate (config " << table.config_fingerprint << ")\n";
  return 0;
}

int run_report(const std::string& table_path, const std::string& format, const std::string& out,
               const std::vector<int>& layers, const std::string& gain_axis) {
  const auto table = read_score_table(table_path);
  ReportOptions o;
  if (!layers.empty()) o.line_layers = layers;
  if (gain_axis == "modality") o.gain_axis = GainAxis::kModality;
  else if (gain_axis == "correctness") o.gain_axis = GainAxis::kCorrectness;
  else throw UsageError("--gain-axis must be modality or correctness");
  write_text(out, render_report(table, parse_report_format(format), o));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rsa-probe: representational similarity analysis of code-model embeddings"};
  app.require_subcommand(1);

  // prep
  PrepArgs prep;
  auto* prep_cmd = app.add_subcommand("prep", "Corpus operations: problem filters, manifests, splits");
  prep_cmd->require_subcommand(1);
  auto* select_cmd = prep_cmd->add_subcommand("select", "List problems meeting a coverage policy");
  auto* manifest_cmd = prep_cmd->add_subcommand("manifest", "Build an NL-PL pair manifest CSV");
  auto* splits_cmd = prep_cmd->add_subcommand("splits", "Nested x1..x32 fine-tuning splits");
  for (auto* cmd : {select_cmd, manifest_cmd}) {
    cmd->add_option("--metadata", prep.metadata, "Metadata CSV file or directory of CSVs")->required();
    cmd->add_option("--code-root", prep.code_root, "Base directory for relative code paths");
    cmd->add_option("--delimiter", prep.delimiter, "Metadata field delimiter");
    cmd->add_option("--policy", prep.policy, "test | train")
        ->capture_default_str()
        ->check(CLI::IsMember({"test", "train"}));
  }
  select_cmd->add_option("--out", prep.out, "Output file (stdout when omitted)");
  manifest_cmd->add_option("--descriptions", prep.descriptions, "Directory of <problem_id>.txt")
      ->required();
  manifest_cmd->add_option("--problems", prep.problems_file,
                           "Problem id list (one per line); defaults to --policy selection");
  manifest_cmd->add_option("--per-cell-limit", prep.per_cell_limit,
                           "Submissions per (problem, language, verdict); 0 = unlimited")
      ->capture_default_str();
  manifest_cmd->add_option("--split", prep.split, "test | train | validation")
      ->capture_default_str()
      ->check(CLI::IsMember({"test", "train", "validation"}));
  manifest_cmd->add_option("--validation-count", prep.validation_count,
                           "Hold out this many problems as validation");
  manifest_cmd->add_option("--seed", prep.seed, "Seed for the validation hold-out");
  manifest_cmd->add_option("--out", prep.out, "Manifest CSV")->required();
  splits_cmd->add_option("--manifest", prep.manifest, "Training manifest CSV")->required();
  splits_cmd->add_option("--seed", prep.seed, "Shuffle seed")->capture_default_str();
  splits_cmd->add_option("--out", prep.out, "SplitPlan JSON (stdout when omitted)");

  // geometry
  Common geo_common;
  std::string geo_input, geo_out;
  auto* geo_cmd = app.add_subcommand("geometry", "Compute one representational geometry (RSAG1)");
  geo_cmd->add_option("--input", geo_input, "Embedding set (RSAE1 or TSV)")->required();
  geo_cmd->add_option("--out", geo_out, "RSAG1 output path");
  add_common(geo_cmd, geo_common, false);

  // score
  Common score_common;
  std::string score_code, score_sem, score_out;
  auto* score_cmd = app.add_subcommand("score", "RSA score between two inputs, as JSON");
  score_cmd->add_option("--code", score_code, "Code embeddings or geometry")->required();
  score_cmd->add_option("--semantic", score_sem, "Semantic embeddings or geometry")->required();
  score_cmd->add_option("--out", score_out, "Result JSON (stdout when omitted)");
  add_common(score_cmd, score_common, true);

  // sweep
  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Score the whole experimental grid");
  sweep_cmd->add_option("--config", sweep.config, "Sweep config (JSON)")->required();
  sweep_cmd->add_option("--out", sweep.out, "Score table CSV")->capture_default_str();
  sweep_cmd->add_option("--json", sweep.json_out, "Also write the table as JSON");
  sweep_cmd->add_flag("--resume", sweep.resume, "Reuse ok cells from an existing --out table");
  sweep_cmd->add_option("--metric", sweep.metric, "Override the config metric")->check(kMetrics);
  sweep_cmd->add_option("--constant-policy", sweep.constant_policy, "Override the constant policy")
      ->check(kPolicies);
  sweep_cmd->add_option("--max-conditions", sweep.max_conditions, "Override max_conditions");
  sweep_cmd->add_option("--seed", sweep.seed, "Override the seed");
  sweep_cmd->add_option("--permutations", sweep.permutations, "Override permutations");
  sweep_cmd->add_option("--threads", sweep.threads, "Worker threads (overrides RSAPROBE_THREADS)");

  // report
  std::string rep_table, rep_format = "csv", rep_out, rep_gain_axis = "modality";
  std::vector<int> rep_layers;
  auto* report_cmd = app.add_subcommand("report", "Render a score table");
  report_cmd->add_option("--table", rep_table, "Score table (.csv or .json)")->required();
  report_cmd->add_option("--format", rep_format, "csv | json | heatmap-svg | linechart-svg | gain-csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json", "heatmap-svg", "linechart-svg", "gain-csv"}));
  report_cmd->add_option("--out", rep_out, "Output file (stdout when omitted)");
  report_cmd->add_option("--layers", rep_layers, "Line-chart layers (default 1 4 8 12)")->delimiter(',');
  report_cmd->add_option("--gain-axis", rep_gain_axis, "modality | correctness")
      ->capture_default_str()
      ->check(CLI::IsMember({"modality", "correctness"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*select_cmd) return run_prep_select(prep);
    if (*manifest_cmd) return run_prep_manifest(prep);
    if (*splits_cmd) return run_prep_splits(prep);
    if (*geo_cmd) return run_geometry(geo_input, geo_out, geo_common);
    if (*score_cmd) return run_score(score_code, score_sem, score_out, score_common);
    if (*sweep_cmd) return run_sweep_cmd(sweep);
    if (*report_cmd) return run_report(rep_table, rep_format, rep_out, rep_layers, rep_gain_axis);
  } catch (const Error& e) {
    std::cerr << "rsa-probe: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "rsa-probe: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}
