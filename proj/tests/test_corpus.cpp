// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <set>

#include <json.hpp>

#include "rsaprobe/corpus.hpp"
#include "rsaprobe/errors.hpp"
#include "support.hpp"

using namespace rsaprobe;
using testing::TempDir;

namespace {

const std::filesystem::path kCorpus = std::filesystem::path(RSAPROBE_TEST_DATA) / "corpus";

MetadataIngest fixture() { return load_submission_metadata(kCorpus / "metadata"); }

std::vector<ManifestRow> train_rows(Language lang, std::size_t n, const std::string& prefix) {
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestRow r;
    r.problem_id = "p" + std::to_string(i);
    r.submission_id = prefix + std::to_string(100000 + i);
    r.language = lang;
    r.split = SplitKind::kTrain;
    rows.push_back(r);
  }
  return rows;
}

bool is_prefix(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("fixture metadata loads across files, skipping other languages") {
  const auto ingest = fixture();
  CHECK(ingest.records.size() == 108);
  CHECK(ingest.skipped_rows == 10);  // one C++ row per problem
  const auto& r = ingest.records.front();
  CHECK(r.problem_id == "p00100");
  CHECK(r.submission_id == "s000001");
  CHECK(r.language == Language::kGo);
  CHECK(r.verdict == Verdict::kAccepted);
  CHECK(r.code_path == std::filesystem::path("p00100/go/s000001"));
}

TEST_CASE("test and train policies match the hand-enumerated sets") {
  const auto ingest = fixture();
  CHECK(select_problems(ingest.records, ProblemPolicy::kTest) ==
        std::vector<std::string>{"p00100", "p00102", "p00105", "p00107"});
  CHECK(select_problems(ingest.records, ProblemPolicy::kTrain) ==
        std::vector<std::string>{"p00100", "p00101", "p00102", "p00104", "p00105", "p00107",
                                 "p00108"});
  CHECK(select_problems({}, ProblemPolicy::kTest).empty());
}

TEST_CASE("one description and one accepted Go submission give one row") {
  TempDir dir;
  testing::write_file(dir / "desc" / "p1.txt", "Add two numbers.\n");
  SubmissionRecord rec{"p1", "s1", Language::kGo, Verdict::kAccepted, "p1/go/s1"};
  const std::vector<std::string> problems = {"p1"};
  const auto m = build_pair_manifest(problems, dir / "desc", std::vector{rec});
  REQUIRE(m.rows.size() == 1);
  CHECK(m.rows[0].verdict == Verdict::kAccepted);
  CHECK(m.rows[0].description_path == dir / "desc" / "p1.txt");
  CHECK(m.skipped_problems == 0);
}

TEST_CASE("fixture test manifest: 3 described problems x 6 languages x 2 verdicts") {
  const auto ingest = fixture();
  const auto problems = select_problems(ingest.records, ProblemPolicy::kTest);
  const auto m = build_pair_manifest(problems, kCorpus / "descriptions", ingest.records);
  CHECK(m.rows.size() == 3 * 6 * 2);
  CHECK(m.skipped_problems == 1);  // p00105 has no description
  std::set<std::tuple<std::string, Language, Verdict>> cells;
  for (const auto& r : m.rows) {
    CHECK(r.problem_id != "p00105");
    CHECK(r.split == SplitKind::kTest);
    cells.emplace(r.problem_id, r.language, r.verdict);
  }
  CHECK(cells.size() == 36);
  // Canonical order: problem, language, verdict, submission.
  CHECK(m.rows.front().problem_id == "p00100");
  CHECK(m.rows.front().language == Language::kGo);
  CHECK(m.rows.front().verdict == Verdict::kAccepted);
  CHECK(m.rows.front().submission_id == "s000001");

  ManifestOptions all;
  all.per_cell_limit.reset();
  CHECK(build_pair_manifest(problems, kCorpus / "descriptions", ingest.records, all).rows.size() ==
        38);  // two problems carry a second accepted Go submission
}

TEST_CASE("missing description directory, or mostly missing descriptions, is an error") {
  TempDir dir;
  const auto ingest = fixture();
  const auto problems = select_problems(ingest.records, ProblemPolicy::kTest);
  CHECK_THROWS_AS(build_pair_manifest(problems, dir / "nope", ingest.records), Error);
  std::filesystem::create_directories(dir / "few");
  testing::write_file(dir / "few" / "p00100.txt", "text");
  testing::write_file(dir / "few" / "p00102.txt", "   \n\t");  // whitespace only
  CHECK_THROWS_AS(build_pair_manifest(problems, dir / "few", ingest.records), Error);
  testing::write_file(dir / "few" / "p00107.txt", "more text");
  const auto m = build_pair_manifest(problems, dir / "few", ingest.records);
  CHECK(m.skipped_problems == 2);
  CHECK(m.rows.size() == 24);
}

TEST_CASE("manifest file round trip and header") {
  TempDir dir;
  const auto ingest = fixture();
  const auto problems = select_problems(ingest.records, ProblemPolicy::kTrain);
  ManifestOptions o;
  o.split = SplitKind::kTrain;
  o.validation = choose_validation_problems(problems, 2, 11);
  CHECK(o.validation.size() == 2);
  CHECK(choose_validation_problems(problems, 2, 11) == o.validation);
  const auto m = build_pair_manifest(problems, kCorpus / "descriptions", ingest.records, o);
  write_manifest(m, dir / "m.csv");
  const auto text = testing::read_file(dir / "m.csv");
  CHECK(text.rfind("problem_id,submission_id,language,verdict,description_path,code_path,split\n",
                   0) == 0);
  const auto back = read_manifest(dir / "m.csv");
  CHECK(back.rows == m.rows);
  std::size_t validation = 0;
  for (const auto& r : back.rows) validation += r.split == SplitKind::kValidation;
  CHECK(validation > 0);
  CHECK(validation < back.rows.size());

  testing::write_file(dir / "bad.csv", "problem_id,submission_id\np1,s1\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), FormatError);
}

TEST_CASE("duplicate submissions are rejected") {
  TempDir dir;
  testing::write_file(dir / "m.csv",
                      "problem_id,submission_id,language,status\np1,s1,Go,Accepted\np1,s1,Go,"
                      "Accepted\n");
  CHECK_THROWS_AS(load_submission_metadata(dir / "m.csv"), ValidationError);
  testing::write_file(dir / "n.csv", "problem_id,language\np1,Go\n");
  CHECK_THROWS_AS(load_submission_metadata(dir / "n.csv"), FormatError);
}

TEST_CASE("320 Go rows, seed 7") {
  const auto plan = make_ft_splits(train_rows(Language::kGo, 320, "s"), 7);
  CHECK(plan.unit(Language::kGo) == 10);
  CHECK(plan.ids(Checkpoint::parse("x1"), Language::kGo).size() == 10);
  CHECK(plan.ids(Checkpoint::parse("x32"), Language::kGo).size() == 320);
  CHECK(is_prefix(plan.ids(Checkpoint::parse("x4")), plan.ids(Checkpoint::parse("x8"))));
  CHECK(plan.ids(Checkpoint::parse("x0")).empty());
  const auto all = plan.ids(Checkpoint::parse("x32"));
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 320);
}

TEST_CASE("splits nest and scale for every language") {
  std::vector<ManifestRow> rows;
  const std::size_t counts[] = {64, 70, 33, 96, 128, 40};
  for (std::size_t li = 0; li < 6; ++li) {
    auto part = train_rows(kProgrammingLanguages[li], counts[li], "l" + std::to_string(li) + "-");
    rows.insert(rows.end(), part.begin(), part.end());
  }
  auto test_row = rows.front();
  test_row.split = SplitKind::kTest;
  test_row.submission_id = "not-train";
  rows.push_back(test_row);

  const auto plan = make_ft_splits(rows, 3);
  for (std::size_t li = 0; li < 6; ++li) {
    const Language lang = kProgrammingLanguages[li];
    const std::size_t unit = counts[li] / 32;
    CHECK(plan.unit(lang) == unit);
    std::vector<std::string> prev;
    for (int k : SplitPlan::kMultipliers) {
      const auto ids = plan.ids(Checkpoint::from_multiplier(k), lang);
      CHECK(ids.size() == k * unit);
      CHECK(is_prefix(prev, ids));
      for (const auto& id : ids) CHECK(id != "not-train");
      prev = ids;
    }
  }
}

TEST_CASE("split plans are deterministic and round trip through json") {
  const auto rows = train_rows(Language::kPython, 100, "s");
  const auto a = make_ft_splits(rows, 99);
  auto shuffled = rows;
  std::mt19937_64 gen(1);
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const auto b = make_ft_splits(shuffled, 99);
  CHECK(a.to_json() == b.to_json());
  CHECK(SplitPlan::from_json(a.to_json()) == a);
  CHECK(make_ft_splits(rows, 100).to_json() != a.to_json());
  const auto j = nlohmann::json::parse(a.to_json());
  CHECK(j["seed"] == 99);
  CHECK(j["x1"].size() == 3);
  CHECK(j["x32"].size() == 96);
}

TEST_CASE("too few rows name the language") {
  try {
    make_ft_splits(train_rows(Language::kRuby, 20, "s"), 1);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("ruby") != std::string::npos);
  }
}

TEST_CASE("full CodeNet metadata: 255 test and 808 train problems" *
          doctest::skip(std::getenv("RSAPROBE_CODENET_METADATA") == nullptr)) {
  const auto ingest = load_submission_metadata(std::getenv("RSAPROBE_CODENET_METADATA"));
  CHECK(select_problems(ingest.records, ProblemPolicy::kTest).size() == 255);
  CHECK(select_problems(ingest.records, ProblemPolicy::kTrain).size() == 808);
}

}  // TEST_SUITE
