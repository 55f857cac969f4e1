// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <json.hpp>

#include "rsaprobe/errors.hpp"
#include "rsaprobe/random.hpp"
#include "rsaprobe/rsa_stats.hpp"
#include "support.hpp"

using namespace rsaprobe;
using testing::TempDir;

namespace {

Geometry four(std::vector<float> cells) {
  return Geometry(testing::make_ids(4), std::move(cells), Metric::kSpearman);
}

Geometry transformed(const Geometry& g, float (*f)(float)) {
  std::vector<float> cells(g.cells().begin(), g.cells().end());
  for (auto& c : cells) c = f(c);
  return Geometry(g.condition_ids(), std::move(cells), g.metric());
}

// Cells of g after relabelling condition i as perm[i].
std::vector<double> permuted_cells(const Geometry& g, const std::vector<std::size_t>& perm) {
  std::vector<double> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) out.push_back(g.at(perm[i], perm[j]));
  }
  return out;
}

// Two-sided Student t tail by composite Simpson on the density.
double t_tail_oracle(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double hi = t + 400.0;
  const int n = 400000;
  const double h = (hi - t) / n;
  double s = f(t) + f(hi);
  for (int i = 1; i < n; ++i) s += f(t + i * h) * (i % 2 ? 4 : 2);
  return 2 * s * h / 3;
}

}  // namespace

TEST_SUITE("rsa-stats") {

TEST_CASE("hand-built four-condition example") {
  const auto a = four({0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f});
  const auto b = four({0.1f, 0.3f, 0.2f, 0.4f, 0.5f, 0.6f});
  // One adjacent swap: sum d^2 = 2, so rho = 1 - 6 * 2 / (6 * 35).
  const double want = 1.0 - 6.0 * 2.0 / (6.0 * 35.0);
  const auto r = rsa_score(a, b);
  CHECK(std::fabs(r.score - want) < 1e-12);
  CHECK(std::fabs(r.score - testing::oracle_spearman(testing::to_double(a.cells()),
                                                     testing::to_double(b.cells()))) < 1e-12);
  CHECK(r.n_conditions == 4);
  CHECK(r.n_cell_pairs == 6);
  CHECK_FALSE(r.p_permutation);
}

TEST_CASE("self comparison and monotone transforms give exactly one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = testing::random_geometry(5 + seed, seed);
    CHECK(rsa_score(g, g).score == 1.0);
    CHECK(rsa_score(g, transformed(g, [](float c) { return c * c / 2.0f; })).score == 1.0);
    CHECK(rsa_score(transformed(g, [](float c) { return std::sqrt(2.0f * c); }), g).score == 1.0);
    CHECK(rsa_score(g, g).p_analytic == kPValueFloor);
  }
}

TEST_CASE("score agrees with an independent spearman over the cells") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto a = testing::random_geometry(4 + seed % 17, 100 + seed);
    // Ties on purpose: cells quantized to a coarse grid.
    auto b = transformed(testing::random_geometry(4 + seed % 17, 200 + seed),
                         [](float c) { return std::round(c * 4.0f) / 4.0f; });
    const double want = testing::oracle_spearman(testing::to_double(a.cells()),
                                                 testing::to_double(b.cells()));
    CHECK(std::fabs(rsa_score(a, b).score - want) < 1e-12);
  }
}

TEST_CASE("score is symmetric and invariant to joint relabelling") {
  const auto a = testing::random_geometry(15, 1);
  const auto b = testing::random_geometry(15, 2);
  CHECK(rsa_score(a, b).score == rsa_score(b, a).score);

  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(4);
  std::shuffle(perm.begin(), perm.end(), gen);
  auto relabel = [&](const Geometry& g) {
    const auto c = permuted_cells(g, perm);
    return Geometry(g.condition_ids(), std::vector<float>(c.begin(), c.end()), g.metric());
  };
  CHECK(std::fabs(rsa_score(relabel(a), relabel(b)).score - rsa_score(a, b).score) < 1e-12);
}

TEST_CASE("preconditions") {
  const auto g3 = Geometry(testing::make_ids(3), {0.1f, 0.2f, 0.3f}, Metric::kSpearman);
  CHECK_THROWS_AS(rsa_score(g3, g3), DegenerateError);
  const auto a = testing::random_geometry(6, 1);
  const auto other = Geometry({"a", "b", "c", "d", "e", "f"},
                              std::vector<float>(a.cells().begin(), a.cells().end()), a.metric());
  CHECK_THROWS_AS(rsa_score(a, other), AlignmentError);
  const auto flat = Geometry(testing::make_ids(6), std::vector<float>(15, 1.0f), Metric::kSpearman);
  CHECK_THROWS_AS(rsa_score(a, flat), DegenerateError);
  CHECK_THROWS_AS(permutation_test(a, a, 0, 1), ValidationError);
  CHECK_THROWS_AS(permutation_test(g3, g3, 10, 1), DegenerateError);
}

TEST_CASE("analytic p") {
  CHECK(analytic_p(0.0, 3) == 1.0);
  CHECK(analytic_p(0.0, 1000) == 1.0);
  CHECK(analytic_p(1.0, 10) == 1e-300);
  CHECK(analytic_p(-1.0, 10) == 1e-300);
  CHECK_THROWS_AS(analytic_p(0.5, 2), ValidationError);

  const double p = analytic_p(0.5, 100);
  CHECK(p == doctest::Approx(1.1e-7).epsilon(0.1));
  for (auto [score, m] : {std::pair{0.5, 100}, {0.2, 30}, {-0.7, 12}, {0.05, 5000}, {0.9, 8}}) {
    const double df = m - 2.0;
    const double t = std::fabs(score) * std::sqrt(df / (1 - score * score));
    const double want = t_tail_oracle(t, df);
    CHECK_MESSAGE(analytic_p(score, m) == doctest::Approx(want).epsilon(1e-6), score << " " << m);
  }
  CHECK(analytic_p(0.3, 50) == analytic_p(-0.3, 50));
}

TEST_CASE("exhaustive N=4: only the identity reaches a self score of one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = testing::random_geometry(4, 50 + seed);
    const auto base = testing::to_double(g.cells());
    std::vector<std::size_t> perm = {0, 1, 2, 3};
    int hits = 0;
    do {
      if (testing::oracle_spearman(base, permuted_cells(g, perm)) >= 1.0 - 1e-12) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(hits == 1);
  }
}

TEST_CASE("identical generic geometries give the minimum p") {
  const auto g = testing::random_geometry(8, 3);
  CHECK(permutation_test(g, g, 999, 2024) == doctest::Approx(1.0 / 1000).epsilon(1e-15));
}

TEST_CASE("permutation p matches a direct recount") {
  const auto a = testing::random_geometry(10, 7);
  const auto b = testing::random_geometry(10, 8);
  const std::uint64_t n_perm = 300, seed = 42;
  const double observed = testing::oracle_spearman(testing::to_double(a.cells()),
                                                   testing::to_double(b.cells()));
  std::uint64_t at_least = 0;
  for (std::uint64_t t = 0; t < n_perm; ++t) {
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = SplitMix64::split(seed, t);
    seeded_shuffle(std::span<std::size_t>(perm), rng);
    at_least += testing::oracle_spearman(testing::to_double(a.cells()), permuted_cells(b, perm)) >=
                observed - 1e-12;
  }
  const double p = permutation_test(a, b, n_perm, seed);
  CHECK(p == static_cast<double>(1 + at_least) / (n_perm + 1));
  CHECK(p >= 1.0 / (n_perm + 1));
  CHECK(p <= 1.0);
}

TEST_CASE("permutation p is reproducible and independent of threads") {
  const auto a = testing::random_geometry(12, 1);
  const auto b = testing::random_geometry(12, 2);
  RsaOptions one, eight;
  one.threads = 1;
  eight.threads = 8;
  const double p1 = permutation_test(a, b, 500, 9, one);
  CHECK(permutation_test(a, b, 500, 9, eight) == p1);
  CHECK(permutation_test(a, b, 500, 9, one) == p1);
}

TEST_CASE("json record carries the exact field names") {
  const auto g = testing::random_geometry(6, 1);
  const auto h = testing::random_geometry(6, 2);
  auto j = nlohmann::json::parse(to_json(rsa_score(g, h)));
  for (const char* k : {"score", "n_conditions", "n_cell_pairs", "p_analytic", "p_permutation",
                        "n_permutations", "seed"}) {
    CHECK_MESSAGE(j.contains(k), k);
  }
  CHECK(j.size() == 7);
  CHECK(j["p_permutation"].is_null());
  j = nlohmann::json::parse(to_json(rsa_with_permutations(g, h, 99, 5)));
  CHECK(j["n_permutations"] == 99);
  CHECK(j["seed"] == 5);
  CHECK(j["p_permutation"].get<double>() >= 0.01);
}

TEST_CASE("external-memory cell ranking gives the same score") {
  TempDir dir;
  const auto a = testing::random_geometry(60, 1);
  const auto b = testing::random_geometry(60, 2);
  RsaOptions spill;
  spill.ranking.in_memory_limit = 100;
  spill.ranking.scratch_dir = dir.path();
  CHECK(rsa_score(a, b, spill).score == rsa_score(a, b).score);
  CHECK(permutation_test(a, b, 50, 3, spill) == permutation_test(a, b, 50, 3));
}

TEST_CASE("splitmix64 reference outputs") {
  // Published SplitMix64 sequence for seed 1234567.
  SplitMix64 rng(1234567);
  CHECK(rng() == 6457827717110365317ULL);
  CHECK(rng() == 3203168211198807973ULL);
  CHECK(rng() == 9817491932198370423ULL);
  SplitMix64 r(5);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
  CHECK(SplitMix64::split(1, 2)() == SplitMix64::split(1, 2)());
  CHECK(SplitMix64::split(1, 2)() != SplitMix64::split(1, 3)());
}

}  // TEST_SUITE
