// SPDX-License-Identifier: Apache-2.0
#include "rsaprobe/rsa_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "rsaprobe/errors.hpp"
#include "rsaprobe/parallel.hpp"
#include "rsaprobe/random.hpp"

namespace rsaprobe {
namespace {

using Wide = __int128;

// Doubled ranks shifted by their mean (m + 1): exact integers summing to 0.
std::vector<std::int64_t> centered_ranks(std::span<const float> cells, const CellRankOptions& o) {
  const auto ranks = doubled_ranks(cells, o);
  const auto mean = static_cast<std::int64_t>(cells.size()) + 1;
  std::vector<std::int64_t> out(ranks.size());
  for (std::size_t k = 0; k < ranks.size(); ++k) out[k] = static_cast<std::int64_t>(ranks[k]) - mean;
  return out;
}

Wide dot(const std::vector<std::int64_t>& x, const std::vector<std::int64_t>& y, int threads) {
  const auto m = static_cast<std::ptrdiff_t>(x.size());
  std::vector<Wide> partial(static_cast<std::size_t>(threads), 0);
#pragma omp parallel num_threads(threads)
  {
    Wide local = 0;
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < m; ++k) local += static_cast<Wide>(x[k] * y[k]);
#if defined(_OPENMP)
    partial[static_cast<std::size_t>(omp_get_thread_num())] = local;
#else
    partial[0] = local;
#endif
  }
  // Integer addition is associative, so the split does not affect the sum.
  return std::accumulate(partial.begin(), partial.end(), Wide{0});
}

struct Prepared {
  std::vector<std::int64_t> x, y;
  Wide sxx = 0, syy = 0, sxy = 0;
};

void check_pair(const Geometry& a, const Geometry& b) {
  if (a.condition_ids() != b.condition_ids()) {
    throw AlignmentError("geometries are over different condition ids (" +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                         " conditions); align the embedding sets first");
  }
  if (a.size() < 4) {
    throw DegenerateError("RSA needs at least 4 conditions, got " + std::to_string(a.size()));
  }
}

Prepared prepare(const Geometry& a, const Geometry& b, const RsaOptions& options, int threads) {
  check_pair(a, b);
  Prepared p;
  p.x = centered_ranks(a.cells(), options.ranking);
  p.y = centered_ranks(b.cells(), options.ranking);
  p.sxx = dot(p.x, p.x, threads);
  p.syy = dot(p.y, p.y, threads);
  p.sxy = dot(p.x, p.y, threads);
  if (p.sxx == 0 || p.syy == 0) {
    throw DegenerateError("a geometry with all cells equal has no rank correlation");
  }
  return p;
}

double correlation(Wide sxy, Wide sxx, Wide syy) {
  if (sxy == sxx && sxx == syy) return 1.0;
  if (sxy == -sxx && sxx == syy) return -1.0;
  const long double r = static_cast<long double>(sxy) /
                        std::sqrt(static_cast<long double>(sxx) * static_cast<long double>(syy));
  return std::clamp(static_cast<double>(r), -1.0, 1.0);
}

}  // namespace

double analytic_p(double score, std::uint64_t m) {
  if (m < 3) throw ValidationError("analytic p-value needs at least 3 cell pairs");
  if (!(std::fabs(score) <= 1.0)) throw ValidationError("correlation outside [-1, 1]");
  if (std::fabs(score) == 1.0) return kPValueFloor;
  if (score == 0.0) return 1.0;
  const double df = static_cast<double>(m - 2);
  const double t = std::fabs(score) * std::sqrt(df / (1.0 - score * score));
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  return std::clamp(p, kPValueFloor, 1.0);
}

RsaResult rsa_score(const Geometry& code, const Geometry& semantic, const RsaOptions& options) {
  const int threads = resolve_threads(options.threads);
  const auto p = prepare(code, semantic, options, threads);
  RsaResult r;
  r.score = correlation(p.sxy, p.sxx, p.syy);
  r.n_conditions = code.size();
  r.n_cell_pairs = code.cells().size();
  r.p_analytic = analytic_p(r.score, r.n_cell_pairs);
  return r;
}

double permutation_test(const Geometry& code, const Geometry& semantic, std::uint64_t n_perm,
                        std::uint64_t seed, const RsaOptions& options) {
  if (n_perm == 0) throw ValidationError("permutation test needs n_perm >= 1");
  const int threads = resolve_threads(options.threads);
  const auto p = prepare(code, semantic, options, threads);
  const std::size_t n = code.size();

  // The denominators are permutation invariant, so comparing the exact
  // integer numerators compares the correlations.
  std::uint64_t at_least = 0;
#pragma omp parallel for num_threads(threads) schedule(dynamic, 4) reduction(+ : at_least)
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(n_perm); ++t) {
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    auto rng = SplitMix64::split(seed, static_cast<std::uint64_t>(t));
    seeded_shuffle(std::span<std::uint32_t>(perm), rng);

    Wide sxy = 0;
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t a = perm[i];
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        const std::uint64_t b = perm[j];
        const std::uint64_t idx = a < b ? packed_index(a, b, n) : packed_index(b, a, n);
        sxy += static_cast<Wide>(p.x[k] * p.y[idx]);
      }
    }
    if (sxy >= p.sxy) ++at_least;
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
}

RsaResult rsa_with_permutations(const Geometry& code, const Geometry& semantic,
                                std::uint64_t n_perm, std::uint64_t seed,
                                const RsaOptions& options) {
  RsaResult r = rsa_score(code, semantic, options);
  r.p_permutation = permutation_test(code, semantic, n_perm, seed, options);
  r.n_permutations = n_perm;
  r.seed = seed;
  return r;
}

std::string to_json(const RsaResult& r) {
  nlohmann::ordered_json j;
  j["score"] = r.score;
  j["n_conditions"] = r.n_conditions;
  j["n_cell_pairs"] = r.n_cell_pairs;
  j["p_analytic"] = r.p_analytic;
  j["p_permutation"] = r.p_permutation ? nlohmann::ordered_json(*r.p_permutation) : nullptr;
  j["n_permutations"] = r.n_permutations ? nlohmann::ordered_json(*r.n_permutations) : nullptr;
  j["seed"] = r.seed ? nlohmann::ordered_json(*r.seed) : nullptr;
  return j.dump(2);
}

}  // namespace rsaprobe
