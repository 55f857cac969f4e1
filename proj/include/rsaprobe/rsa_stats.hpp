// SPDX-License-Identifier: Apache-2.0
//
// Second-order comparison of two geometries: Spearman correlation between
// their packed cell vectors, with an analytic t-test p-value and a seeded
// condition-label permutation test.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rsaprobe/geometry.hpp"

namespace rsaprobe {

/// Reported instead of 0 when the analytic p-value is exactly 0 or underflows.
inline constexpr double kPValueFloor = 1e-300;

struct RsaResult {
  double score = 0.0;
  std::uint64_t n_conditions = 0;
  std::uint64_t n_cell_pairs = 0;
  double p_analytic = 1.0;
  std::optional<double> p_permutation;
  std::optional<std::uint64_t> n_permutations;
  std::optional<std::uint64_t> seed;
};

struct RsaOptions {
  CellRankOptions ranking;
  std::optional<int> threads;
};

/// Spearman correlation of the two cell vectors (diagonal excluded) plus
/// p_analytic. Requires identical condition ids in identical order and N >= 4.
RsaResult rsa_score(const Geometry& code, const Geometry& semantic, const RsaOptions& options = {});

/// Two-sided p-value for a correlation over m cell pairs from the t
/// approximation with m - 2 degrees of freedom. |score| = 1 gives kPValueFloor.
double analytic_p(double score, std::uint64_t m);

/// (1 + #{pi : score(code, pi(semantic)) >= observed}) / (n_perm + 1), where
/// pi relabels the conditions of `semantic` (rows and columns jointly).
/// Permutation t draws from SplitMix64::split(seed, t), so the p-value is
/// independent of thread count.
double permutation_test(const Geometry& code, const Geometry& semantic, std::uint64_t n_perm,
                        std::uint64_t seed, const RsaOptions& options = {});

/// rsa_score followed by permutation_test, with the permutation fields set.
RsaResult rsa_with_permutations(const Geometry& code, const Geometry& semantic,
                                std::uint64_t n_perm, std::uint64_t seed,
                                const RsaOptions& options = {});

/// JSON object carrying exactly the RsaResult field names (absent optionals
/// serialize as null).
std::string to_json(const RsaResult& result);

}  // namespace rsaprobe
