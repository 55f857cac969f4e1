// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsaprobe/geometry.hpp"

namespace rsaprobe {

/// Constant vectors have no rank or value variance; cosine only needs a
/// non-zero norm.
template <typename T>
bool is_degenerate(std::span<const T> v, Metric metric) {
  if (metric == Metric::kCosine) {
    return std::all_of(v.begin(), v.end(), [](T x) { return x == T{0}; });
  }
  return std::all_of(v.begin(), v.end(), [&](T x) { return x == v.front(); });
}

/// Pairs touching at least one of `n_degenerate` degenerate rows among n.
std::uint64_t degenerate_pair_count(std::uint64_t n, std::uint64_t n_degenerate);

/// Applies the constant policy and failure threshold; throws DegenerateError
/// listing the offending sample ids.
void check_degenerate(const std::vector<std::string>& ids, const std::vector<char>& degenerate,
                      std::uint64_t degenerate_pairs, const GeometryOptions& options);

}  // namespace rsaprobe
