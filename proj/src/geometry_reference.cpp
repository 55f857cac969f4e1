// SPDX-License-Identifier: Apache-2.0
#include <vector>

#include "geometry_internal.hpp"
#include "rsaprobe/errors.hpp"
#include "rsaprobe/geometry.hpp"

namespace rsaprobe::reference {

Geometry compute_geometry(const EmbeddingSet& set, const GeometryOptions& options) {
  const std::size_t n = set.size();
  if (n < 2) throw ValidationError("geometry needs N >= 2 samples, got " + std::to_string(n));

  std::vector<char> degenerate(n, 0);
  for (std::size_t i = 0; i < n; ++i) degenerate[i] = is_degenerate(set.row(i), options.metric);

  std::vector<double> u(set.dim()), v(set.dim());
  std::vector<float> cells(cell_count(n));
  std::uint64_t degenerate_pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = set.row(i);
    std::copy(ri.begin(), ri.end(), u.begin());
    for (std::size_t j = i + 1; j < n; ++j) {
      auto rj = set.row(j);
      std::copy(rj.begin(), rj.end(), v.begin());
      const auto pd = pair_dissimilarity(u, v, options.metric, ConstantPolicy::kZeroSimilarity);
      degenerate_pairs += pd.degenerate ? 1 : 0;
      cells[packed_index(i, j, n)] = static_cast<float>(pd.value);
    }
  }
  check_degenerate(set.sample_ids(), degenerate, degenerate_pairs, options);
  return Geometry(set.sample_ids(), std::move(cells), options.metric, degenerate_pairs);
}

}  // namespace rsaprobe::reference
