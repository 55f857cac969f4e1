// SPDX-License-Identifier: Apache-2.0
//
// Representational geometries: packed pairwise-dissimilarity matrices over a
// set of conditions, with a fast rank-normalized Gram-product kernel and a
// serial per-pair reference kept for verification.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rsaprobe/embedding_store.hpp"

namespace rsaprobe {

enum class Metric : std::uint8_t { kSpearman = 0, kPearson = 1, kCosine = 2 };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

/// What happens when a vector has no variance (or, for cosine, zero norm).
enum class ConstantPolicy {
  kZeroSimilarity,  // similarity := 0, the pair is counted as degenerate
  kFail,            // any degenerate pair is a DegenerateError
};

std::string_view to_string(ConstantPolicy p);
ConstantPolicy parse_constant_policy(std::string_view s);

// ---------------------------------------------------------------------------
// Ranking

/// Average-tie ranks, 1-based. Tied values share the mean of the positions
/// they occupy, so the ranks always sum to d(d+1)/2.
std::vector<double> rank_transform(std::span<const double> v);
std::vector<double> rank_transform(std::span<const float> v);

struct CellRankOptions {
  /// Above this many cells the sort spills sorted runs to disk and merges.
  std::uint64_t in_memory_limit = std::uint64_t{1} << 27;
  /// Scratch directory for spilled runs; the system temp dir when empty.
  std::filesystem::path scratch_dir;
};

/// Average-tie ranks of a large cell vector, stored doubled (2*rank) so every
/// rank, including half-integer tie means, is an exact integer. Requires
/// 2*size+1 < 2^32.
std::vector<std::uint32_t> doubled_ranks(std::span<const float> cells,
                                         const CellRankOptions& options = {});

// ---------------------------------------------------------------------------
// Pairwise dissimilarity

struct PairDissimilarity {
  double value = 0.0;        // 1 - similarity, in [0, 2]
  bool degenerate = false;   // a constant vector forced the policy value
};

/// 1 - similarity(u, v). Throws ValidationError on length mismatch or
/// length < 2, DegenerateError for a constant vector under ConstantPolicy::kFail.
PairDissimilarity pair_dissimilarity(std::span<const double> u, std::span<const double> v,
                                     Metric metric = Metric::kSpearman,
                                     ConstantPolicy policy = ConstantPolicy::kZeroSimilarity);

// ---------------------------------------------------------------------------
// Geometry

/// Row-major packed index of cell (i, j), i < j, in an n-condition geometry.
constexpr std::uint64_t packed_index(std::uint64_t i, std::uint64_t j, std::uint64_t n) noexcept {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

constexpr std::uint64_t cell_count(std::uint64_t n) noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }

class Geometry {
 public:
  Geometry(std::vector<std::string> condition_ids, std::vector<float> cells, Metric metric,
           std::uint64_t degenerate_pairs = 0);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& condition_ids() const noexcept { return ids_; }
  std::span<const float> cells() const noexcept { return cells_; }
  Metric metric() const noexcept { return metric_; }
  std::uint64_t degenerate_pairs() const noexcept { return degenerate_pairs_; }

  /// Dissimilarity between conditions i and j; 0 on the diagonal.
  float at(std::size_t i, std::size_t j) const noexcept {
    if (i == j) return 0.0f;
    if (i > j) std::swap(i, j);
    return cells_[packed_index(i, j, ids_.size())];
  }

  friend bool operator==(const Geometry&, const Geometry&) = default;

 private:
  std::vector<std::string> ids_;
  std::vector<float> cells_;
  Metric metric_;
  std::uint64_t degenerate_pairs_;
};

struct GeometryOptions {
  Metric metric = Metric::kSpearman;
  ConstantPolicy constant_policy = ConstantPolicy::kZeroSimilarity;
  /// Job fails when degenerate pairs exceed this fraction of all pairs...
  double max_degenerate_fraction = 0.01;
  /// ...unless this override is set.
  bool allow_degenerate = false;
  std::optional<int> threads;
};

/// Fast path: rank (spearman) or raw rows are centered (not for cosine) and
/// L2-normalized once, then every cell is 1 - <r_i, r_j> from a blocked
/// symmetric Gram product with 256-row tiles. Each cell is one dot product
/// with a fixed summation order, so the output is bit-identical for any
/// thread count.
Geometry compute_geometry(const EmbeddingSet& set, const GeometryOptions& options = {});

namespace reference {

/// Serial per-pair loop over pair_dissimilarity. Quadratic in N with a
/// per-pair re-ranking; only meant for cross-checking the fast path.
Geometry compute_geometry(const EmbeddingSet& set, const GeometryOptions& options = {});

}  // namespace reference

/// RSAG1: magic, u32 N, u8 metric tag, u64 cell count, f32 cells, id block.
void write_geometry(const Geometry& g, const std::filesystem::path& path);
Geometry read_geometry(const std::filesystem::path& path);

}  // namespace rsaprobe
