// SPDX-License-Identifier: Apache-2.0
#include "rsaprobe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "binary_io.hpp"
#include "geometry_internal.hpp"
#include "rsaprobe/errors.hpp"
#include "rsaprobe/parallel.hpp"

namespace rsaprobe {
namespace {

constexpr std::string_view kMagic = "RSAG1";
constexpr std::size_t kTile = 256;
constexpr std::size_t kMicroRows = 4;
constexpr std::size_t kMicroCols = 8;

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

double cosine(std::span<const double> x, std::span<const double> y) {
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += x[k] * y[k];
    sxx += x[k] * x[k];
    syy += y[k] * y[k];
  }
  return sxy / std::sqrt(sxx * syy);
}

// Rounding residue of a perfectly (anti-)correlated pair snaps to the exact cell.
double to_cell(double similarity) {
  const double cell = std::clamp(1.0 - similarity, 0.0, 2.0);
  if (cell < 1e-12) return 0.0;
  if (cell > 2.0 - 1e-12) return 2.0;
  return cell;
}

// Row i of the normalized matrix, or a zero row for degenerate vectors.
template <typename T>
bool normalize_row(std::span<const T> row, Metric metric, std::span<double> out) {
  if (is_degenerate(row, metric)) {
    std::fill(out.begin(), out.end(), 0.0);
    return true;
  }
  if (metric == Metric::kSpearman) {
    const auto r = rank_transform(row);
    std::copy(r.begin(), r.end(), out.begin());
  } else {
    std::copy(row.begin(), row.end(), out.begin());
  }
  if (metric != Metric::kCosine) {
    double mean = 0;
    for (double v : out) mean += v;
    mean /= static_cast<double>(out.size());
    for (double& v : out) v -= mean;
  }
  double sq = 0;
  for (double v : out) sq += v * v;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : out) v *= inv;
  return false;
}

// acc[r][c] = sum_k a_r[k] * bt[k][c], accumulated in ascending k so every
// cell sees the same operation sequence regardless of tiling or threads.
inline void micro_kernel(const double* a, std::size_t d, const double* bt, std::size_t ldb,
                         double (&acc)[kMicroRows][kMicroCols]) {
  for (auto& row : acc) std::fill(std::begin(row), std::end(row), 0.0);
  const double* a0 = a;
  const double* a1 = a + d;
  const double* a2 = a + 2 * d;
  const double* a3 = a + 3 * d;
  for (std::size_t k = 0; k < d; ++k) {
    const double* b = bt + k * ldb;
    const double x0 = a0[k], x1 = a1[k], x2 = a2[k], x3 = a3[k];
    for (std::size_t c = 0; c < kMicroCols; ++c) {
      acc[0][c] += x0 * b[c];
      acc[1][c] += x1 * b[c];
      acc[2][c] += x2 * b[c];
      acc[3][c] += x3 * b[c];
    }
  }
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kSpearman: return "spearman";
    case Metric::kPearson: return "pearson";
    case Metric::kCosine: return "cosine";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  if (s == "spearman") return Metric::kSpearman;
  if (s == "pearson") return Metric::kPearson;
  if (s == "cosine") return Metric::kCosine;
  throw ValidationError("unknown metric '" + std::string(s) + "'");
}

std::string_view to_string(ConstantPolicy p) {
  return p == ConstantPolicy::kFail ? "fail" : "zero-similarity";
}

ConstantPolicy parse_constant_policy(std::string_view s) {
  if (s == "zero-similarity" || s == "zero") return ConstantPolicy::kZeroSimilarity;
  if (s == "fail") return ConstantPolicy::kFail;
  throw ValidationError("unknown constant policy '" + std::string(s) + "'");
}

PairDissimilarity pair_dissimilarity(std::span<const double> u, std::span<const double> v,
                                     Metric metric, ConstantPolicy policy) {
  if (u.size() != v.size()) {
    throw ValidationError("vector length mismatch: " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  }
  if (u.size() < 2) throw ValidationError("vectors need at least 2 components");
  if (is_degenerate(u, metric) || is_degenerate(v, metric)) {
    if (policy == ConstantPolicy::kFail) {
      throw DegenerateError("constant vector has no " + std::string(to_string(metric)) +
                            " similarity");
    }
    return {1.0, true};
  }
  switch (metric) {
    case Metric::kSpearman: {
      const auto ru = rank_transform(u);
      const auto rv = rank_transform(v);
      return {to_cell(pearson(ru, rv)), false};
    }
    case Metric::kPearson: return {to_cell(pearson(u, v)), false};
    case Metric::kCosine: return {to_cell(cosine(u, v)), false};
  }
  return {1.0, true};
}

Geometry::Geometry(std::vector<std::string> condition_ids, std::vector<float> cells,
                   Metric metric, std::uint64_t degenerate_pairs)
    : ids_(std::move(condition_ids)),
      cells_(std::move(cells)),
      metric_(metric),
      degenerate_pairs_(degenerate_pairs) {
  if (ids_.size() < 2) throw ValidationError("a geometry needs at least 2 conditions");
  if (cells_.size() != cell_count(ids_.size())) {
    throw ValidationError("geometry over " + std::to_string(ids_.size()) + " conditions needs " +
                          std::to_string(cell_count(ids_.size())) + " cells, got " +
                          std::to_string(cells_.size()));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw ValidationError("duplicate condition id '" + id + "'");
  }
  for (float c : cells_) {
    if (!(c >= 0.0f && c <= 2.0f)) throw ValidationError("geometry cell outside [0, 2]");
  }
}

void check_degenerate(const std::vector<std::string>& ids, const std::vector<char>& degenerate,
                      std::uint64_t degenerate_pairs, const GeometryOptions& options) {
  if (degenerate_pairs == 0) return;
  const double fraction =
      static_cast<double>(degenerate_pairs) / static_cast<double>(cell_count(ids.size()));
  const bool fail = options.constant_policy == ConstantPolicy::kFail ||
                    (!options.allow_degenerate && fraction > options.max_degenerate_fraction);
  if (!fail) return;
  std::string listed;
  std::size_t shown = 0, total = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!degenerate[i]) continue;
    ++total;
    if (shown < 20) {
      listed += (shown ? ", " : "") + ids[i];
      ++shown;
    }
  }
  if (total > shown) listed += ", ... (" + std::to_string(total) + " total)";
  throw DegenerateError(std::to_string(degenerate_pairs) + " of " +
                        std::to_string(cell_count(ids.size())) +
                        " pairs involve constant vectors; offending samples: " + listed);
}

std::uint64_t degenerate_pair_count(std::uint64_t n, std::uint64_t n_degenerate) {
  return n_degenerate * (n - n_degenerate) + cell_count(n_degenerate);
}

Geometry compute_geometry(const EmbeddingSet& set, const GeometryOptions& options) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  if (n < 2) throw ValidationError("geometry needs N >= 2 samples, got " + std::to_string(n));
  if (d < 2) throw ValidationError("geometry needs vectors of dimension >= 2");
  const int threads = resolve_threads(options.threads);

  // Normalized rows, padded to whole micro-tiles with zero rows; plus the
  // transposed copy the kernel streams along k.
  const std::size_t npad = (n + kMicroCols - 1) / kMicroCols * kMicroCols;
  std::vector<double> rows(npad * d, 0.0);
  std::vector<char> degenerate(n, 0);

#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    degenerate[ui] = normalize_row(set.row(ui), options.metric,
                                   std::span<double>(rows).subspan(ui * d, d));
  }

  const auto n_degenerate =
      static_cast<std::uint64_t>(std::count(degenerate.begin(), degenerate.end(), 1));
  const std::uint64_t degenerate_pairs = degenerate_pair_count(n, n_degenerate);
  check_degenerate(set.sample_ids(), degenerate, degenerate_pairs, options);

  std::vector<double> cols(d * npad);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(d); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    for (std::size_t j = 0; j < npad; ++j) cols[uk * npad + j] = rows[j * d + uk];
  }

  const std::size_t tiles = (n + kTile - 1) / kTile;
  std::vector<std::pair<std::size_t, std::size_t>> tile_pairs;
  for (std::size_t ti = 0; ti < tiles; ++ti) {
    for (std::size_t tj = ti; tj < tiles; ++tj) tile_pairs.emplace_back(ti, tj);
  }

  std::vector<float> cells(cell_count(n));
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tile_pairs.size()); ++t) {
    const auto [ti, tj] = tile_pairs[static_cast<std::size_t>(t)];
    const std::size_t i_end = std::min(n, (ti + 1) * kTile);
    const std::size_t j_begin = tj * kTile;
    const std::size_t j_end = std::min(npad, (tj + 1) * kTile);
    double acc[kMicroRows][kMicroCols];
    for (std::size_t i0 = ti * kTile; i0 < i_end; i0 += kMicroRows) {
      for (std::size_t j0 = j_begin; j0 < j_end; j0 += kMicroCols) {
        if (j0 + kMicroCols <= i0 + 1) continue;  // block lies on or below the diagonal
        micro_kernel(&rows[i0 * d], d, &cols[j0], npad, acc);
        for (std::size_t r = 0; r < kMicroRows; ++r) {
          const std::size_t i = i0 + r;
          if (i >= n) break;
          for (std::size_t c = 0; c < kMicroCols; ++c) {
            const std::size_t j = j0 + c;
            if (j <= i || j >= n) continue;
            const double sim = (degenerate[i] || degenerate[j]) ? 0.0 : acc[r][c];
            cells[packed_index(i, j, n)] = static_cast<float>(to_cell(sim));
          }
        }
      }
    }
  }
  return Geometry(set.sample_ids(), std::move(cells), options.metric, degenerate_pairs);
}

void write_geometry(const Geometry& g, const std::filesystem::path& path) {
  std::string out;
  out.reserve(kMagic.size() + 13 + g.cells().size() * 4 + g.size() * 16);
  out.append(kMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(g.size()));
  out.push_back(static_cast<char>(g.metric()));
  detail::put_u64(out, g.cells().size());
  detail::put_f32s(out, g.cells());
  detail::put_id_block(out, g.condition_ids());
  detail::spit(path.string(), out);
}

Geometry read_geometry(const std::filesystem::path& path) {
  const std::string bytes = detail::slurp(path.string());
  detail::Reader in(bytes);
  if (in.take(kMagic.size(), "magic") != kMagic) {
    throw FormatError("bad magic, not an RSAG1 file", 0);
  }
  const std::uint32_t n = in.u32("condition count");
  const std::uint64_t tag_at = in.offset();
  const std::uint8_t tag = in.u8("metric tag");
  if (tag > 2) throw FormatError("unknown metric tag " + std::to_string(tag), tag_at);
  const std::uint64_t count_at = in.offset();
  const std::uint64_t count = in.u64("cell count");
  if (count != cell_count(n)) {
    throw FormatError("cell count " + std::to_string(count) + " does not match N=" +
                          std::to_string(n),
                      count_at);
  }
  const std::uint64_t cells_at = in.offset();
  auto cells = in.f32s(count, "cells");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!(cells[k] >= 0.0f && cells[k] <= 2.0f)) {
      throw FormatError("cell outside [0, 2]", cells_at + 4 * k);
    }
  }
  auto ids = detail::read_id_block(in, n);
  if (in.remaining() != 0) throw FormatError("trailing bytes after id block", in.offset());
  return Geometry(std::move(ids), std::move(cells), static_cast<Metric>(tag));
}

}  // namespace rsaprobe
