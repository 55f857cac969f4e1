// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <fstream>
#include <numeric>
#include <queue>
#include <string>

#include "rsaprobe/errors.hpp"
#include "rsaprobe/geometry.hpp"

namespace rsaprobe {
namespace {

template <typename T>
std::vector<double> rank_impl(std::span<const T> v) {
  std::vector<std::uint32_t> order(v.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && v[order[end]] == v[order[start]]) ++end;
    // Positions start+1 .. end (1-based) share their mean.
    const double r = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t p = start; p < end; ++p) ranks[order[p]] = r;
    start = end;
  }
  return ranks;
}

// Order-preserving map from float to u32; -0 and +0 share a key.
std::uint32_t order_key(float f) noexcept {
  if (f == 0.0f) f = 0.0f;
  const auto bits = std::bit_cast<std::uint32_t>(f);
  return (bits & 0x80000000u) ? ~bits : (bits | 0x80000000u);
}

// Stable LSD radix sort of (key << 32 | index) records on the key half.
void radix_sort_by_key(std::vector<std::uint64_t>& records) {
  std::vector<std::uint64_t> scratch(records.size());
  for (int pass = 0; pass < 4; ++pass) {
    const int shift = 32 + 8 * pass;
    std::size_t counts[257] = {};
    for (auto r : records) ++counts[((r >> shift) & 0xFFu) + 1];
    for (int b = 0; b < 256; ++b) counts[b + 1] += counts[b];
    for (auto r : records) scratch[counts[(r >> shift) & 0xFFu]++] = r;
    records.swap(scratch);
  }
}

std::vector<std::uint64_t> keyed(std::span<const float> cells, std::uint64_t base) {
  std::vector<std::uint64_t> records(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    records[k] = (std::uint64_t{order_key(cells[k])} << 32) | (base + k);
  }
  return records;
}

// Consumes (key, index) records in ascending key order and writes doubled
// average ranks.
class RankAssigner {
 public:
  explicit RankAssigner(std::vector<std::uint32_t>& out) : out_(out) {}

  void push(std::uint64_t record) {
    const auto key = static_cast<std::uint32_t>(record >> 32);
    if (!run_.empty() && key != run_key_) flush();
    run_key_ = key;
    run_.push_back(static_cast<std::uint32_t>(record));
  }

  void flush() {
    // Run occupies 1-based positions pos+1 .. pos+c; 2 * mean = 2*pos + c + 1.
    const auto c = static_cast<std::uint64_t>(run_.size());
    const auto doubled = static_cast<std::uint32_t>(2 * position_ + c + 1);
    for (auto idx : run_) out_[idx] = doubled;
    position_ += c;
    run_.clear();
  }

 private:
  std::vector<std::uint32_t>& out_;
  std::vector<std::uint32_t> run_;
  std::uint32_t run_key_ = 0;
  std::uint64_t position_ = 0;
};

class ScratchDir {
 public:
  explicit ScratchDir(const std::filesystem::path& parent) {
    static std::atomic<std::uint64_t> counter{0};
    const auto base = parent.empty() ? std::filesystem::temp_directory_path() : parent;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = base / ("rsaprobe-rank-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

class RunReader {
 public:
  explicit RunReader(const std::filesystem::path& p) : in_(p, std::ios::binary) {
    if (!in_) throw Error("cannot reopen spilled run '" + p.string() + "'");
    refill();
  }

  bool done() const noexcept { return pos_ == buf_.size(); }
  std::uint64_t head() const noexcept { return buf_[pos_]; }
  void pop() {
    if (++pos_ == buf_.size()) refill();
  }

 private:
  void refill() {
    buf_.resize(kBuffer);
    in_.read(reinterpret_cast<char*>(buf_.data()),
             static_cast<std::streamsize>(kBuffer * sizeof(std::uint64_t)));
    buf_.resize(static_cast<std::size_t>(in_.gcount()) / sizeof(std::uint64_t));
    pos_ = 0;
  }

  static constexpr std::size_t kBuffer = 1 << 16;
  std::ifstream in_;
  std::vector<std::uint64_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> rank_transform(std::span<const double> v) { return rank_impl(v); }
std::vector<double> rank_transform(std::span<const float> v) { return rank_impl(v); }

std::vector<std::uint32_t> doubled_ranks(std::span<const float> cells,
                                         const CellRankOptions& options) {
  const std::uint64_t m = cells.size();
  if (2 * m + 1 >= (std::uint64_t{1} << 32)) {
    throw ValidationError("too many cells to rank (" + std::to_string(m) + ")");
  }
  std::vector<std::uint32_t> ranks(m);
  RankAssigner assign(ranks);
  const std::uint64_t limit = std::max<std::uint64_t>(options.in_memory_limit, 1);

  if (m <= limit) {
    auto records = keyed(cells, 0);
    radix_sort_by_key(records);
    for (auto r : records) assign.push(r);
    if (m) assign.flush();
    return ranks;
  }

  // Spill sorted runs of at most `limit` cells, then k-way merge them.
  ScratchDir scratch(options.scratch_dir);
  std::vector<std::filesystem::path> runs;
  for (std::uint64_t begin = 0; begin < m; begin += limit) {
    const std::uint64_t len = std::min(limit, m - begin);
    auto records = keyed(cells.subspan(begin, len), begin);
    radix_sort_by_key(records);
    runs.push_back(scratch.path() / ("run" + std::to_string(runs.size()) + ".bin"));
    std::ofstream out(runs.back(), std::ios::binary);
    out.write(reinterpret_cast<const char*>(records.data()),
              static_cast<std::streamsize>(records.size() * sizeof(std::uint64_t)));
    if (!out) throw Error("failed to spill sorted run to '" + runs.back().string() + "'");
  }

  std::vector<RunReader> readers;
  readers.reserve(runs.size());
  for (const auto& p : runs) readers.emplace_back(p);

  using Head = std::pair<std::uint64_t, std::size_t>;
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  for (std::size_t r = 0; r < readers.size(); ++r) {
    if (!readers[r].done()) heap.emplace(readers[r].head(), r);
  }
  while (!heap.empty()) {
    const auto [record, r] = heap.top();
    heap.pop();
    assign.push(record);
    readers[r].pop();
    if (!readers[r].done()) heap.emplace(readers[r].head(), r);
  }
  assign.flush();
  return ranks;
}

}  // namespace rsaprobe
