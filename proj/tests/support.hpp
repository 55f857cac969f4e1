// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: scratch directories, random fixtures and the
// independent oracles the library is checked against.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rsaprobe/embedding_store.hpp"
#include "rsaprobe/geometry.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("rsaprobe-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

inline std::string make_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%05zu", i);
  return buf;
}

inline std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(make_id(i));
  return ids;
}

// Gaussian entries from std::mt19937_64 (kept apart from the library RNG).
inline rsaprobe::EmbeddingSet random_set(std::size_t n, std::size_t d, std::uint64_t seed,
                                         rsaprobe::EmbeddingMeta meta = {}) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> normal;
  std::vector<float> v(n * d);
  for (auto& x : v) x = normal(gen);
  return rsaprobe::EmbeddingSet(make_ids(n), d, std::move(v), std::move(meta));
}

// Random geometry with generic (tie-free in practice) cells in (0, 2).
inline rsaprobe::Geometry random_geometry(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0.01f, 1.99f);
  std::vector<float> cells(rsaprobe::cell_count(n));
  for (auto& c : cells) c = u(gen);
  return rsaprobe::Geometry(make_ids(n), std::move(cells), rsaprobe::Metric::kSpearman);
}

// Average-tie ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<long double> oracle_ranks(const std::vector<double>& v) {
  std::vector<long double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    r[i] = 1.0L + less + (equal - 1) / 2.0L;
  }
  return r;
}

inline long double oracle_pearson(const std::vector<long double>& a,
                                  const std::vector<long double>& b) {
  const auto n = static_cast<long double>(a.size());
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double oracle_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return static_cast<double>(oracle_pearson(oracle_ranks(a), oracle_ranks(b)));
}

// 1 - 6 sum d^2 / (n (n^2 - 1)); valid only without ties.
inline double classical_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = oracle_ranks(a), rb = oracle_ranks(b);
  long double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const long double n = static_cast<long double>(a.size());
  return static_cast<double>(1.0L - 6.0L * d2 / (n * (n * n - 1.0L)));
}

inline std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

// Naive per-pair Spearman geometry, independent of the library kernels.
inline std::vector<double> oracle_geometry(const rsaprobe::EmbeddingSet& set) {
  std::vector<double> cells;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = i + 1; j < set.size(); ++j) {
      cells.push_back(1.0 - oracle_spearman(to_double(set.row(i)), to_double(set.row(j))));
    }
  }
  return cells;
}

}  // namespace testing
