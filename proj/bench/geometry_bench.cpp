// SPDX-License-Identifier: Apache-2.0
//
// Geometry kernels: serial per-pair reference vs the blocked Gram path,
// single-threaded and with every core; plus the cell-vector RSA score.
#include <random>

#include <benchmark/benchmark.h>

#include "rsaprobe/geometry.hpp"
#include "rsaprobe/parallel.hpp"
#include "rsaprobe/rsa_stats.hpp"

namespace {

using namespace rsaprobe;

EmbeddingSet make_set(std::size_t n, std::size_t d) {
  std::mt19937_64 gen(n * 1000003 + d);
  std::normal_distribution<float> normal;
  std::vector<float> v(n * d);
  for (auto& x : v) x = normal(gen);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("c" + std::to_string(i));
  return EmbeddingSet(std::move(ids), d, std::move(v));
}

void set_counters(benchmark::State& state, std::size_t n) {
  state.counters["cells/s"] = benchmark::Counter(
      static_cast<double>(cell_count(n)) * static_cast<double>(state.iterations()),
      benchmark::Counter::kIsRate);
}

void BM_Reference(benchmark::State& state) {
  const auto set = make_set(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(reference::compute_geometry(set));
  set_counters(state, set.size());
}

void BM_FastOneThread(benchmark::State& state) {
  const auto set = make_set(state.range(0), state.range(1));
  GeometryOptions o;
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(compute_geometry(set, o));
  set_counters(state, set.size());
}

void BM_FastAllCores(benchmark::State& state) {
  const auto set = make_set(state.range(0), state.range(1));
  GeometryOptions o;
  o.threads = 0;
  for (auto _ : state) benchmark::DoNotOptimize(compute_geometry(set, o));
  set_counters(state, set.size());
  state.counters["threads"] = available_cores();
}

void BM_RsaScore(benchmark::State& state) {
  const auto a = compute_geometry(make_set(state.range(0), 64));
  const auto b = compute_geometry(make_set(state.range(0), 48));
  for (auto _ : state) benchmark::DoNotOptimize(rsa_score(a, b));
  set_counters(state, a.size());
}

void shapes(benchmark::internal::Benchmark* b) {
  for (int n : {256, 1024}) {
    for (int d : {64, 768}) b->Args({n, d});
  }
}

}  // namespace

BENCHMARK(BM_Reference)->Apply(shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FastOneThread)->Apply(shapes)->Args({5000, 768})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FastAllCores)->Apply(shapes)->Args({5000, 768})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RsaScore)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
