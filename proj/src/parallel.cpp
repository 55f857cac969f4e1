// SPDX-License-Identifier: Apache-2.0
#include "rsaprobe/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <string>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "rsaprobe/errors.hpp"

namespace rsaprobe {

int available_cores() {
#if defined(_OPENMP)
  return omp_get_num_procs();
#else
  return 1;
#endif
}

int resolve_threads(std::optional<int> requested) {
  if (requested) {
    if (*requested < 0) throw UsageError("thread count must be >= 0");
    return *requested == 0 ? available_cores() : *requested;
  }
  const char* env = std::getenv("RSAPROBE_THREADS");
  if (env == nullptr || *env == '\0') return available_cores();
  int n = 0;
  const char* end = env + std::strlen(env);
  auto [ptr, ec] = std::from_chars(env, end, n);
  if (ec != std::errc{} || ptr != end || n < 0) {
    throw UsageError(std::string("RSAPROBE_THREADS must be a non-negative integer, got '") + env +
                     "'");
  }
  return n == 0 ? available_cores() : n;
}

}  // namespace rsaprobe
