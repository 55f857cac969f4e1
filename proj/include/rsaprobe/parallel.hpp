// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

namespace rsaprobe {

/// Worker count for parallel kernels. An explicit request wins; otherwise
/// RSAPROBE_THREADS is consulted (0 or unset means every available core).
int resolve_threads(std::optional<int> requested = std::nullopt);

/// Cores visible to the OpenMP runtime (1 when built without OpenMP).
int available_cores();

}  // namespace rsaprobe
