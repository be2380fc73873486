#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lidarseg {

/// Global worker cap, settable from the CLI (--threads). 0 = hardware default.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; each
/// iteration writes only its own output slot, so results do not depend on
/// scheduling. Falls back to a plain loop when one worker suffices.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn);

} // namespace lidarseg
