#pragma once

#include <functional>

namespace gmr {

/// Global cap on worker threads (0 = hardware concurrency). Set once at
/// startup; simulation results do not depend on it.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Work items must write only to their own index
/// range so any schedule yields identical results.
void parallel_for(long n, const std::function<void(long)>& fn);

}  // namespace gmr
