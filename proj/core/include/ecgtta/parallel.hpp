#pragma once

#include <cstddef>
#include <functional>

namespace ecgtta {

// Runs fn(i) for i in [0, n). Work items must write only to per-index slots;
// any reduction happens afterwards in index order, so results are identical
// for every thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// ECG_TTA_THREADS when set, otherwise hardware concurrency.
int default_threads();

}  // namespace ecgtta
