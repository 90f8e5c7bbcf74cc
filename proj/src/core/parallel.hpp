#pragma once

#include <cstdint>
#include <functional>

namespace lsen {

// Process-wide worker pool. `parallel_for` splits [0, n) into one contiguous
// block per worker (static partition), so writes to disjoint output ranges
// are race-free and results are reproducible for a fixed thread count.
void set_num_threads(int n);
int num_threads();

void parallel_for(int64_t n, const std::function<void(int64_t begin, int64_t end)>& body);

// Convenience: per-index body.
void parallel_for_each(int64_t n, const std::function<void(int64_t i)>& body);

}  // namespace lsen
