#pragma once

#include <cstddef>

namespace policyscope {

// Effective worker count for the OpenMP kernels. `requested` <= 0 means
// "use all hardware threads". The POLICYSCOPE_THREADS environment
// variable, when set to a positive integer, caps the result.
int resolve_threads(int requested = 0);

namespace detail {

// Shared chunking helper so the parallel kernels and their serial
// references iterate items in the same order per worker.
template <typename Fn>
void run_indexed(std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace detail
}  // namespace policyscope
