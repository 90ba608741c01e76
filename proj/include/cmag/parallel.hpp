#pragma once

#include <cstddef>
#include <functional>

namespace cmag {

/// Worker thread count. Defaults to $CMAG_THREADS, else 1.
std::size_t num_threads() noexcept;
void set_num_threads(std::size_t n);

/// Calls fn(begin, end) over a partition of [0, n). Runs inline when the
/// work is small or only one thread is configured.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cmag
