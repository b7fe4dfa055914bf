#pragma once

#include <cstddef>
#include <functional>

namespace cgro {

/// Global worker cap for parallel sections. Defaults to 1; raised by the
/// CLI --threads flag or the CGRO_LAB_THREADS environment variable.
void set_threads(int n);
int threads();

/// Runs fn(i) for i in [0, n). Work is split into chunks whose boundaries
/// depend only on n (never on the thread count), and chunk results must be
/// written to per-index storage by the caller, so any later reduction in
/// index order is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cgro
