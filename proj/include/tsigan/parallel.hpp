#pragma once

#include <cstddef>
#include <functional>

namespace tsigan {

/// Worker cap from TSIGAN_THREADS (unset or invalid: hardware concurrency, at least 1).
std::size_t worker_count();

/// Runs task(i) for i in [0, count) on up to worker_count() threads.
/// Task boundaries are fixed by the caller, so results never depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

} // namespace tsigan
