#pragma once

#include <cstddef>
#include <functional>

namespace hxkit {

/// Worker count for pixel-parallel loops. 0 selects hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// bodies must write only to index-owned output, so results do not depend on
/// the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hxkit
