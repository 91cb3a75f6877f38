// Internal: bounded-parallelism loop used by the stages that fan out work.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace phasetrace::detail {

/// Runs `fn(i)` for i in [0, count) on at most `max_parallel` threads.
/// If any call throws, the exception of the lowest failing index is rethrown
/// after all workers join, so the surfaced error does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t max_parallel, Fn&& fn) {
    if (count == 0) return;
    std::size_t workers = std::clamp<std::size_t>(max_parallel, 1, count);
    std::vector<std::exception_ptr> errors(count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace phasetrace::detail
