#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rummage {

/// Worker count used by parallel_for; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs f(i) for i in [0, n) over contiguous chunks. f must only write state
/// owned by index i; results are then independent of the thread count.
template <typename F>
void parallel_for(std::size_t n, F&& f, std::size_t min_chunk = 1)
{
    unsigned workers = thread_count();
    std::size_t chunks = std::min<std::size_t>(workers, (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
    if (chunks <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(chunks - 1);
    auto run = [&](std::size_t c) {
        std::size_t lo = n * c / chunks, hi = n * (c + 1) / chunks;
        try {
            for (std::size_t i = lo; i < hi; ++i)
                f(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error)
                error = std::current_exception();
        }
    };
    for (std::size_t c = 1; c < chunks; ++c)
        threads.emplace_back(run, c);
    run(0);
    for (auto& t : threads)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

}  // namespace rummage
