#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace neuroqc {

// Run fn(begin, end) over [0, n) split into contiguous shards, one per
// worker. Callers write results by index so output never depends on the
// worker count. The first exception thrown by any shard is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, workers);
    if (workers == 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t shards = std::min<std::size_t>(workers, n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t begin = n*s/shards, end = n*(s + 1)/shards;
        threads.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            }
            catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t: threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace neuroqc
