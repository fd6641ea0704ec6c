#include "fednam/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fednam {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex failure_mutex;
    std::exception_ptr failure;
    const std::size_t block = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * block;
        const std::size_t end = std::min(begin + block, count);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn, &failure_mutex, &failure] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

int resolve_threads(int requested) {
    int threads = requested > 0 ? requested
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (const char* cap = std::getenv("FEDNAM_THREADS")) {
        try {
            const int max_threads = std::stoi(cap);
            if (max_threads >= 1) threads = std::min(threads, max_threads);
        } catch (const std::exception&) {
            // Unparseable cap is ignored.
        }
    }
    return threads;
}

}  // namespace fednam
