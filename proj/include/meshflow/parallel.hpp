#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace meshflow {

/// Worker count: MESHFLOW_THREADS when set and positive, hardware concurrency
/// otherwise (0 or unset means auto).
inline unsigned thread_count() {
    unsigned n = 0;
    if (const char* env = std::getenv("MESHFLOW_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) n = static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Calls body(begin, end) on disjoint contiguous slices of [0, count). Each
/// slice must write only to its own rows, so results are independent of the
/// thread count.
template <class Body>
void parallel_rows(int count, Body&& body) {
    const int workers = std::min<int>(static_cast<int>(thread_count()), std::max(count, 1));
    if (workers <= 1 || count < 16) {
        body(0, count);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace meshflow
