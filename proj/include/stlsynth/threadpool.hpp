#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace stlsynth {

inline int& worker_count_ref() {
    static int workers = static_cast<int>(std::thread::hardware_concurrency());
    return workers;
}
inline void set_default_workers(int w) { worker_count_ref() = w > 0 ? w : 1; }
inline int default_workers() { return worker_count_ref() > 0 ? worker_count_ref() : 1; }

inline bool& in_parallel_region() {
    thread_local bool flag = false;
    return flag;
}

// Index-parallel map. Tasks must be independent; results keyed by index stay
// deterministic regardless of schedule. Exceptions propagate (first wins).
// Nested calls from worker threads degenerate to serial execution.
inline void parallel_for(int n, const std::function<void(int)>& fn, int workers = 0) {
    if (workers <= 0) workers = default_workers();
    workers = std::min(workers, n);
    if (workers <= 1 || in_parallel_region()) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex err_mutex;
    auto body = [&] {
        in_parallel_region() = true;
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) threads.emplace_back(body);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace stlsynth
