#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace dds {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items write to
// disjoint state, so results do not depend on the thread count. The first
// exception thrown by a work item is rethrown on the caller.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n);
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

// Cost bookkeeping shared by the solver drivers. One subdomain solve is one
// application of a factored local block; a parallel round is one sweep over
// all subdomains that could run concurrently.
struct SolveCounters {
    std::atomic<std::int64_t> subdomain_solves{0};
    std::atomic<std::int64_t> parallel_rounds{0};

    void reset() {
        subdomain_solves = 0;
        parallel_rounds = 0;
    }
};

} // namespace dds
