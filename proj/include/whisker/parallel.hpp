#ifndef WHISKER_PARALLEL_HPP
#define WHISKER_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace whisker
{

inline int default_thread_count()
{
    if (const char *env = std::getenv("WHISKER_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Chunked map of f over [0, n). Each index is visited exactly once and
// workers write to disjoint slices, so results do not depend on the thread
// count. The first exception thrown by any worker is rethrown here.
template <typename F>
inline void parallel_for(int n, int nthreads, F &&f)
{
    nthreads = std::max(1, std::min(nthreads, n));
    if (nthreads == 1) {
        for (int i = 0; i < n; ++i) {
            f(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mtx;
    const int chunk = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([&, lo, hi]() {
            try {
                for (int i = lo; i < hi; ++i) {
                    f(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mtx);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto &th : pool) {
        th.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace whisker

#endif
