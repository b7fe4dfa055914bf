#include "cgro/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace cgro {
namespace {

int g_threads = 1;

}  // namespace

void set_threads(int n) { g_threads = std::max(1, n); }

int threads() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::min<std::size_t>(g_threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Fixed chunking: 4 chunks per hardware-independent slot keeps load
    // balanced while boundaries stay a function of n only.
    const std::size_t n_chunks = std::min<std::size_t>(n, 64);
    const std::size_t chunk = (n + n_chunks - 1) / n_chunks;
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= n_chunks) return;
                const std::size_t lo = c * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace cgro
