#ifndef SECRELAY_DETAIL_PARALLEL_HPP
#define SECRELAY_DETAIL_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace secrelay::detail {

// Worker count: hardware concurrency capped by the SECRELAY_THREADS
// environment variable (values < 1 mean serial).
inline unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SECRELAY_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        else n = 1;
    }
    return n;
}

// Runs f(i) for i in [0, n). Results must be written to per-index slots;
// the caller reduces in index order, so the outcome does not depend on the
// thread interleaving.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
    const unsigned workers = static_cast<unsigned>(
        std::min<std::size_t>(thread_count(), n == 0 ? 1 : n));
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace secrelay::detail

#endif
