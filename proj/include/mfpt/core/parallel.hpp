#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace mfpt {

// Deterministic parallel map: slots are claimed atomically but each index is
// computed independently, so results are identical for any worker count.
// Reductions must happen afterwards, in index order.
template <typename Fn>
void parallel_for(size_t count, int workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const int spawn = static_cast<int>(std::min<size_t>(workers, count));
    for (int w = 0; w < spawn; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= count) break;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mfpt
