#pragma once

#include <cstdint>
#include <thread>
#include <vector>

#include "bpve/rng.hpp"

namespace bpve {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs `body(replicate_index, stream, acc)` for indices 0..count-1, sharded
/// across workers. Each replicate owns the stream derived from its index, and
/// per-worker accumulators are merged in worker order, so results do not
/// depend on scheduling. Acc needs a default constructor and merge_from().
template <class Acc, class Body>
Acc parallel_replicates(std::uint64_t seed, long long count, int workers, Body body) {
    const int t = std::min<long long>(resolve_workers(workers), std::max<long long>(1, count));
    std::vector<Acc> partial(static_cast<std::size_t>(t));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t));
    for (int w = 0; w < t; ++w) {
        pool.emplace_back([&, w]() {
            Acc& acc = partial[static_cast<std::size_t>(w)];
            for (long long idx = w; idx < count; idx += t) {
                RandomStream stream(seed, static_cast<std::uint64_t>(idx));
                body(idx, stream, acc);
            }
        });
    }
    for (auto& th : pool) th.join();
    Acc out = std::move(partial[0]);
    for (int w = 1; w < t; ++w) out.merge_from(partial[static_cast<std::size_t>(w)]);
    return out;
}

}  // namespace bpve
