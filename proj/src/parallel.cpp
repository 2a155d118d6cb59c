#include "nashbsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace nashbsde {

namespace {

std::atomic<int> g_threads{0};

int resolved_threads() {
    const int requested = g_threads.load();
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void run_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& chunk_body) {
    const int workers = std::min<int>(resolved_threads(), static_cast<int>(n_chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) chunk_body(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                chunk_body(c);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n_chunks);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

void set_thread_count(int threads) { g_threads.store(std::max(0, threads)); }

int thread_count() { return resolved_threads(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
    run_chunks(n_chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunkSize;
        body(begin, std::min(n, begin + kChunkSize));
    });
}

double chunked_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& body) {
    const std::size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
    std::vector<double> partial(n_chunks, 0.0);
    run_chunks(n_chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunkSize;
        partial[c] = body(begin, std::min(n, begin + kChunkSize));
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace nashbsde
