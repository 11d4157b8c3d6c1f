#include "dewedge/common.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

extern "C" void openblas_set_num_threads(int);

namespace dewedge {

namespace {

std::atomic<int> g_max_workers{0};

int default_workers() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// GEMMs must not spawn their own threads: all parallelism is managed here
// so that worker count never changes summation order.
struct BlasInit {
    BlasInit() { openblas_set_num_threads(1); }
};
BlasInit g_blas_init;

}  // namespace

std::string to_string(const Dims3& dims) {
    return "(" + std::to_string(dims.d) + ", " + std::to_string(dims.h) + ", " +
           std::to_string(dims.w) + ")";
}

void set_max_workers(int workers) {
    g_max_workers.store(workers < 1 ? 1 : workers);
}

int max_workers() {
    int w = g_max_workers.load();
    return w > 0 ? w : default_workers();
}

void parallel_chunks(std::int64_t n, int workers,
                     const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (workers <= 0) workers = max_workers();
    int nthreads = static_cast<int>(std::min<std::int64_t>(workers, n));
    if (nthreads <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::int64_t base = n / nthreads, rem = n % nthreads;
    std::int64_t begin = 0;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < nthreads; ++t) {
        std::int64_t len = base + (t < rem ? 1 : 0);
        std::int64_t end = begin + len;
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto splitmix = [](std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t state = seed;
    std::uint64_t out = splitmix(state);
    state ^= a + 0x9e3779b97f4a7c15ULL;
    out ^= splitmix(state);
    state ^= b + 0xc2b2ae3d27d4eb4fULL;
    out ^= splitmix(state);
    state ^= c + 0x165667b19e3779f9ULL;
    out ^= splitmix(state);
    return out;
}

}  // namespace dewedge
