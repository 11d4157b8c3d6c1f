#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace dewedge {

// Thrown on contract violations (bad shapes, bad config, unreadable files).
// The CLI maps this to exit code 2.
class invalid_input : public std::invalid_argument {
public:
    explicit invalid_input(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown when a computation produces non-finite or otherwise unusable
// numbers (diverging fit, non-Hermitian spectrum). CLI exit code 3.
class numeric_failure : public std::runtime_error {
public:
    explicit numeric_failure(const std::string& msg) : std::runtime_error(msg) {}
};

struct Dims3 {
    std::int64_t d = 0;  // z (beam axis)
    std::int64_t h = 0;  // y (tilt axis)
    std::int64_t w = 0;  // x

    std::int64_t total() const { return d * h * w; }
    bool operator==(const Dims3&) const = default;
    bool cubic() const { return d == h && h == w; }
};

std::string to_string(const Dims3& dims);

// Maximum worker threads used by parallel sections. All parallel code is
// written so results are identical for any worker count; 1 forces the
// serial reference path.
void set_max_workers(int workers);
int max_workers();

// Statically partitioned parallel loop over [0, n). fn(begin, end) is called
// on contiguous chunks; chunk boundaries depend only on n and the worker
// count, and workers never share output elements, so results do not depend
// on scheduling.
void parallel_chunks(std::int64_t n, int workers, const std::function<void(std::int64_t, std::int64_t)>& fn);

// SplitMix64 mixing, used to derive independent RNG streams from a base
// seed plus stream coordinates (epoch, sample index, ...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace dewedge
