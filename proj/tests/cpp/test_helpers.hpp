#pragma once

#include <random>

#include "dewedge/volume.hpp"

namespace dewedge::testing {

inline Volume random_volume(Dims3 dims, std::uint64_t seed, double voxel = 1.0) {
    Volume v(dims, voxel);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& x : v.data) x = gauss(rng);
    return v;
}

// Smooth random volume: a handful of Gaussian blobs.
inline Volume blob_volume(Dims3 dims, std::uint64_t seed, int blobs = 6, double voxel = 1.0,
                          double min_width = 2.0, double max_width = 4.0) {
    Volume v(dims, voxel);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.25, 0.75);
    std::uniform_real_distribution<double> wd(min_width, max_width);
    for (int b = 0; b < blobs; ++b) {
        const double cx = uni(rng) * static_cast<double>(dims.w - 1);
        const double cy = uni(rng) * static_cast<double>(dims.h - 1);
        const double cz = uni(rng) * static_cast<double>(dims.d - 1);
        const double width = wd(rng);
        for (std::int64_t z = 0; z < dims.d; ++z)
            for (std::int64_t y = 0; y < dims.h; ++y)
                for (std::int64_t x = 0; x < dims.w; ++x) {
                    const double dx = static_cast<double>(x) - cx;
                    const double dy = static_cast<double>(y) - cy;
                    const double dz = static_cast<double>(z) - cz;
                    v.at(z, y, x) += std::exp(-(dx * dx + dy * dy + dz * dz) / (2 * width * width));
                }
    }
    return v;
}

inline double rel_rms_diff(const Volume& a, const Volume& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        num += d * d;
        den += b.data[i] * b.data[i];
    }
    return std::sqrt(num / (den > 0.0 ? den : 1.0));
}

inline double max_abs_diff(const Volume& a, const Volume& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace dewedge::testing
