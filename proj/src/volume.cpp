#include "dewedge/volume.hpp"

#include <cmath>

namespace dewedge {

bool all_finite(const Volume& v) {
    for (double x : v.data)
        if (!std::isfinite(x)) return false;
    return true;
}

double volume_mean(const Volume& v) {
    if (v.data.empty()) throw invalid_input("mean of empty volume");
    double s = 0.0;
    for (double x : v.data) s += x;
    return s / static_cast<double>(v.data.size());
}

double volume_variance(const Volume& v) {
    double mu = volume_mean(v);
    double s = 0.0;
    for (double x : v.data) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.data.size());
}

double volume_rms(const Volume& v) {
    double s = 0.0;
    for (double x : v.data) s += x * x;
    return std::sqrt(s / static_cast<double>(v.data.size()));
}

double volume_dot(const Volume& a, const Volume& b) {
    if (a.dims != b.dims) throw invalid_input("volume_dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

Volume crop_center(const Volume& v, Dims3 target) {
    if (target.d > v.dims.d || target.h > v.dims.h || target.w > v.dims.w)
        throw invalid_input("crop_center: target " + to_string(target) + " exceeds source " +
                            to_string(v.dims));
    std::int64_t oz = (v.dims.d - target.d) / 2;
    std::int64_t oy = (v.dims.h - target.h) / 2;
    std::int64_t ox = (v.dims.w - target.w) / 2;
    Volume out(target, v.voxel_size);
    for (std::int64_t z = 0; z < target.d; ++z)
        for (std::int64_t y = 0; y < target.h; ++y) {
            const double* src = &v.at(z + oz, y + oy, ox);
            double* dst = &out.at(z, y, 0);
            for (std::int64_t x = 0; x < target.w; ++x) dst[x] = src[x];
        }
    return out;
}

}  // namespace dewedge
