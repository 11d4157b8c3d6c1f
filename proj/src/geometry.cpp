#include "dewedge/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace dewedge {

Mat3 Mat3::transpose() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
}

std::array<double, 3> Mat3::apply(const std::array<double, 3>& v) const {
    return {(*this)(0, 0) * v[0] + (*this)(0, 1) * v[1] + (*this)(0, 2) * v[2],
            (*this)(1, 0) * v[0] + (*this)(1, 1) * v[1] + (*this)(1, 2) * v[2],
            (*this)(2, 0) * v[0] + (*this)(2, 1) * v[1] + (*this)(2, 2) * v[2]};
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a(r, k) * b(k, c);
            out(r, c) = s;
        }
    return out;
}

namespace {

Mat3 rot_z(double a) {
    Mat3 r;
    double c = std::cos(a), s = std::sin(a);
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    return r;
}

Mat3 rot_y(double a) {
    Mat3 r;
    double c = std::cos(a), s = std::sin(a);
    r(0, 0) = c;
    r(0, 2) = s;
    r(2, 0) = -s;
    r(2, 2) = c;
    return r;
}

}  // namespace

Mat3 rotation_matrix(const EulerAngles& angles) {
    if (angles.is_identity()) return Mat3{};
    return rot_z(angles.alpha) * rot_y(angles.beta) * rot_z(angles.gamma);
}

EulerAngles euler_from_matrix(const Mat3& r) {
    EulerAngles e;
    double r33 = std::clamp(r(2, 2), -1.0, 1.0);
    e.beta = std::acos(r33);
    double sb = std::sin(e.beta);
    if (sb > 1e-10) {
        e.alpha = std::atan2(r(1, 2), r(0, 2));
        e.gamma = std::atan2(r(2, 1), -r(2, 0));
    } else if (r33 > 0.0) {
        // beta ~ 0: only alpha + gamma is determined
        e.beta = 0.0;
        e.alpha = std::atan2(r(1, 0), r(0, 0));
        e.gamma = 0.0;
    } else {
        // beta ~ pi: only alpha - gamma is determined
        e.beta = std::acos(-1.0);
        e.alpha = std::atan2(-r(1, 0), -r(0, 0));
        e.gamma = 0.0;
    }
    return e;
}

Volume rotate_volume(const Volume& v, const EulerAngles& angles) {
    if (!v.dims.cubic())
        throw invalid_input("rotate_volume: cubic volume required, got " + to_string(v.dims));
    if (angles.is_identity()) return v;

    const std::int64_t n = v.dims.d;
    const double center = static_cast<double>(n - 1) / 2.0;
    const Mat3 inv = rotation_matrix(angles).transpose();
    Volume out(v.dims, v.voxel_size);

    parallel_chunks(n, 0, [&](std::int64_t z0, std::int64_t z1) {
        for (std::int64_t z = z0; z < z1; ++z) {
            for (std::int64_t y = 0; y < n; ++y) {
                for (std::int64_t x = 0; x < n; ++x) {
                    const std::array<double, 3> p = {static_cast<double>(x) - center,
                                                     static_cast<double>(y) - center,
                                                     static_cast<double>(z) - center};
                    const std::array<double, 3> q = inv.apply(p);
                    const double sx = q[0] + center, sy = q[1] + center, sz = q[2] + center;
                    const std::int64_t ix = static_cast<std::int64_t>(std::floor(sx));
                    const std::int64_t iy = static_cast<std::int64_t>(std::floor(sy));
                    const std::int64_t iz = static_cast<std::int64_t>(std::floor(sz));
                    const double fx = sx - static_cast<double>(ix);
                    const double fy = sy - static_cast<double>(iy);
                    const double fz = sz - static_cast<double>(iz);

                    double acc = 0.0;
                    for (int dz = 0; dz < 2; ++dz) {
                        const std::int64_t cz = iz + dz;
                        if (cz < 0 || cz >= n) continue;
                        const double wz = dz ? fz : 1.0 - fz;
                        for (int dy = 0; dy < 2; ++dy) {
                            const std::int64_t cy = iy + dy;
                            if (cy < 0 || cy >= n) continue;
                            const double wy = dy ? fy : 1.0 - fy;
                            for (int dx = 0; dx < 2; ++dx) {
                                const std::int64_t cx = ix + dx;
                                if (cx < 0 || cx >= n) continue;
                                const double wx = dx ? fx : 1.0 - fx;
                                acc += wz * wy * wx * v.at(cz, cy, cx);
                            }
                        }
                    }
                    out.at(z, y, x) = acc;
                }
            }
        }
    });
    return out;
}

EulerAngles sample_rotation(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double u1 = uni(rng), u2 = uni(rng), u3 = uni(rng);
    const double two_pi = 2.0 * std::acos(-1.0);
    // Shoemake's uniform quaternion construction
    const double qx = std::sqrt(1.0 - u1) * std::sin(two_pi * u2);
    const double qy = std::sqrt(1.0 - u1) * std::cos(two_pi * u2);
    const double qz = std::sqrt(u1) * std::sin(two_pi * u3);
    const double qw = std::sqrt(u1) * std::cos(two_pi * u3);

    Mat3 r;
    r(0, 0) = 1 - 2 * (qy * qy + qz * qz);
    r(0, 1) = 2 * (qx * qy - qz * qw);
    r(0, 2) = 2 * (qx * qz + qy * qw);
    r(1, 0) = 2 * (qx * qy + qz * qw);
    r(1, 1) = 1 - 2 * (qx * qx + qz * qz);
    r(1, 2) = 2 * (qy * qz - qx * qw);
    r(2, 0) = 2 * (qx * qz - qy * qw);
    r(2, 1) = 2 * (qy * qz + qx * qw);
    r(2, 2) = 1 - 2 * (qx * qx + qy * qy);
    return euler_from_matrix(r);
}

}  // namespace dewedge
