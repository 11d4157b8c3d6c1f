#pragma once

#include <array>
#include <random>

#include "dewedge/volume.hpp"

namespace dewedge {

// Intrinsic ZYZ Euler angles in radians: R = Rz(alpha) * Ry(beta) * Rz(gamma).
// (0, 0, 0) is the identity rotation.
struct EulerAngles {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    bool is_identity() const { return alpha == 0.0 && beta == 0.0 && gamma == 0.0; }
};

// Row-major 3x3 rotation matrix acting on (x, y, z) column vectors.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
    double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }

    Mat3 transpose() const;
    std::array<double, 3> apply(const std::array<double, 3>& v) const;
};

Mat3 operator*(const Mat3& a, const Mat3& b);

Mat3 rotation_matrix(const EulerAngles& angles);
EulerAngles euler_from_matrix(const Mat3& r);

// Rotates the volume contents by the given angles about the grid center
// ((n-1)/2 per axis) using trilinear interpolation; samples falling outside
// the source grid read as zero. Requires a cubic volume.
Volume rotate_volume(const Volume& v, const EulerAngles& angles);

// Haar-uniform random rotation (uniform quaternion), returned as ZYZ angles.
EulerAngles sample_rotation(std::mt19937_64& rng);

}  // namespace dewedge
