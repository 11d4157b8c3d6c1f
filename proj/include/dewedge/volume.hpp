#pragma once

#include <complex>
#include <vector>

#include "dewedge/common.hpp"

namespace dewedge {

// Real-valued 3D grid with isotropic voxel spacing in Angstroms. Data is
// stored (z, y, x) with x fastest; z is the beam axis, y the tilt axis.
struct Volume {
    Dims3 dims;
    double voxel_size = 1.0;
    std::vector<double> data;

    Volume() = default;
    Volume(Dims3 d, double voxel, double fill = 0.0)
        : dims(d), voxel_size(voxel), data(static_cast<std::size_t>(d.total()), fill) {
        if (d.d < 1 || d.h < 1 || d.w < 1)
            throw invalid_input("Volume dimensions must be >= 1, got " + to_string(d));
        if (!(voxel > 0.0)) throw invalid_input("voxel_size must be positive");
    }

    double& at(std::int64_t z, std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>((z * dims.h + y) * dims.w + x)];
    }
    const double& at(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>((z * dims.h + y) * dims.w + x)];
    }
};

// Complex Fourier-domain counterpart of Volume. Convention: unnormalized
// forward transform, 1/(D*H*W) applied on the inverse. Frequencies are in
// standard DFT bin order (bin q maps to signed frequency q or q - n).
struct SpectralVolume {
    Dims3 dims;
    double voxel_size = 1.0;
    std::vector<std::complex<double>> data;

    std::complex<double>& at(std::int64_t kz, std::int64_t ky, std::int64_t kx) {
        return data[static_cast<std::size_t>((kz * dims.h + ky) * dims.w + kx)];
    }
    const std::complex<double>& at(std::int64_t kz, std::int64_t ky, std::int64_t kx) const {
        return data[static_cast<std::size_t>((kz * dims.h + ky) * dims.w + kx)];
    }
};

// Signed frequency of DFT bin q on an axis of length n.
inline std::int64_t signed_freq(std::int64_t q, std::int64_t n) {
    return q <= (n - 1) / 2 ? q : q - n;
}

bool all_finite(const Volume& v);
double volume_mean(const Volume& v);
double volume_variance(const Volume& v);  // population variance
double volume_rms(const Volume& v);
double volume_dot(const Volume& a, const Volume& b);

Volume crop_center(const Volume& v, Dims3 target);

}  // namespace dewedge
