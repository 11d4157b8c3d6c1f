#pragma once

#include <cstdint>
#include <vector>

#include "dewedge/geometry.hpp"
#include "dewedge/volume.hpp"

namespace dewedge {

// Generic binary Fourier-domain mask; entries are 0 or 1 over DFT bins.
struct FourierMask {
    Dims3 dims;
    std::vector<std::uint8_t> keep;

    FourierMask() = default;
    FourierMask(Dims3 d, std::uint8_t fill)
        : dims(d), keep(static_cast<std::size_t>(d.total()), fill) {}

    std::uint8_t at(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return keep[static_cast<std::size_t>((z * dims.h + y) * dims.w + x)];
    }
    std::uint8_t& at(std::int64_t z, std::int64_t y, std::int64_t x) {
        return keep[static_cast<std::size_t>((z * dims.h + y) * dims.w + x)];
    }
    std::int64_t count_kept() const;
};

FourierMask complement(const FourierMask& m);
FourierMask intersect(const FourierMask& a, const FourierMask& b);
bool masks_equal(const FourierMask& a, const FourierMask& b);

// Missing-wedge mask: keeps frequency k iff the back-rotated k satisfies
// |k_z| <= tan(alpha_max) * |k_x| (beam axis z, tilt axis y). Evaluated
// analytically per bin; rotated masks are never resampled from a grid.
struct WedgeMask : FourierMask {
    double alpha_max_deg = 90.0;
    EulerAngles orientation;
};

WedgeMask wedge_mask(Dims3 shape, double alpha_max_deg, const EulerAngles& orientation = {});

// Projects the volume onto the mask: F(result) = keep .* F(v). Idempotent.
Volume apply_wedge(const Volume& v, const FourierMask& m);

// keep .* F(v) without the inverse transform.
SpectralVolume apply_mask(const SpectralVolume& s, const FourierMask& m);

}  // namespace dewedge
