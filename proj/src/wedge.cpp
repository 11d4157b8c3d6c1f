#include "dewedge/wedge.hpp"

#include <cmath>

#include "dewedge/fft.hpp"

namespace dewedge {

std::int64_t FourierMask::count_kept() const {
    std::int64_t n = 0;
    for (std::uint8_t k : keep) n += k;
    return n;
}

FourierMask complement(const FourierMask& m) {
    FourierMask out;
    out.dims = m.dims;
    out.keep.resize(m.keep.size());
    for (std::size_t i = 0; i < m.keep.size(); ++i) out.keep[i] = m.keep[i] ? 0 : 1;
    return out;
}

FourierMask intersect(const FourierMask& a, const FourierMask& b) {
    if (a.dims != b.dims) throw invalid_input("intersect: mask shape mismatch");
    FourierMask out;
    out.dims = a.dims;
    out.keep.resize(a.keep.size());
    for (std::size_t i = 0; i < a.keep.size(); ++i) out.keep[i] = a.keep[i] & b.keep[i];
    return out;
}

bool masks_equal(const FourierMask& a, const FourierMask& b) {
    return a.dims == b.dims && a.keep == b.keep;
}

WedgeMask wedge_mask(Dims3 shape, double alpha_max_deg, const EulerAngles& orientation) {
    if (!(alpha_max_deg > 0.0) || alpha_max_deg > 90.0)
        throw invalid_input("wedge_mask: alpha_max must be in (0, 90], got " +
                            std::to_string(alpha_max_deg));
    WedgeMask m;
    m.dims = shape;
    m.alpha_max_deg = alpha_max_deg;
    m.orientation = orientation;
    m.keep.assign(static_cast<std::size_t>(shape.total()), 1);
    if (alpha_max_deg == 90.0) return m;  // full coverage, nothing missing

    const double tan_alpha = std::tan(alpha_max_deg * std::acos(-1.0) / 180.0);
    // Back-rotate each frequency into the canonical frame before testing.
    const Mat3 inv = rotation_matrix(orientation).transpose();

    // A Nyquist bin (q = n/2 on an even axis) aliases both +n/2 and -n/2;
    // keeping the bin if any aliased frequency passes keeps mask(k) =
    // mask(-k) exact on those planes.
    auto interpretations = [](std::int64_t q, std::int64_t n, double out[2]) -> int {
        if (n % 2 == 0 && q == n / 2) {
            out[0] = -static_cast<double>(n) / 2.0;
            out[1] = static_cast<double>(n) / 2.0;
            return 2;
        }
        out[0] = static_cast<double>(signed_freq(q, n));
        return 1;
    };

    std::size_t idx = 0;
    for (std::int64_t qz = 0; qz < shape.d; ++qz) {
        double kz[2];
        const int nz = interpretations(qz, shape.d, kz);
        for (std::int64_t qy = 0; qy < shape.h; ++qy) {
            double ky[2];
            const int ny = interpretations(qy, shape.h, ky);
            for (std::int64_t qx = 0; qx < shape.w; ++qx, ++idx) {
                double kx[2];
                const int nx = interpretations(qx, shape.w, kx);
                std::uint8_t keep = 0;
                for (int iz = 0; iz < nz && !keep; ++iz)
                    for (int iy = 0; iy < ny && !keep; ++iy)
                        for (int ix = 0; ix < nx && !keep; ++ix) {
                            const std::array<double, 3> k = inv.apply({kx[ix], ky[iy], kz[iz]});
                            if (std::abs(k[2]) <= tan_alpha * std::abs(k[0])) keep = 1;
                        }
                m.keep[idx] = keep;
            }
        }
    }
    return m;
}

SpectralVolume apply_mask(const SpectralVolume& s, const FourierMask& m) {
    if (s.dims != m.dims) throw invalid_input("apply_mask: shape mismatch");
    SpectralVolume out = s;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (!m.keep[i]) out.data[i] = 0.0;
    return out;
}

Volume apply_wedge(const Volume& v, const FourierMask& m) {
    if (v.dims != m.dims)
        throw invalid_input("apply_wedge: volume " + to_string(v.dims) + " vs mask " +
                            to_string(m.dims));
    SpectralVolume s = to_fourier(v);
    for (std::size_t i = 0; i < s.data.size(); ++i)
        if (!m.keep[i]) s.data[i] = 0.0;
    return from_fourier(s);
}

}  // namespace dewedge
