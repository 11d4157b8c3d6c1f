#include "dewedge/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dewedge/fft.hpp"
#include "dewedge/subtomo.hpp"

namespace dewedge {

double cc(const Volume& v, const Volume& w) {
    if (v.dims != w.dims) throw invalid_input("cc: shape mismatch");
    const double mv = volume_mean(v), mw = volume_mean(w);
    double num = 0.0, nv = 0.0, nw = 0.0;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const double a = v.data[i] - mv, b = w.data[i] - mw;
        num += a * b;
        nv += a * a;
        nw += b * b;
    }
    if (!(nv > 0.0) || !(nw > 0.0)) throw invalid_input("cc: zero-variance input");
    return num / std::sqrt(nv * nw);
}

double masked_cc(const Volume& v, const Volume& w, const FourierMask& m) {
    return cc(apply_wedge(v, m), apply_wedge(w, m));
}

FSCCurve fsc_curve(const Volume& v, const Volume& w, const FourierMask* region) {
    if (v.dims != w.dims) throw invalid_input("fsc_curve: shape mismatch");
    if (region && region->dims != v.dims) throw invalid_input("fsc_curve: region shape mismatch");
    const SpectralVolume fv = to_fourier(v);
    const SpectralVolume fw = to_fourier(w);

    const std::int64_t max_shell =
        std::min({v.dims.d, v.dims.h, v.dims.w}) / 2;
    std::vector<double> num(static_cast<std::size_t>(max_shell) + 1, 0.0);
    std::vector<double> den_v(num.size(), 0.0), den_w(num.size(), 0.0);
    std::vector<std::int64_t> count(num.size(), 0);

    std::size_t idx = 0;
    for (std::int64_t qz = 0; qz < v.dims.d; ++qz) {
        const double kz = static_cast<double>(signed_freq(qz, v.dims.d));
        for (std::int64_t qy = 0; qy < v.dims.h; ++qy) {
            const double ky = static_cast<double>(signed_freq(qy, v.dims.h));
            for (std::int64_t qx = 0; qx < v.dims.w; ++qx, ++idx) {
                if (region && !region->keep[idx]) continue;
                const double kx = static_cast<double>(signed_freq(qx, v.dims.w));
                const auto shell = static_cast<std::int64_t>(
                    std::llround(std::sqrt(kx * kx + ky * ky + kz * kz)));
                if (shell > max_shell) continue;
                const auto s = static_cast<std::size_t>(shell);
                num[s] += (fv.data[idx] * std::conj(fw.data[idx])).real();
                den_v[s] += std::norm(fv.data[idx]);
                den_w[s] += std::norm(fw.data[idx]);
                count[s]++;
            }
        }
    }

    const std::int64_t min_bins = region ? 8 : 1;
    FSCCurve c;
    for (std::int64_t r = 0; r <= max_shell; ++r) {
        const auto s = static_cast<std::size_t>(r);
        c.radii.push_back(r);
        const double den = std::sqrt(den_v[s] * den_w[s]);
        const bool usable = count[s] >= min_bins && den > 0.0;
        c.correlation.push_back(usable ? num[s] / den : 0.0);
        c.valid.push_back(usable);
    }
    return c;
}

double fsc_resolution(const FSCCurve& c, double threshold, double voxel_size, std::int64_t box) {
    if (!(voxel_size > 0.0) || box < 1) throw invalid_input("fsc_resolution: bad voxel/box");
    // walk consecutive valid shells starting from radius 1
    double prev_r = 0.0, prev_c = 1.0;
    bool any = false;
    for (std::size_t i = 0; i < c.radii.size(); ++i) {
        if (!c.valid[i] || c.radii[i] < 1) continue;
        any = true;
        const double r = static_cast<double>(c.radii[i]);
        const double corr = c.correlation[i];
        if (corr < threshold) {
            const double span = prev_c - corr;
            const double frac = span > 0.0 ? (prev_c - threshold) / span : 0.0;
            const double r_cross = prev_r + frac * (r - prev_r);
            if (r_cross <= 0.0) return 2.0 * voxel_size;
            return static_cast<double>(box) * voxel_size / r_cross;
        }
        prev_r = r;
        prev_c = corr;
    }
    if (!any) throw invalid_input("fsc_resolution: curve has no valid shells");
    return 2.0 * voxel_size;  // never crossed: resolution at Nyquist
}

ParticleSet particles_in_bounds(const ParticleSet& particles, const Dims3& dims,
                                std::int64_t cube) {
    ParticleSet out;
    const std::int64_t half = cube / 2;
    for (const auto& p : particles.particles) {
        const auto cxi = static_cast<std::int64_t>(std::llround(p.center[0]));
        const auto cyi = static_cast<std::int64_t>(std::llround(p.center[1]));
        const auto czi = static_cast<std::int64_t>(std::llround(p.center[2]));
        if (cxi - half < 0 || cyi - half < 0 || czi - half < 0 || cxi - half + cube > dims.w ||
            cyi - half + cube > dims.h || czi - half + cube > dims.d)
            continue;
        out.particles.push_back(p);
    }
    return out;
}

double particle_fsc(const Volume& tomo, const Volume& gt, const ParticleSet& particles,
                    std::int64_t cube, double threshold, const FourierMask* region) {
    if (tomo.dims != gt.dims) throw invalid_input("particle_fsc: shape mismatch");
    if (particles.particles.empty()) throw invalid_input("particle_fsc: empty particle set");
    const std::int64_t half = cube / 2;
    double acc = 0.0;
    for (const auto& p : particles.particles) {
        const std::array<std::int64_t, 3> corner = {
            static_cast<std::int64_t>(std::llround(p.center[2])) - half,
            static_cast<std::int64_t>(std::llround(p.center[1])) - half,
            static_cast<std::int64_t>(std::llround(p.center[0])) - half};
        Volume ct = extract_cube(tomo, corner, cube);
        Volume cg = extract_cube(gt, corner, cube);
        FSCCurve curve = fsc_curve(ct, cg, region);
        acc += fsc_resolution(curve, threshold, tomo.voxel_size, cube);
    }
    return acc / static_cast<double>(particles.particles.size());
}

}  // namespace dewedge
