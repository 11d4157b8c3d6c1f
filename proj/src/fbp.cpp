#include "dewedge/fbp.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>

namespace dewedge {

std::string to_string(FilterKind k) { return k == FilterKind::ramp ? "ramp" : "hamming"; }

FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "ramp") return FilterKind::ramp;
    if (s == "hamming") return FilterKind::hamming;
    throw invalid_input("unknown FBP filter: " + s);
}

namespace {

std::int64_t next_pow2(std::int64_t n) {
    std::int64_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Frequency response of the band-limited ramp (Ram-Lak) kernel sampled on
// the padded circular domain: h[0] = 1/4, h[odd k] = -1/(pi k)^2, h[even] = 0.
// Sampling |f| directly instead would bias the lowest frequencies. The
// hamming variant applies a 0.54 + 0.46 cos window on top.
std::vector<double> make_filter(std::int64_t npad, FilterKind kind) {
    const double pi = std::acos(-1.0);
    std::vector<std::complex<double>> h(static_cast<std::size_t>(npad), 0.0);
    h[0] = 0.25;
    for (std::int64_t k = 1; k < npad / 2 + 1; ++k) {
        if (k % 2 == 0) continue;
        const double val = -1.0 / (pi * pi * static_cast<double>(k) * static_cast<double>(k));
        h[static_cast<std::size_t>(k)] = val;
        h[static_cast<std::size_t>(npad - k)] = val;
    }
    fftw_plan plan;
    {
        static std::mutex plan_mutex;
        std::lock_guard<std::mutex> lock(plan_mutex);
        plan = fftw_plan_dft_1d(static_cast<int>(npad), reinterpret_cast<fftw_complex*>(h.data()),
                                reinterpret_cast<fftw_complex*>(h.data()), FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        static std::mutex plan_mutex;
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(plan);
    }
    std::vector<double> f(static_cast<std::size_t>(npad));
    for (std::int64_t q = 0; q < npad; ++q) {
        double val = h[static_cast<std::size_t>(q)].real();  // kernel is even: response is real
        if (kind == FilterKind::hamming) {
            const std::int64_t k = std::min(q, npad - q);
            const double freq = static_cast<double>(k) / static_cast<double>(npad);
            val *= 0.54 + 0.46 * std::cos(2.0 * pi * freq);
        }
        f[static_cast<std::size_t>(q)] = val;
    }
    return f;
}

struct Filtered {
    // filtered rows on the extended support: per projection, height rows of
    // length npad with the detector window starting at `offset`
    std::vector<std::vector<double>> rows;  // [tilt][y * npad + x]
    std::vector<double> angles;
    std::int64_t npad = 0, offset = 0, width = 0, height = 0;
};

Filtered filter_extended(const TiltSeries& t, FilterKind filter) {
    if (t.projections.empty()) throw invalid_input("fbp: empty tilt series");
    const std::int64_t w = t.projections.front().width;
    const std::int64_t h = t.projections.front().height;
    for (const auto& p : t.projections)
        if (p.width != w || p.height != h)
            throw invalid_input("fbp: inconsistent projection shapes");

    const std::int64_t npad = next_pow2(4 * w);
    const std::int64_t offset = (npad - w) / 2;  // room for the filter tails on both sides
    const std::vector<double> filt = make_filter(npad, filter);

    fftw_plan fwd, bwd;
    {
        static std::mutex plan_mutex;
        std::lock_guard<std::mutex> lock(plan_mutex);
        std::vector<std::complex<double>> scratch(static_cast<std::size_t>(npad));
        auto* raw = reinterpret_cast<fftw_complex*>(scratch.data());
        fwd = fftw_plan_dft_1d(static_cast<int>(npad), raw, raw, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(static_cast<int>(npad), raw, raw, FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    Filtered out;
    out.npad = npad;
    out.offset = offset;
    out.width = w;
    out.height = h;
    out.rows.resize(t.projections.size());
    out.angles.resize(t.projections.size());

    parallel_chunks(static_cast<std::int64_t>(t.projections.size()), 0,
                    [&](std::int64_t k0, std::int64_t k1) {
        std::vector<std::complex<double>> row(static_cast<std::size_t>(npad));
        for (std::int64_t k = k0; k < k1; ++k) {
            const Projection& proj = t.projections[static_cast<std::size_t>(k)];
            out.angles[static_cast<std::size_t>(k)] = proj.angle_deg;
            auto& dst = out.rows[static_cast<std::size_t>(k)];
            dst.assign(static_cast<std::size_t>(h * npad), 0.0);
            for (std::int64_t y = 0; y < h; ++y) {
                std::fill(row.begin(), row.end(), std::complex<double>(0.0));
                for (std::int64_t x = 0; x < w; ++x)
                    row[static_cast<std::size_t>(offset + x)] = proj.at(y, x);
                auto* raw = reinterpret_cast<fftw_complex*>(row.data());
                fftw_execute_dft(fwd, raw, raw);
                for (std::int64_t q = 0; q < npad; ++q)
                    row[static_cast<std::size_t>(q)] *= filt[static_cast<std::size_t>(q)];
                fftw_execute_dft(bwd, raw, raw);
                const double scale = 1.0 / static_cast<double>(npad);
                for (std::int64_t x = 0; x < npad; ++x)
                    dst[static_cast<std::size_t>(y * npad + x)] =
                        row[static_cast<std::size_t>(x)].real() * scale;
            }
        }
    });
    return out;
}

Volume back_project_impl(const Filtered& f, Dims3 out_shape, double voxel_size) {
    if (out_shape.h != f.height)
        throw invalid_input("fbp: output height must equal projection height");

    Volume vol(out_shape, voxel_size);
    const double pi = std::acos(-1.0);
    const double scale = pi / static_cast<double>(f.rows.size());
    const double cx = static_cast<double>(out_shape.w - 1) / 2.0;
    const double cz = static_cast<double>(out_shape.d - 1) / 2.0;
    const double px_center = static_cast<double>(f.width - 1) / 2.0 + static_cast<double>(f.offset);

    struct AngleTrig {
        double c, s;
        const std::vector<double>* rows;
    };
    std::vector<AngleTrig> trig;
    trig.reserve(f.rows.size());
    for (std::size_t k = 0; k < f.rows.size(); ++k) {
        const double rad = f.angles[k] * pi / 180.0;
        trig.push_back({std::cos(rad), std::sin(rad), &f.rows[k]});
    }

    const std::int64_t npad = f.npad;
    parallel_chunks(out_shape.d, 0, [&](std::int64_t z0, std::int64_t z1) {
        for (std::int64_t z = z0; z < z1; ++z) {
            const double uz = static_cast<double>(z) - cz;
            for (std::int64_t y = 0; y < out_shape.h; ++y) {
                double* out_row = &vol.at(z, y, 0);
                for (const auto& a : trig) {
                    // projection x-coordinate of this voxel under Ry(-theta)
                    const double base = -a.s * uz + px_center;
                    const double* prow = a.rows->data() + y * npad;
                    for (std::int64_t x = 0; x < out_shape.w; ++x) {
                        const double ux = static_cast<double>(x) - cx;
                        const double sx = a.c * ux + base;
                        const std::int64_t ix = static_cast<std::int64_t>(std::floor(sx));
                        if (ix < -1 || ix >= npad) continue;
                        const double fx = sx - static_cast<double>(ix);
                        double val = 0.0;
                        if (ix >= 0) val += (1.0 - fx) * prow[ix];
                        if (ix + 1 < npad) val += fx * prow[ix + 1];
                        out_row[x] += val;
                    }
                }
                for (std::int64_t x = 0; x < out_shape.w; ++x) out_row[x] *= scale;
            }
        }
    });
    return vol;
}

}  // namespace

TiltSeries filter_projections(const TiltSeries& t, FilterKind filter) {
    Filtered f = filter_extended(t, filter);
    TiltSeries out = t;
    for (std::size_t k = 0; k < out.projections.size(); ++k) {
        auto& proj = out.projections[k];
        proj.frames.clear();  // filtered projections are single images
        for (std::int64_t y = 0; y < f.height; ++y)
            for (std::int64_t x = 0; x < f.width; ++x)
                proj.at(y, x) = f.rows[k][static_cast<std::size_t>(y * f.npad + f.offset + x)];
    }
    return out;
}

Volume back_project(const TiltSeries& t, Dims3 out_shape, double voxel_size) {
    if (t.projections.empty()) throw invalid_input("back_project: empty tilt series");
    // pre-filtered input: embed the rows on the extended support unchanged
    Filtered f;
    f.width = t.projections.front().width;
    f.height = t.projections.front().height;
    f.npad = f.width;
    f.offset = 0;
    for (const auto& p : t.projections) {
        if (p.width != f.width || p.height != f.height)
            throw invalid_input("back_project: inconsistent projection shapes");
        f.rows.push_back(p.data);
        f.angles.push_back(p.angle_deg);
    }
    return back_project_impl(f, out_shape, voxel_size);
}

Volume fbp(const TiltSeries& t, FilterKind filter, Dims3 out_shape, double voxel_size) {
    return back_project_impl(filter_extended(t, filter), out_shape, voxel_size);
}

}  // namespace dewedge
