#include "dewedge/subtomo.hpp"

#include <algorithm>
#include <cmath>

namespace dewedge {

std::string to_string(SplitMode m) { return m == SplitMode::even_odd ? "even_odd" : "frame_based"; }

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "even_odd") return SplitMode::even_odd;
    if (s == "frame_based") return SplitMode::frame_based;
    throw invalid_input("unknown split mode: " + s);
}

std::pair<TiltSeries, TiltSeries> split(const TiltSeries& t, SplitMode mode) {
    if (t.projections.empty()) throw invalid_input("split: empty tilt series");
    TiltSeries a, b;
    a.scheme = t.scheme;
    b.scheme = t.scheme;
    if (mode == SplitMode::even_odd) {
        for (std::size_t k = 0; k < t.projections.size(); ++k)
            (k % 2 == 0 ? a : b).projections.push_back(t.projections[k]);
    } else {
        a.scheme.frames_per_tilt = 1;
        b.scheme.frames_per_tilt = 1;
        for (const auto& p : t.projections) {
            if (p.frames.size() < 2)
                throw invalid_input("split: frame_based split requires >= 2 frames per tilt");
            Projection pa, pb;
            pa.height = pb.height = p.height;
            pa.width = pb.width = p.width;
            pa.angle_deg = pb.angle_deg = p.angle_deg;
            pa.data.assign(p.data.size(), 0.0);
            pb.data.assign(p.data.size(), 0.0);
            std::size_t na = 0, nb = 0;
            for (std::size_t f = 0; f < p.frames.size(); ++f) {
                auto& dst = (f % 2 == 0) ? pa : pb;
                (f % 2 == 0 ? na : nb)++;
                for (std::size_t i = 0; i < p.data.size(); ++i) dst.data[i] += p.frames[f][i];
            }
            for (auto& x : pa.data) x /= static_cast<double>(na);
            for (auto& x : pb.data) x /= static_cast<double>(nb);
            a.projections.push_back(std::move(pa));
            b.projections.push_back(std::move(pb));
        }
    }
    return {std::move(a), std::move(b)};
}

std::vector<std::int64_t> grid_positions(std::int64_t length, std::int64_t cube, std::int64_t overlap) {
    if (cube > length) throw invalid_input("extraction cube larger than volume axis");
    if (overlap < 0 || overlap >= cube) throw invalid_input("overlap must satisfy 0 <= overlap < cube");
    const std::int64_t stride = cube - overlap;
    std::vector<std::int64_t> pos;
    for (std::int64_t p = 0; p + cube <= length; p += stride) pos.push_back(p);
    if (pos.empty() || pos.back() + cube < length) pos.push_back(length - cube);
    return pos;
}

Volume extract_cube(const Volume& v, const std::array<std::int64_t, 3>& corner, std::int64_t cube) {
    if (corner[0] < 0 || corner[1] < 0 || corner[2] < 0 || corner[0] + cube > v.dims.d ||
        corner[1] + cube > v.dims.h || corner[2] + cube > v.dims.w)
        throw invalid_input("extract_cube: cube out of bounds");
    Volume out(Dims3{cube, cube, cube}, v.voxel_size);
    for (std::int64_t z = 0; z < cube; ++z)
        for (std::int64_t y = 0; y < cube; ++y) {
            const double* src = &v.at(corner[0] + z, corner[1] + y, corner[2]);
            double* dst = &out.at(z, y, 0);
            for (std::int64_t x = 0; x < cube; ++x) dst[x] = src[x];
        }
    return out;
}

std::vector<SubTomoPair> extract_pairs(const Volume& r0, const Volume& r1, const ExtractConfig& cfg) {
    if (r0.dims != r1.dims) throw invalid_input("extract_pairs: half-reconstructions differ in shape");
    if (cfg.content_mask && cfg.content_mask->dims != r0.dims)
        throw invalid_input("extract_pairs: content mask shape mismatch");

    const auto pz = grid_positions(r0.dims.d, cfg.cube_size, cfg.overlap);
    const auto py = grid_positions(r0.dims.h, cfg.cube_size, cfg.overlap);
    const auto px = grid_positions(r0.dims.w, cfg.cube_size, cfg.overlap);

    std::vector<SubTomoPair> pairs;
    for (std::int64_t z : pz)
        for (std::int64_t y : py)
            for (std::int64_t x : px) {
                if (cfg.content_mask) {
                    const Volume& m = *cfg.content_mask;
                    std::int64_t inside = 0;
                    for (std::int64_t dz = 0; dz < cfg.cube_size; ++dz)
                        for (std::int64_t dy = 0; dy < cfg.cube_size; ++dy)
                            for (std::int64_t dx = 0; dx < cfg.cube_size; ++dx)
                                if (m.at(z + dz, y + dy, x + dx) > 0.5) ++inside;
                    double fraction = static_cast<double>(inside) /
                                      static_cast<double>(cfg.cube_size * cfg.cube_size * cfg.cube_size);
                    if (fraction < cfg.min_content_fraction) continue;
                }
                SubTomoPair pair;
                pair.location = {z, y, x};
                pair.v0 = extract_cube(r0, pair.location, cfg.cube_size);
                pair.v1 = extract_cube(r1, pair.location, cfg.cube_size);
                pairs.push_back(std::move(pair));
            }
    return pairs;
}

Volume reassemble(const std::vector<Volume>& cubes,
                  const std::vector<std::array<std::int64_t, 3>>& locations, Dims3 full_shape,
                  std::int64_t* uncovered_out) {
    if (cubes.size() != locations.size())
        throw invalid_input("reassemble: cubes and locations differ in length");
    Volume out(full_shape, cubes.empty() ? 1.0 : cubes.front().voxel_size);
    std::vector<std::uint32_t> coverage(out.data.size(), 0);

    for (std::size_t i = 0; i < cubes.size(); ++i) {
        const Volume& c = cubes[i];
        if (!c.dims.cubic() || (i > 0 && c.dims != cubes[0].dims))
            throw invalid_input("reassemble: cubes must be congruent");
        const auto& loc = locations[i];
        const std::int64_t s = c.dims.d;
        if (loc[0] < 0 || loc[1] < 0 || loc[2] < 0 || loc[0] + s > full_shape.d ||
            loc[1] + s > full_shape.h || loc[2] + s > full_shape.w)
            throw invalid_input("reassemble: cube location out of bounds");
        for (std::int64_t z = 0; z < s; ++z)
            for (std::int64_t y = 0; y < s; ++y) {
                const double* src = &c.at(z, y, 0);
                const std::size_t base =
                    static_cast<std::size_t>(((loc[0] + z) * full_shape.h + loc[1] + y) * full_shape.w +
                                             loc[2]);
                for (std::int64_t x = 0; x < s; ++x) {
                    out.data[base + static_cast<std::size_t>(x)] += src[x];
                    coverage[base + static_cast<std::size_t>(x)]++;
                }
            }
    }

    std::int64_t uncovered = 0;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        if (coverage[i] == 0) {
            out.data[i] = 0.0;
            ++uncovered;
        } else {
            out.data[i] /= static_cast<double>(coverage[i]);
        }
    }
    if (uncovered_out) *uncovered_out = uncovered;
    return out;
}

NormStats compute_norm_stats(const std::vector<Volume>& inputs) {
    if (inputs.empty()) throw invalid_input("compute_norm_stats: empty input list");
    double mean_of_means = 0.0, mean_of_vars = 0.0;
    for (const auto& v : inputs) {
        mean_of_means += volume_mean(v);
        mean_of_vars += volume_variance(v);
    }
    mean_of_means /= static_cast<double>(inputs.size());
    mean_of_vars /= static_cast<double>(inputs.size());
    if (!(mean_of_vars > 0.0))
        throw numeric_failure("compute_norm_stats: all inputs constant (sigma = 0)");
    return NormStats{mean_of_means, std::sqrt(mean_of_vars)};
}

Volume standardize(const Volume& v, const NormStats& stats) {
    if (!(stats.sigma > 0.0)) throw invalid_input("standardize: sigma must be positive");
    Volume out = v;
    for (auto& x : out.data) x = (x - stats.mu) / stats.sigma;
    return out;
}

Volume normalize_tomogram(const Volume& r, const NormStats& target) {
    double var = volume_variance(r);
    if (!(var > 0.0)) throw numeric_failure("normalize_tomogram: zero-variance input");
    double mu = volume_mean(r);
    double scale = target.sigma / std::sqrt(var);
    Volume out = r;
    for (auto& x : out.data) x = (x - mu) * scale + target.mu;
    return out;
}

Volume make_content_mask(const Volume& v, double keep_quantile) {
    if (keep_quantile < 0.0 || keep_quantile >= 1.0)
        throw invalid_input("make_content_mask: quantile must be in [0, 1)");
    const double mu = volume_mean(v);
    // 3^3 box smoothing of |v - mean| as a cheap local signal-energy measure
    Volume energy(v.dims, v.voxel_size);
    for (std::int64_t z = 0; z < v.dims.d; ++z)
        for (std::int64_t y = 0; y < v.dims.h; ++y)
            for (std::int64_t x = 0; x < v.dims.w; ++x) {
                double acc = 0.0;
                int cnt = 0;
                for (std::int64_t dz = -1; dz <= 1; ++dz)
                    for (std::int64_t dy = -1; dy <= 1; ++dy)
                        for (std::int64_t dx = -1; dx <= 1; ++dx) {
                            std::int64_t cz = z + dz, cy = y + dy, cx = x + dx;
                            if (cz < 0 || cz >= v.dims.d || cy < 0 || cy >= v.dims.h || cx < 0 ||
                                cx >= v.dims.w)
                                continue;
                            acc += std::abs(v.at(cz, cy, cx) - mu);
                            ++cnt;
                        }
                energy.at(z, y, x) = acc / static_cast<double>(cnt);
            }
    std::vector<double> sorted = energy.data;
    std::sort(sorted.begin(), sorted.end());
    const double cut = sorted[static_cast<std::size_t>(keep_quantile * (static_cast<double>(sorted.size()) - 1.0))];
    Volume mask(v.dims, v.voxel_size);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        mask.data[i] = energy.data[i] > cut ? 1.0 : 0.0;
    return mask;
}

}  // namespace dewedge
