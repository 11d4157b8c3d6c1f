#include "dewedge/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "dewedge/geometry.hpp"

namespace dewedge {

std::string to_string(ParticleKind k) {
    switch (k) {
        case ParticleKind::sphere: return "sphere";
        case ParticleKind::ellipsoid: return "ellipsoid";
        case ParticleKind::shell: return "shell";
        case ParticleKind::rod: return "rod";
    }
    return "sphere";
}

ParticleKind particle_kind_from_string(const std::string& s) {
    if (s == "sphere") return ParticleKind::sphere;
    if (s == "ellipsoid") return ParticleKind::ellipsoid;
    if (s == "shell") return ParticleKind::shell;
    if (s == "rod") return ParticleKind::rod;
    throw invalid_input("unknown particle kind: " + s);
}

std::vector<double> TiltScheme::angles() const {
    if (!(min_angle_deg < max_angle_deg)) throw invalid_input("tilt scheme: min must be < max");
    if (!(increment_deg > 0.0)) throw invalid_input("tilt scheme: increment must be > 0");
    std::vector<double> out;
    const double eps = 1e-9;
    for (int k = 0;; ++k) {
        double a = min_angle_deg + k * increment_deg;
        if (a > max_angle_deg + eps) break;
        out.push_back(a);
    }
    return out;
}

namespace {

// Soft-edged indicator: 1 inside, cosine ramp of half-width `soft` around the
// surface, 0 outside. Keeps phantoms band-limited enough for interpolation-
// based projections.
double soft_step(double signed_dist, double soft) {
    if (signed_dist <= -soft) return 1.0;
    if (signed_dist >= soft) return 0.0;
    return 0.5 * (1.0 + std::cos((signed_dist + soft) * std::acos(-1.0) / (2.0 * soft)));
}

struct Painter {
    Volume& vol;

    void paint(const std::array<double, 3>& center, double bound,
               const std::function<double(double, double, double)>& signed_dist, double density,
               double soft) {
        const auto& d = vol.dims;
        std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(center[0] - bound - soft - 1));
        std::int64_t x1 = std::min(d.w - 1, static_cast<std::int64_t>(center[0] + bound + soft + 1));
        std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(center[1] - bound - soft - 1));
        std::int64_t y1 = std::min(d.h - 1, static_cast<std::int64_t>(center[1] + bound + soft + 1));
        std::int64_t z0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(center[2] - bound - soft - 1));
        std::int64_t z1 = std::min(d.d - 1, static_cast<std::int64_t>(center[2] + bound + soft + 1));
        for (std::int64_t z = z0; z <= z1; ++z)
            for (std::int64_t y = y0; y <= y1; ++y)
                for (std::int64_t x = x0; x <= x1; ++x) {
                    double sd = signed_dist(static_cast<double>(x) - center[0],
                                            static_cast<double>(y) - center[1],
                                            static_cast<double>(z) - center[2]);
                    double w = soft_step(sd, soft);
                    if (w > 0.0) vol.at(z, y, x) += density * w;
                }
    }
};

constexpr double kEdgeSoftness = 1.5;  // voxels

}  // namespace

std::pair<Volume, ParticleSet> make_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
    if (cfg.particle_count < 0 || cfg.membrane_count < 0 || cfg.fiducial_count < 0)
        throw invalid_input("make_phantom: counts must be >= 0");
    if (cfg.particle_count > 0 && cfg.particle_kinds.empty())
        throw invalid_input("make_phantom: no particle kinds configured");
    if (!(cfg.min_size > 0.0) || cfg.min_size > cfg.max_size)
        throw invalid_input("make_phantom: invalid size range");
    const std::int64_t n_min = std::min({cfg.shape.d, cfg.shape.h, cfg.shape.w});
    if (2.0 * cfg.max_size + 4.0 > static_cast<double>(n_min))
        throw invalid_input("make_phantom: particles do not fit inside the volume");

    Volume vol(cfg.shape, cfg.voxel_size);
    ParticleSet set;
    Painter painter{vol};
    std::mt19937_64 rng(mix_seed(seed, 0x9a17));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const double cx = static_cast<double>(cfg.shape.w - 1) / 2.0;
    const double cy = static_cast<double>(cfg.shape.h - 1) / 2.0;
    const double cz = static_cast<double>(cfg.shape.d - 1) / 2.0;
    // Projections rotate content about the y axis: keep everything inside
    // the inscribed x-z cylinder (with margin) so no tilt truncates it.
    const double cyl_radius = 0.5 * static_cast<double>(std::min(cfg.shape.d, cfg.shape.w));

    auto place_center = [&](double extent) {
        for (int attempt = 0; attempt < 256; ++attempt) {
            double margin = extent + kEdgeSoftness + 1.0;
            double x = margin + uni(rng) * (static_cast<double>(cfg.shape.w - 1) - 2.0 * margin);
            double y = margin + uni(rng) * (static_cast<double>(cfg.shape.h - 1) - 2.0 * margin);
            double z = margin + uni(rng) * (static_cast<double>(cfg.shape.d - 1) - 2.0 * margin);
            double rxz = std::hypot(x - cx, z - cz);
            if (rxz + margin <= 0.95 * cyl_radius) return std::array<double, 3>{x, y, z};
        }
        // Dense configs fall back to the center region.
        return std::array<double, 3>{cx, cy, cz};
    };

    std::vector<ParticleKind> kinds(cfg.particle_kinds.begin(), cfg.particle_kinds.end());
    for (int i = 0; i < cfg.particle_count; ++i) {
        ParticleKind kind = kinds[static_cast<std::size_t>(uni(rng) * static_cast<double>(kinds.size())) %
                                  kinds.size()];
        double size = cfg.min_size + uni(rng) * (cfg.max_size - cfg.min_size);
        double density = cfg.min_density + uni(rng) * (cfg.max_density - cfg.min_density);
        EulerAngles orient = sample_rotation(rng);
        Mat3 inv = rotation_matrix(orient).transpose();
        std::array<double, 3> semi = {size, size, size};
        double extent = size;
        if (kind == ParticleKind::ellipsoid) {
            semi = {size, size * (0.4 + 0.5 * uni(rng)), size * (0.4 + 0.5 * uni(rng))};
            extent = size;
        } else if (kind == ParticleKind::rod) {
            semi = {size * 2.0, size * 0.45, size * 0.45};
            extent = semi[0];
        }
        std::array<double, 3> center = place_center(extent);
        set.particles.push_back({center, extent, kind});

        switch (kind) {
            case ParticleKind::sphere:
                painter.paint(center, extent,
                              [size](double x, double y, double z) {
                                  return std::sqrt(x * x + y * y + z * z) - size;
                              },
                              density, kEdgeSoftness);
                break;
            case ParticleKind::shell: {
                double thickness = std::max(1.0, 0.25 * size);
                painter.paint(center, extent,
                              [size, thickness](double x, double y, double z) {
                                  return std::abs(std::sqrt(x * x + y * y + z * z) - size) -
                                         thickness / 2.0;
                              },
                              density, kEdgeSoftness);
                break;
            }
            case ParticleKind::ellipsoid:
            case ParticleKind::rod:
                painter.paint(center, extent,
                              [inv, semi](double x, double y, double z) {
                                  auto q = inv.apply({x, y, z});
                                  double u = std::sqrt((q[0] / semi[0]) * (q[0] / semi[0]) +
                                                       (q[1] / semi[1]) * (q[1] / semi[1]) +
                                                       (q[2] / semi[2]) * (q[2] / semi[2]));
                                  // approximate signed distance, good enough for painting
                                  double scale = std::min({semi[0], semi[1], semi[2]});
                                  return (u - 1.0) * scale;
                              },
                              density, kEdgeSoftness);
                break;
        }
    }

    for (int i = 0; i < cfg.membrane_count; ++i) {
        double radius = (0.25 + 0.15 * uni(rng)) * static_cast<double>(n_min);
        double density = 0.5 * (cfg.min_density + cfg.max_density);
        std::array<double, 3> center = place_center(radius);
        painter.paint(center, radius,
                      [radius](double x, double y, double z) {
                          return std::abs(std::sqrt(x * x + y * y + z * z) - radius) - 1.0;
                      },
                      density, kEdgeSoftness);
    }

    for (int i = 0; i < cfg.fiducial_count; ++i) {
        double radius = 1.5 + uni(rng);
        double density = 5.0 * cfg.max_density;  // gold beads scatter strongly
        std::array<double, 3> center = place_center(radius);
        painter.paint(center, radius,
                      [radius](double x, double y, double z) {
                          return std::sqrt(x * x + y * y + z * z) - radius;
                      },
                      density, kEdgeSoftness);
    }

    return {std::move(vol), std::move(set)};
}

Projection project(const Volume& v, double angle_deg) {
    if (!v.dims.cubic()) throw invalid_input("project: cubic volume required");
    Projection p;
    p.height = v.dims.h;
    p.width = v.dims.w;
    p.angle_deg = angle_deg;
    p.data.assign(static_cast<std::size_t>(p.height * p.width), 0.0);

    const double rad = angle_deg * std::acos(-1.0) / 180.0;
    const Volume* src = &v;
    Volume rotated;
    if (angle_deg != 0.0) {
        rotated = rotate_volume(v, EulerAngles{0.0, -rad, 0.0});
        src = &rotated;
    }
    for (std::int64_t z = 0; z < v.dims.d; ++z)
        for (std::int64_t y = 0; y < v.dims.h; ++y) {
            const double* row = &src->at(z, y, 0);
            double* out = &p.data[static_cast<std::size_t>(y * p.width)];
            for (std::int64_t x = 0; x < v.dims.w; ++x) out[x] += row[x];
        }
    return p;
}

namespace {

double projection_variance(const Projection& p) {
    double mu = 0.0;
    for (double x : p.data) mu += x;
    mu /= static_cast<double>(p.data.size());
    double var = 0.0;
    for (double x : p.data) var += (x - mu) * (x - mu);
    return var / static_cast<double>(p.data.size());
}

}  // namespace

TiltSeries simulate_tilt_series(const Volume& v, const TiltScheme& scheme,
                                const NoiseConfig& noise, std::uint64_t seed) {
    if (!(noise.target_snr > 0.0)) throw invalid_input("noise: target_snr must be > 0");
    if (scheme.frames_per_tilt < 1) throw invalid_input("tilt scheme: frames_per_tilt must be >= 1");
    const std::vector<double> angles = scheme.angles();
    const int m = scheme.frames_per_tilt;

    TiltSeries ts;
    ts.scheme = scheme;
    ts.projections.resize(angles.size());

    parallel_chunks(static_cast<std::int64_t>(angles.size()), 0, [&](std::int64_t k0, std::int64_t k1) {
        for (std::int64_t k = k0; k < k1; ++k) {
            Projection clean = project(v, angles[static_cast<std::size_t>(k)]);
            const double sigma = std::sqrt(projection_variance(clean) / noise.target_snr);
            Projection out = clean;
            const std::size_t npix = clean.data.size();
            if (m == 1) {
                std::mt19937_64 rng(mix_seed(seed, 0x7131, static_cast<std::uint64_t>(k), 0));
                std::normal_distribution<double> gauss(0.0, 1.0);
                for (std::size_t i = 0; i < npix; ++i) out.data[i] = clean.data[i] + sigma * gauss(rng);
            } else {
                // Each frame gets an independent draw scaled so the frame
                // average has the target noise variance.
                const double frame_sigma = sigma * std::sqrt(static_cast<double>(m));
                out.frames.assign(static_cast<std::size_t>(m),
                                  std::vector<double>(npix, 0.0));
                std::fill(out.data.begin(), out.data.end(), 0.0);
                for (int f = 0; f < m; ++f) {
                    std::mt19937_64 rng(mix_seed(seed, 0x7131, static_cast<std::uint64_t>(k),
                                                 static_cast<std::uint64_t>(f + 1)));
                    std::normal_distribution<double> gauss(0.0, 1.0);
                    auto& frame = out.frames[static_cast<std::size_t>(f)];
                    for (std::size_t i = 0; i < npix; ++i)
                        frame[i] = clean.data[i] + frame_sigma * gauss(rng);
                }
                // Store the exact frame mean so the two stay consistent.
                for (int f = 0; f < m; ++f)
                    for (std::size_t i = 0; i < npix; ++i)
                        out.data[i] += out.frames[static_cast<std::size_t>(f)][i];
                for (std::size_t i = 0; i < npix; ++i) out.data[i] /= static_cast<double>(m);
            }
            ts.projections[static_cast<std::size_t>(k)] = std::move(out);
        }
    });
    return ts;
}

}  // namespace dewedge
