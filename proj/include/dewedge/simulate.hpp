#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dewedge/volume.hpp"

namespace dewedge {

enum class ParticleKind { sphere, ellipsoid, shell, rod };

std::string to_string(ParticleKind k);
ParticleKind particle_kind_from_string(const std::string& s);

struct PhantomConfig {
    Dims3 shape{64, 64, 64};
    double voxel_size = 10.0;
    int particle_count = 40;
    std::set<ParticleKind> particle_kinds{ParticleKind::sphere, ParticleKind::ellipsoid,
                                          ParticleKind::shell, ParticleKind::rod};
    double min_size = 3.0;  // particle radius / semi-axis range, voxels
    double max_size = 7.0;
    int membrane_count = 2;
    int fiducial_count = 3;
    double min_density = 0.5;
    double max_density = 1.0;
};

struct Particle {
    std::array<double, 3> center;  // (x, y, z) voxel coordinates
    double extent;                 // bounding radius in voxels
    ParticleKind kind;
};

struct ParticleSet {
    std::vector<Particle> particles;
};

struct TiltScheme {
    double min_angle_deg = -60.0;
    double max_angle_deg = 60.0;
    double increment_deg = 3.0;
    int frames_per_tilt = 1;

    std::vector<double> angles() const;
};

struct NoiseConfig {
    // Gaussian pixel noise; target_snr = var(clean projection) / var(noise).
    double target_snr = 0.25;
    std::uint64_t seed = 0;
};

struct Projection {
    std::int64_t height = 0, width = 0;  // (y, x)
    std::vector<double> data;
    double angle_deg = 0.0;
    std::vector<std::vector<double>> frames;  // empty unless frames_per_tilt > 1
    std::vector<double> transfer_function;    // optional per-tilt filter; never applied here

    double& at(std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>(y * width + x)];
    }
    const double& at(std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>(y * width + x)];
    }
};

struct TiltSeries {
    std::vector<Projection> projections;
    TiltScheme scheme;
};

// Deterministic synthetic ground truth: soft-edged particles, a few large
// thin shells standing in for membranes, and small dense beads as fiducial
// markers. Content is kept inside the inscribed cylinder so projections at
// any tilt stay inside the field of view.
std::pair<Volume, ParticleSet> make_phantom(const PhantomConfig& cfg, std::uint64_t seed);

// Parallel projection at the given tilt: rotate by -angle about the tilt
// axis (y), then sum along the beam axis (z).
Projection project(const Volume& v, double angle_deg);

TiltSeries simulate_tilt_series(const Volume& v, const TiltScheme& scheme,
                                const NoiseConfig& noise, std::uint64_t seed);

}  // namespace dewedge
