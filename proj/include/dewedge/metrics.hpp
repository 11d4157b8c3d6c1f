#pragma once

#include <optional>

#include "dewedge/simulate.hpp"
#include "dewedge/volume.hpp"
#include "dewedge/wedge.hpp"

namespace dewedge {

// Pearson correlation between two volumes.
double cc(const Volume& v, const Volume& w);

// Correlation after projecting both volumes onto the mask.
double masked_cc(const Volume& v, const Volume& w, const FourierMask& m);

struct FSCCurve {
    std::vector<std::int64_t> radii;   // integer voxel frequencies, ascending
    std::vector<double> correlation;   // per shell
    std::vector<bool> valid;           // false when the shell had too few bins
};

// Fourier shell correlation over shells |k| rounded to the nearest integer.
// With a region mask, shells are restricted to region bins and shells with
// fewer than 8 bins are marked invalid.
FSCCurve fsc_curve(const Volume& v, const Volume& w, const FourierMask* region = nullptr);

// First threshold crossing by linear interpolation between adjacent valid
// shells, converted to Angstroms as box * voxel_size / r_cross. Returns the
// Nyquist resolution 2 * voxel_size if the curve never crosses.
double fsc_resolution(const FSCCurve& c, double threshold, double voxel_size, std::int64_t box);

constexpr double kFscThreshold = 0.143;

// Mean 0.143-FSC resolution over cubes centered on the particles. All
// particle cubes must lie inside both volumes.
double particle_fsc(const Volume& tomo, const Volume& gt, const ParticleSet& particles,
                    std::int64_t cube, double threshold = kFscThreshold,
                    const FourierMask* region = nullptr);

// Particles whose cube of the given side fits inside the volume.
ParticleSet particles_in_bounds(const ParticleSet& particles, const Dims3& dims, std::int64_t cube);

}  // namespace dewedge
