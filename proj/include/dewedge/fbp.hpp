#pragma once

#include "dewedge/simulate.hpp"
#include "dewedge/volume.hpp"

namespace dewedge {

enum class FilterKind { ramp, hamming };

std::string to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);

// Frequency-domain 1D filtering of each projection row along x (the axis
// perpendicular to the tilt axis). Exposed so externally filtered (e.g.
// CTF-corrected) projections can go straight to back_project.
TiltSeries filter_projections(const TiltSeries& t, FilterKind filter);

// Voxel-driven parallel-beam back-projection with linear interpolation
// along x, scaled by pi / (number of tilts).
Volume back_project(const TiltSeries& t, Dims3 out_shape, double voxel_size = 1.0);

// Filtered back-projection: filter_projections followed by back_project.
Volume fbp(const TiltSeries& t, FilterKind filter, Dims3 out_shape, double voxel_size = 1.0);

}  // namespace dewedge
