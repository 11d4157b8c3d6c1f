#pragma once

#include <string>
#include <variant>

#include "dewedge/simulate.hpp"
#include "dewedge/volume.hpp"

namespace dewedge {

// MRC2014, mode 2 (little-endian float32) only. A stack is loaded as a
// TiltSeries when a sidecar angle file (same path with a .tlt extension,
// one angle in degrees per line) is present.

Volume read_mrc_volume(const std::string& path);
void write_mrc(const Volume& v, const std::string& path);

// Writes the per-tilt images as a stack plus the .tlt sidecar.
void write_mrc(const TiltSeries& t, const std::string& path, double voxel_size = 1.0);
TiltSeries read_mrc_tilt_series(const std::string& path);

// Frame stacks are stored tilt-major (tilt 0 frames, tilt 1 frames, ...)
// with the sidecar carrying one angle per tilt.
void write_mrc_frame_stack(const TiltSeries& t, const std::string& path, double voxel_size = 1.0);
TiltSeries read_mrc_frame_stack(const std::string& path, int frames_per_tilt);

std::variant<Volume, TiltSeries> read_mrc(const std::string& path);

std::string tlt_sidecar_path(const std::string& mrc_path);

}  // namespace dewedge
