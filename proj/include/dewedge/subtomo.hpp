#pragma once

#include <optional>

#include "dewedge/simulate.hpp"
#include "dewedge/volume.hpp"

namespace dewedge {

enum class SplitMode { even_odd, frame_based };

std::string to_string(SplitMode m);
SplitMode split_mode_from_string(const std::string& s);

// Partition a tilt series into two half-series with independent noise.
// even_odd keeps every other projection by acquisition order; frame_based
// averages even-index vs odd-index frames per tilt, so both halves keep the
// full angle list.
std::pair<TiltSeries, TiltSeries> split(const TiltSeries& t, SplitMode mode);

struct SubTomoPair {
    Volume v0;
    Volume v1;
    std::array<std::int64_t, 3> location;  // corner (z, y, x) in the parent tomogram
};

struct ExtractConfig {
    std::int64_t cube_size = 32;
    std::int64_t overlap = 0;
    std::optional<Volume> content_mask;
    double min_content_fraction = 0.0;
};

// Corner positions of the regular extraction grid along one axis: stride
// cube - overlap, with the final position clamped so the axis is covered.
std::vector<std::int64_t> grid_positions(std::int64_t length, std::int64_t cube, std::int64_t overlap);

std::vector<SubTomoPair> extract_pairs(const Volume& r0, const Volume& r1, const ExtractConfig& cfg);

Volume extract_cube(const Volume& v, const std::array<std::int64_t, 3>& corner, std::int64_t cube);

// Voxelwise average of overlapping cubes; voxels covered by no cube are 0
// and their count is reported through uncovered_out when given.
Volume reassemble(const std::vector<Volume>& cubes,
                  const std::vector<std::array<std::int64_t, 3>>& locations, Dims3 full_shape,
                  std::int64_t* uncovered_out = nullptr);

struct NormStats {
    double mu = 0.0;
    double sigma = 1.0;
};

// mu = mean of per-cube means, sigma^2 = mean of per-cube variances.
NormStats compute_norm_stats(const std::vector<Volume>& inputs);

// (v - mu) / sigma
Volume standardize(const Volume& v, const NormStats& stats);

// Affine rescale so the output has exactly target.mu mean and target.sigma^2
// variance. Fails on zero-variance input.
Volume normalize_tomogram(const Volume& r, const NormStats& target);

// Simple stand-in for a segmentation-based content mask: smooths |v - mean|
// and keeps voxels above the given quantile of the smoothed field.
Volume make_content_mask(const Volume& v, double keep_quantile = 0.5);

}  // namespace dewedge
