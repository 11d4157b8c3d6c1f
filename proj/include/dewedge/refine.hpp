#pragma once

#include <functional>

#include "dewedge/model.hpp"
#include "dewedge/subtomo.hpp"

namespace dewedge {

struct RefineConfig {
    std::int64_t cube_size = 32;
    std::int64_t overlap = 16;
    NormStats fit_stats;     // sub-tomogram normalization used during fitting
    NormStats target_stats;  // full-tomogram mean/std before extraction
};

// Final reconstruction: normalize each half-reconstruction to target_stats,
// extract overlapping cubes (no content mask), standardize with fit_stats,
// run the model in eval mode, reassemble each branch, and average the two.
// Always consumes the original reconstructions, never wedge-updated cubes.
Volume refine(const Model& m, const Volume& r0, const Volume& r1, const RefineConfig& cfg);

// Same pipeline with an arbitrary cube map in place of the model.
Volume refine_with(const std::function<Volume(const Volume&)>& apply, const Volume& r0,
                   const Volume& r1, const RefineConfig& cfg);

}  // namespace dewedge
