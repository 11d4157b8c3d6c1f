#pragma once

#include <string>

#include "dewedge/fbp.hpp"
#include "dewedge/fit.hpp"
#include "dewedge/metrics.hpp"
#include "dewedge/model.hpp"
#include "dewedge/refine.hpp"
#include "dewedge/simulate.hpp"
#include "dewedge/subtomo.hpp"

namespace dewedge {

// Everything a pipeline run needs, loadable from a single JSON document so
// runs can be reproduced from one artifact.
struct RunConfig {
    std::uint64_t seed = 1234;
    int workers = 0;  // 0 = all hardware threads
    std::string out_dir = ".";

    PhantomConfig phantom;
    TiltScheme tilt{-60.0, 60.0, 2.0, 1};
    NoiseConfig noise{0.25, 0};
    SplitMode split_mode = SplitMode::even_odd;
    FilterKind fbp_filter = FilterKind::ramp;

    // sub-tomogram extraction for fitting (cube_size is the extracted,
    // rotation-padded side; 0 derives it from fit.cube_size)
    std::int64_t extract_cube = 0;
    std::int64_t extract_overlap = 0;
    double min_content_fraction = 0.0;
    bool use_content_mask = false;
    double content_quantile = 0.5;

    ModelConfig model{16, 3, 0.0, 0};
    FitConfig fit;
    std::int64_t refine_cube = 32;
    std::int64_t refine_overlap = 16;

    double metrics_alpha_max = 60.0;
    std::int64_t particle_cube = 16;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

void write_particles_json(const ParticleSet& set, const std::string& path);
ParticleSet read_particles_json(const std::string& path);

struct FitStatsFile {
    NormStats fit_stats;
    NormStats target_stats;
};

void write_fit_stats(const FitStatsFile& stats, const std::string& path);
FitStatsFile read_fit_stats(const std::string& path);

}  // namespace dewedge
