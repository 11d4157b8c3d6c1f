#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dewedge/volume.hpp"

namespace dewedge {

struct ModelConfig {
    int base_channels = 64;
    int depth = 3;        // downsampling levels
    double dropout_p = 0.0;
    std::uint64_t seed = 0;
};

// Volumetric encoder-decoder with a flat little-endian float32 parameter
// vector. The layer layout is a deterministic function of the config.
struct Model {
    ModelConfig config;
    std::vector<float> params;

    std::size_t parameter_count() const { return params.size(); }
};

std::size_t parameter_count(const ModelConfig& cfg);

// He-style normal initialization drawn from cfg.seed.
Model build_model(const ModelConfig& cfg);

// Runs the network on one cube (side divisible by 2^depth). Output has the
// input's shape. With train_mode off the call is deterministic; with
// train_mode on, dropout draws from dropout_seed.
Volume forward(const Model& m, const Volume& cube, bool train_mode = false,
               std::uint64_t dropout_seed = 0);

// Checkpoint format: magic "DWMD", version byte, config record, parameter
// count, then the raw float32 parameters (all little-endian).
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace dewedge
