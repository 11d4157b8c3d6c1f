#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dewedge/model.hpp"
#include "dewedge/subtomo.hpp"
#include "dewedge/wedge.hpp"

namespace dewedge {

enum class FitMode { deepdewedge, noise2noise_only };

std::string to_string(FitMode m);
FitMode fit_mode_from_string(const std::string& s);

// One training triplet: the wedge-masked rotated input cube, the rotated
// (unmasked) target cube, and the rotation that produced them.
struct FitSample {
    Volume input;
    Volume target;
    EulerAngles angles;
};

struct FitConfig {
    int epochs = 1;
    double learning_rate = 4e-4;
    int batch_size = 8;
    double wedge_alpha_max_deg = 60.0;
    FitMode mode = FitMode::deepdewedge;
    bool update_input_wedges = true;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Side of the center crop fed to the model. 0 derives the largest
    // side divisible by 2^depth that fits the rotation-safe bound
    // (extracted cube side / sqrt(3)).
    std::int64_t cube_size = 0;
    int checkpoint_interval = 0;     // epochs between checkpoints; 0 disables
    std::string checkpoint_dir;
};

struct FitResult {
    Model model;
    std::vector<double> loss_history;   // mean per-sample loss per epoch
    std::vector<Volume> updated_inputs; // wedge-updated v0 cubes, standardized units
    NormStats stats;                    // input normalization used during fitting
};

// Rotate both cubes of the pair, center-crop to the mask shape, and apply
// the artificial wedge to the input only. The target keeps its full
// spectrum; its wedge is handled by masking inside the loss.
FitSample make_fit_sample(const SubTomoPair& pair, const EulerAngles& phi, const WedgeMask& m);

// l = || (M M_phi + 2 M^C M_phi) F(pred - target) ||^2 over all Fourier
// bins (unnormalized forward transform).
double sample_loss(const Volume& pred, const Volume& target, const WedgeMask& m,
                   const WedgeMask& m_phi);

// Denoising-only objective: || M M_phi F(pred - target) ||^2.
double noise2noise_loss(const Volume& pred, const Volume& target, const WedgeMask& m,
                        const WedgeMask& m_phi);

// v <- F^-1( M F v + M^C F f(v) ): replaces missing-wedge content with the
// model prediction while leaving kept coefficients untouched.
std::vector<Volume> update_input_wedges(const Model& m, const std::vector<Volume>& inputs,
                                        const WedgeMask& wedge);

// Self-supervised fitting loop. Per epoch: fresh rotations and samples from
// the current inputs, one full pass of batched Adam steps, then (in
// deepdewedge mode) the missing-wedge refresh of every input cube.
FitResult fit(const std::vector<SubTomoPair>& pairs, const Model& model, const FitConfig& cfg);

void write_loss_csv(const std::string& path, const std::vector<double>& loss_history);

// Rotation-safe extraction side for a given model-input side: smallest
// multiple of 2^depth at or above sqrt(3) * cube (kept model-compatible so
// the wedge update can run on the full extracted cube).
std::int64_t oversize_for_rotation(std::int64_t cube, int depth);

}  // namespace dewedge
