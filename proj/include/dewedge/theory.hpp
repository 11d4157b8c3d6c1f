#pragma once

#include <functional>

#include "dewedge/model.hpp"
#include "dewedge/volume.hpp"
#include "dewedge/wedge.hpp"

namespace dewedge {

// Finite list of (M, M_tilde) mask pairs with probabilities, so the mask
// expectation in the estimator identities is computed exactly and only the
// noise expectation is sampled.
struct MaskPairDistribution {
    struct Entry {
        FourierMask m;
        FourierMask m_tilde;
        double prob = 0.0;
    };
    std::vector<Entry> entries;

    void validate() const;      // probabilities sum to 1
    bool is_symmetric() const;  // P(M, M~) = P(M~, M) exactly over the list
    bool non_overlapping() const;  // missing regions never intersect
};

// Symmetric two-wedge distribution: the pair (a, b) and its swap, each 1/2.
MaskPairDistribution symmetric_pair(const FourierMask& a, const FourierMask& b);

struct MaskIdentityReport {
    std::int64_t trials = 0;
    std::int64_t violations = 0;
    bool pass = false;
};

// Entrywise integer check of A B + A^C B + B^C A = I - A^C B^C over random
// binary masks.
MaskIdentityReport verify_mask_identity(Dims3 shape, std::int64_t trials, std::uint64_t seed);

struct GapEstimate {
    double gap = 0.0;        // E||f(y0) - y1||^2 - E||f(y0) - x*||^2
    double std_error = 0.0;
    std::int64_t trials = 0;
};

// Monte-Carlo estimate of the self-supervised/supervised offset for a fixed
// map f, with y0 = x* + n0 and y1 = x* + n1 drawn independently.
GapEstimate noise2noise_gap(const std::function<Volume(const Volume&)>& f, const Volume& x_star,
                            double noise_sigma, std::int64_t trials, std::uint64_t seed);

struct GapComparison {
    GapEstimate first, second;
    double diff = 0.0;      // first.gap - second.gap, common random numbers
    double diff_se = 0.0;
};

GapComparison noise2noise_gap_pair(const std::function<Volume(const Volume&)>& f1,
                                   const std::function<Volume(const Volume&)>& f2,
                                   const Volume& x_star, double noise_sigma, std::int64_t trials,
                                   std::uint64_t seed);

struct Prop1Report {
    struct PerModel {
        double loss = 0.0;        // self-supervised risk L
        double supervised = 0.0;  // masked supervised risk R
        double gap = 0.0;         // L - R
        double gap_se = 0.0;
    };
    std::vector<PerModel> models;
    // pairwise gap difference between the first two models, common random numbers
    double model_diff = 0.0;
    double model_diff_se = 0.0;
    std::int64_t trials = 0;
};

// Exact enumeration over the mask list, Monte Carlo over the noise. The
// self-supervised risk L weights the M~ M band by 1 and the M~^C M band by
// 2 in energy (the form the mask-swap symmetrization preserves); the
// supervised risk R uses the union mask I - M~^C M^C, which reduces to I
// for non-overlapping wedges. With zero target noise, L = R holds exactly
// per draw; with noise, L - R is a model-independent constant.
Prop1Report prop1_check(const std::vector<Model>& models, const MaskPairDistribution& dist,
                        const Volume& x_star, double noise0_sigma, double noise1_sigma,
                        std::int64_t trials, std::uint64_t seed);

}  // namespace dewedge
