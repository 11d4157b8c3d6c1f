#include <doctest.h>

#include <cmath>
#include <random>

#include "dewedge/fft.hpp"
#include "dewedge/theory.hpp"
#include "test_helpers.hpp"

using namespace dewedge;
using namespace dewedge::testing;

namespace {

MaskPairDistribution orthogonal_wedges(Dims3 dims) {
    const WedgeMask a = wedge_mask(dims, 60.0);
    const WedgeMask b = wedge_mask(dims, 60.0, EulerAngles{0.0, std::acos(-1.0) / 2.0, 0.0});
    return symmetric_pair(a, b);
}

}  // namespace

TEST_CASE("mask identity holds on boundary and random masks") {
    MaskIdentityReport r = verify_mask_identity(Dims3{8, 8, 8}, 50, 1);
    CHECK(r.pass);
    CHECK(r.violations == 0);

    // boundary cases by direct substitution
    const Dims3 dims{4, 4, 4};
    FourierMask identity_mask(dims, 1), zero_mask(dims, 0);
    for (std::size_t i = 0; i < identity_mask.keep.size(); ++i) {
        const int a = identity_mask.keep[i], b = zero_mask.keep[i];
        CHECK(a * b + (1 - a) * b + (1 - b) * a == 1 - (1 - a) * (1 - b));
        CHECK(a * a + (1 - a) * a + (1 - a) * a == 1 - (1 - a) * (1 - a));
    }
}

TEST_CASE("noise2noise gap vanishes with zero noise") {
    Volume x = blob_volume(Dims3{8, 8, 8}, 2, 3);
    GapEstimate g = noise2noise_gap([](const Volume& v) { return v; }, x, 0.0, 50, 3);
    CHECK(g.gap == 0.0);
    CHECK(g.std_error == 0.0);
}

TEST_CASE("noise2noise gap equals the total noise energy") {
    Volume x = blob_volume(Dims3{8, 8, 8}, 4, 3);
    const double sigma = 0.7;
    GapEstimate g = noise2noise_gap([](const Volume& v) { return v; }, x, sigma, 4000, 5);
    const double expected = sigma * sigma * 512.0;
    CHECK(std::abs(g.gap - expected) <= 3.0 * g.std_error);
    CHECK(g.std_error < expected);  // estimate is actually informative
}

TEST_CASE("the gap does not depend on the fixed map") {
    Volume x = blob_volume(Dims3{8, 8, 8}, 6, 3);
    auto f1 = [](const Volume& v) { return v; };
    auto f2 = [](const Volume& v) {
        Volume out = v;
        for (auto& e : out.data) e *= 0.3;
        return out;
    };
    GapComparison gc = noise2noise_gap_pair(f1, f2, x, 0.5, 4000, 7);
    CHECK(std::abs(gc.diff) <= 3.0 * gc.diff_se);
}

TEST_CASE("lemma cross-term has zero mean") {
    // <M~ M F(f(y0~) - x*), M~ M F n1> averages to zero over n1
    const Dims3 dims{8, 8, 8};
    Volume x = blob_volume(dims, 8, 3);
    const WedgeMask m = wedge_mask(dims, 60.0);
    const WedgeMask mt = wedge_mask(dims, 60.0, EulerAngles{0.0, std::acos(-1.0) / 2.0, 0.0});
    const FourierMask prod = intersect(m, mt);

    Model model = build_model(ModelConfig{2, 1, 0.0, 17});
    const double sigma = 0.8;
    const std::int64_t trials = 4000;
    std::vector<double> dots(static_cast<std::size_t>(trials));
    for (std::int64_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(mix_seed(99, 0xabc, static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> gauss(0.0, sigma);
        Volume n0(dims, 1.0), n1(dims, 1.0);
        for (auto& e : n0.data) e = gauss(rng);
        for (auto& e : n1.data) e = gauss(rng);
        Volume y0 = x;
        for (std::size_t i = 0; i < y0.data.size(); ++i) y0.data[i] += n0.data[i];
        Volume y0t = apply_wedge(y0, prod);
        Volume pred = forward(model, y0t);

        SpectralVolume fd = to_fourier(pred);
        SpectralVolume fx = to_fourier(x);
        SpectralVolume fn = to_fourier(n1);
        double dot = 0.0;
        for (std::size_t i = 0; i < fd.data.size(); ++i) {
            if (!prod.keep[i]) continue;
            const std::complex<double> a = fd.data[i] - fx.data[i];
            dot += (a * std::conj(fn.data[i])).real();
        }
        dots[static_cast<std::size_t>(t)] = dot;
    }
    double mean = 0.0;
    for (double d : dots) mean += d;
    mean /= static_cast<double>(trials);
    double var = 0.0;
    for (double d : dots) var += (d - mean) * (d - mean);
    var /= static_cast<double>(trials - 1);
    const double se = std::sqrt(var / static_cast<double>(trials));
    CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("symmetric distribution validation") {
    const Dims3 dims{8, 8, 8};
    MaskPairDistribution dist = orthogonal_wedges(dims);
    dist.validate();
    CHECK(dist.is_symmetric());
    CHECK(dist.non_overlapping());

    MaskPairDistribution bad;
    bad.entries.push_back({wedge_mask(dims, 60.0), wedge_mask(dims, 40.0), 1.0});
    bad.validate();
    CHECK_FALSE(bad.is_symmetric());

    Volume x = blob_volume(dims, 9, 3);
    std::vector<Model> models = {build_model(ModelConfig{2, 1, 0.0, 1})};
    CHECK_THROWS_AS(prop1_check(models, bad, x, 0.1, 0.1, 4, 1), invalid_input);
}

TEST_CASE("proposition: zero target noise makes the two risks equal") {
    const Dims3 dims{16, 16, 16};
    Volume x = blob_volume(dims, 10, 4);
    MaskPairDistribution dist = orthogonal_wedges(dims);
    std::vector<Model> models = {build_model(ModelConfig{2, 1, 0.0, 3}),
                                 build_model(ModelConfig{2, 1, 0.0, 4})};
    Prop1Report r = prop1_check(models, dist, x, 0.4, 0.0, 8, 11);
    for (const auto& pm : r.models) {
        CHECK(pm.loss > 0.0);
        CHECK(std::abs(pm.gap) / std::abs(pm.loss) < 1e-5);
    }
}

TEST_CASE("proposition: overlapping wedges work with the union target mask") {
    const Dims3 dims{16, 16, 16};
    Volume x = blob_volume(dims, 12, 4);
    // two wedges tilted 30 degrees apart overlap
    const WedgeMask a = wedge_mask(dims, 60.0);
    const WedgeMask b = wedge_mask(dims, 60.0, EulerAngles{0.0, std::acos(-1.0) / 6.0, 0.0});
    MaskPairDistribution dist = symmetric_pair(a, b);
    CHECK_FALSE(dist.non_overlapping());
    std::vector<Model> models = {build_model(ModelConfig{2, 1, 0.0, 5})};
    Prop1Report r = prop1_check(models, dist, x, 0.4, 0.0, 8, 13);
    CHECK(std::abs(r.models[0].gap) / std::abs(r.models[0].loss) < 1e-5);
}

TEST_CASE("proposition: with noise the gap is model-independent") {
    const Dims3 dims{8, 8, 8};
    Volume x = blob_volume(dims, 14, 3);
    MaskPairDistribution dist = orthogonal_wedges(dims);
    std::vector<Model> models = {build_model(ModelConfig{2, 1, 0.0, 6}),
                                 build_model(ModelConfig{2, 1, 0.0, 7})};
    Prop1Report r = prop1_check(models, dist, x, 0.3, 0.3, 800, 15);
    CHECK(std::abs(r.model_diff) <= 3.0 * r.model_diff_se);
    // both gaps should be positive (they estimate the noise-energy constant)
    CHECK(r.models[0].gap > 0.0);
    CHECK(r.models[1].gap > 0.0);
}

TEST_CASE("enumeration-based checks are deterministic") {
    const Dims3 dims{8, 8, 8};
    Volume x = blob_volume(dims, 16, 3);
    MaskPairDistribution dist = orthogonal_wedges(dims);
    std::vector<Model> models = {build_model(ModelConfig{2, 1, 0.0, 8})};
    Prop1Report a = prop1_check(models, dist, x, 0.3, 0.2, 50, 21);
    Prop1Report b = prop1_check(models, dist, x, 0.3, 0.2, 50, 21);
    CHECK(a.models[0].loss == b.models[0].loss);
    CHECK(a.models[0].supervised == b.models[0].supervised);
}
