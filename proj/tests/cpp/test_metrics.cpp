#include <doctest.h>

#include "dewedge/fft.hpp"
#include "dewedge/metrics.hpp"
#include "test_helpers.hpp"

using namespace dewedge;
using namespace dewedge::testing;

TEST_CASE("cc of a volume with itself is 1") {
    Volume v = random_volume(Dims3{16, 16, 16}, 1);
    CHECK(cc(v, v) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cc is invariant to positive affine maps and flips sign for negative") {
    Volume v = random_volume(Dims3{16, 16, 16}, 2);
    Volume pos = v, neg = v;
    for (auto& x : pos.data) x = 2.5 * x + 7.0;
    for (auto& x : neg.data) x = -0.5 * x + 1.0;
    CHECK(cc(v, pos) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cc(v, neg) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(cc(v, pos) == doctest::Approx(cc(pos, v)).epsilon(1e-12));
}

TEST_CASE("independent noise volumes are uncorrelated") {
    Volume a = random_volume(Dims3{64, 64, 64}, 3);
    Volume b = random_volume(Dims3{64, 64, 64}, 4);
    CHECK(std::abs(cc(a, b)) < 0.01);
}

TEST_CASE("cc rejects constant volumes") {
    Volume v = random_volume(Dims3{8, 8, 8}, 5);
    Volume c(Dims3{8, 8, 8}, 1.0, 3.0);
    CHECK_THROWS_AS(cc(v, c), invalid_input);
}

TEST_CASE("masked_cc with an all-ones mask equals cc") {
    Volume a = random_volume(Dims3{16, 16, 16}, 6);
    Volume b = random_volume(Dims3{16, 16, 16}, 7);
    WedgeMask full = wedge_mask(a.dims, 90.0);
    CHECK(masked_cc(a, b, full) == doctest::Approx(cc(a, b)).epsilon(1e-9));
    WedgeMask m = wedge_mask(a.dims, 60.0);
    CHECK(masked_cc(a, a, m) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("masked_cc ignores arbitrary wedge-interior edits") {
    // construct two volumes agreeing outside the wedge, differing inside
    Volume base = random_volume(Dims3{16, 16, 16}, 8);
    Volume junk = random_volume(Dims3{16, 16, 16}, 9);
    WedgeMask keep = wedge_mask(base.dims, 60.0);
    SpectralVolume sb = to_fourier(base);
    SpectralVolume sj = to_fourier(junk);
    SpectralVolume mixed = sb;
    for (std::size_t i = 0; i < mixed.data.size(); ++i)
        if (!keep.keep[i]) mixed.data[i] = sj.data[i];
    Volume v = from_fourier(mixed);
    CHECK(masked_cc(v, base, keep) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cc(v, base) < 1.0);
}

TEST_CASE("fsc of a volume with itself is 1 on every valid shell") {
    Volume v = random_volume(Dims3{32, 32, 32}, 10);
    FSCCurve c = fsc_curve(v, v);
    for (std::size_t i = 0; i < c.radii.size(); ++i)
        if (c.valid[i]) CHECK(c.correlation[i] == doctest::Approx(1.0).epsilon(1e-9));
    // positive rescaling cancels in the correlation
    Volume av = v;
    for (auto& x : av.data) x *= 3.7;
    FSCCurve c2 = fsc_curve(v, av);
    for (std::size_t i = 0; i < c2.radii.size(); ++i)
        if (c2.valid[i]) CHECK(c2.correlation[i] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fsc curve values stay in [-1, 1] and the curve is symmetric") {
    Volume a = blob_volume(Dims3{32, 32, 32}, 11);
    Volume b = blob_volume(Dims3{32, 32, 32}, 12);
    FSCCurve ab = fsc_curve(a, b), ba = fsc_curve(b, a);
    for (std::size_t i = 0; i < ab.radii.size(); ++i) {
        CHECK(ab.correlation[i] <= 1.0 + 1e-9);
        CHECK(ab.correlation[i] >= -1.0 - 1e-9);
        CHECK(ab.correlation[i] == doctest::Approx(ba.correlation[i]).epsilon(1e-12));
    }
}

TEST_CASE("independent white noise decorrelates beyond low shells") {
    Volume a = random_volume(Dims3{64, 64, 64}, 13);
    Volume b = random_volume(Dims3{64, 64, 64}, 14);
    FSCCurve c = fsc_curve(a, b);
    for (std::size_t i = 0; i < c.radii.size(); ++i)
        if (c.radii[i] > 4 && c.valid[i]) CHECK(std::abs(c.correlation[i]) < 0.1);
}

TEST_CASE("fsc_resolution interpolates the threshold crossing") {
    FSCCurve c;
    for (std::int64_t r = 0; r <= 32; ++r) {
        c.radii.push_back(r);
        c.correlation.push_back(r <= 10 ? 1.0 : 0.0);
        c.valid.push_back(true);
    }
    // crossing at r = 10.857 for threshold 0.143: box 64, voxel 10 A
    CHECK(fsc_resolution(c, 0.143, 10.0, 64) == doctest::Approx(58.95).epsilon(1e-3));

    FSCCurve ones;
    for (std::int64_t r = 0; r <= 16; ++r) {
        ones.radii.push_back(r);
        ones.correlation.push_back(1.0);
        ones.valid.push_back(true);
    }
    CHECK(fsc_resolution(ones, 0.143, 10.0, 32) == doctest::Approx(20.0));  // Nyquist
}

TEST_CASE("region-restricted shells need at least 8 bins") {
    Volume a = random_volume(Dims3{16, 16, 16}, 15);
    FourierMask tiny(a.dims, 0);
    tiny.keep[1] = 1;  // a single off-DC bin
    FSCCurve c = fsc_curve(a, a, &tiny);
    for (std::size_t i = 0; i < c.radii.size(); ++i) CHECK_FALSE(c.valid[i]);
    CHECK_THROWS_AS(fsc_resolution(c, 0.143, 1.0, 16), invalid_input);
}

TEST_CASE("particle fsc at equality reports Nyquist") {
    PhantomConfig cfg;
    cfg.shape = Dims3{48, 48, 48};
    cfg.particle_count = 6;
    cfg.membrane_count = 0;
    cfg.fiducial_count = 0;
    auto [gt, set] = make_phantom(cfg, 16);
    ParticleSet usable = particles_in_bounds(set, gt.dims, 16);
    REQUIRE(!usable.particles.empty());
    CHECK(particle_fsc(gt, gt, usable, 16) == doctest::Approx(2.0 * gt.voxel_size));

    SUBCASE("single particle equals the single-cube resolution") {
        ParticleSet one;
        one.particles.push_back(usable.particles.front());
        CHECK(particle_fsc(gt, gt, one, 16) == doctest::Approx(2.0 * gt.voxel_size));
    }
    SUBCASE("empty set is rejected") {
        CHECK_THROWS_AS(particle_fsc(gt, gt, ParticleSet{}, 16), invalid_input);
    }
}
