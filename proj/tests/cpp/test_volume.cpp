#include <doctest.h>

#include "dewedge/fft.hpp"
#include "dewedge/volume.hpp"
#include "test_helpers.hpp"

using namespace dewedge;
using namespace dewedge::testing;

TEST_CASE("to_fourier: constant volume concentrates at DC") {
    const double c = 2.5;
    Volume v(Dims3{8, 8, 8}, 1.0, c);
    SpectralVolume s = to_fourier(v);
    CHECK(s.at(0, 0, 0).real() == doctest::Approx(512.0 * c).epsilon(1e-12));
    CHECK(s.at(0, 0, 0).imag() == doctest::Approx(0.0).epsilon(1e-12));
    double off_dc = 0.0;
    for (std::size_t i = 1; i < s.data.size(); ++i) off_dc = std::max(off_dc, std::abs(s.data[i]));
    CHECK(off_dc < 1e-9);
}

TEST_CASE("to_fourier / from_fourier round trip") {
    Volume v = random_volume(Dims3{12, 8, 10}, 99);
    Volume back = from_fourier(to_fourier(v));
    CHECK(rel_rms_diff(back, v) < 1e-6);
}

TEST_CASE("Parseval under the unnormalized-forward convention") {
    Volume v = random_volume(Dims3{8, 8, 8}, 7);
    SpectralVolume s = to_fourier(v);
    double real_energy = 0.0, fourier_energy = 0.0;
    for (double x : v.data) real_energy += x * x;
    for (const auto& c : s.data) fourier_energy += std::norm(c);
    CHECK(fourier_energy / static_cast<double>(v.dims.total()) ==
          doctest::Approx(real_energy).epsilon(1e-6));
}

TEST_CASE("from_fourier: DC delta gives a constant volume") {
    SpectralVolume s;
    s.dims = Dims3{8, 8, 8};
    s.voxel_size = 1.0;
    s.data.assign(512, 0.0);
    s.data[0] = 512.0;
    Volume v = from_fourier(s);
    for (double x : v.data) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("from_fourier rejects a non-Hermitian spectrum") {
    SpectralVolume s;
    s.dims = Dims3{8, 8, 8};
    s.data.assign(512, 0.0);
    s.data[3] = {0.0, 50.0};  // no conjugate partner
    CHECK_THROWS_AS(from_fourier(s), numeric_failure);
}

TEST_CASE("spectral round trip for Hermitian input") {
    Volume v = random_volume(Dims3{8, 8, 8}, 3);
    SpectralVolume s = to_fourier(v);
    SpectralVolume s2 = to_fourier(from_fourier(s));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i)
        max_diff = std::max(max_diff, std::abs(s.data[i] - s2.data[i]));
    CHECK(max_diff < 1e-6 * 512.0);
}

TEST_CASE("volume invariants are enforced") {
    CHECK_THROWS_AS(Volume(Dims3{0, 4, 4}, 1.0), invalid_input);
    CHECK_THROWS_AS(Volume(Dims3{4, 4, 4}, 0.0), invalid_input);
    Volume v(Dims3{4, 4, 4}, 1.0);
    CHECK(all_finite(v));
    v.data[5] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(all_finite(v));
}

TEST_CASE("crop_center extracts the centered block") {
    Volume v = random_volume(Dims3{8, 8, 8}, 11);
    Volume c = crop_center(v, Dims3{4, 4, 4});
    CHECK(c.at(0, 0, 0) == v.at(2, 2, 2));
    CHECK(c.at(3, 3, 3) == v.at(5, 5, 5));
}
