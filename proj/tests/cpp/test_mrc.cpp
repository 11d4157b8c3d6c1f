#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dewedge/config.hpp"
#include "dewedge/mrc.hpp"
#include "test_helpers.hpp"

using namespace dewedge;
using namespace dewedge::testing;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() : path(std::filesystem::temp_directory_path() / "dewedge_mrc_test") {
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Volume f32_random_volume(Dims3 dims, std::uint64_t seed, double voxel) {
    // values representable exactly in float32 so disk round trips are bit-identical
    Volume v = random_volume(dims, seed, voxel);
    for (auto& x : v.data) x = static_cast<double>(static_cast<float>(x));
    return v;
}

}  // namespace

TEST_CASE("volume round trip is bit-identical") {
    TempDir tmp;
    Volume v = f32_random_volume(Dims3{32, 32, 32}, 1, 13.02);
    const std::string path = tmp.file("vol.mrc");
    write_mrc(v, path);
    Volume back = read_mrc_volume(path);
    CHECK(back.dims == v.dims);
    CHECK(back.voxel_size == doctest::Approx(13.02).epsilon(1e-5));
    CHECK(back.data == v.data);
}

TEST_CASE("writes are deterministic byte for byte") {
    TempDir tmp;
    Volume v = f32_random_volume(Dims3{16, 16, 16}, 2, 10.0);
    write_mrc(v, tmp.file("a.mrc"));
    write_mrc(v, tmp.file("b.mrc"));
    std::ifstream fa(tmp.file("a.mrc"), std::ios::binary), fb(tmp.file("b.mrc"), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(sa.size() == 1024 + 16 * 16 * 16 * 4);
}

TEST_CASE("unsupported modes are rejected") {
    TempDir tmp;
    Volume v = f32_random_volume(Dims3{4, 4, 4}, 3, 1.0);
    const std::string path = tmp.file("mode.mrc");
    write_mrc(v, path);
    // corrupt the mode word (offset 12) to mode 1 (int16)
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(12);
    const char one[4] = {1, 0, 0, 0};
    f.write(one, 4);
    f.close();
    CHECK_THROWS_AS(read_mrc_volume(path), invalid_input);
}

TEST_CASE("truncated files are rejected") {
    TempDir tmp;
    Volume v = f32_random_volume(Dims3{8, 8, 8}, 4, 1.0);
    const std::string path = tmp.file("trunc.mrc");
    write_mrc(v, path);
    std::filesystem::resize_file(path, 1024 + 100);
    CHECK_THROWS_AS(read_mrc_volume(path), invalid_input);
}

TEST_CASE("tilt series round trip with the angle sidecar") {
    TempDir tmp;
    Volume v = blob_volume(Dims3{24, 24, 24}, 5);
    TiltScheme scheme{-60.0, 60.0, 3.0, 1};
    TiltSeries ts = simulate_tilt_series(v, scheme, NoiseConfig{1.0, 0}, 6);
    REQUIRE(ts.projections.size() == 41);

    const std::string path = tmp.file("tilts.mrc");
    write_mrc(ts, path, 10.0);
    CHECK(std::filesystem::exists(tmp.file("tilts.tlt")));

    TiltSeries back = read_mrc_tilt_series(path);
    CHECK(back.projections.size() == 41);
    for (std::size_t k = 0; k < back.projections.size(); ++k) {
        CHECK(back.projections[k].angle_deg ==
              doctest::Approx(ts.projections[k].angle_deg).epsilon(1e-9));
        for (std::size_t i = 0; i < back.projections[k].data.size(); ++i)
            REQUIRE(static_cast<float>(back.projections[k].data[i]) ==
                    static_cast<float>(ts.projections[k].data[i]));
    }

    // the variant reader dispatches on the sidecar
    auto var = read_mrc(path);
    CHECK(std::holds_alternative<TiltSeries>(var));
    Volume plain = f32_random_volume(Dims3{8, 8, 8}, 7, 1.0);
    write_mrc(plain, tmp.file("plain.mrc"));
    CHECK(std::holds_alternative<Volume>(read_mrc(tmp.file("plain.mrc"))));
}

TEST_CASE("angle count mismatch is rejected") {
    TempDir tmp;
    Volume v = blob_volume(Dims3{16, 16, 16}, 8);
    TiltSeries ts = simulate_tilt_series(v, TiltScheme{-30.0, 30.0, 10.0, 1}, NoiseConfig{1.0, 0}, 9);
    const std::string path = tmp.file("bad.mrc");
    write_mrc(ts, path, 1.0);
    std::ofstream f(tmp.file("bad.tlt"));
    f << "0\n1\n";
    f.close();
    CHECK_THROWS_AS(read_mrc_tilt_series(path), invalid_input);
}

TEST_CASE("frame stack round trip preserves per-frame data") {
    TempDir tmp;
    Volume v = blob_volume(Dims3{16, 16, 16}, 10);
    TiltSeries ts = simulate_tilt_series(v, TiltScheme{-20.0, 20.0, 20.0, 4}, NoiseConfig{1.0, 0}, 11);
    const std::string path = tmp.file("frames.mrc");
    write_mrc_frame_stack(ts, path, 1.0);
    TiltSeries back = read_mrc_frame_stack(path, 4);
    REQUIRE(back.projections.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(back.projections[k].frames.size() == 4);
        for (std::size_t f = 0; f < 4; ++f)
            for (std::size_t i = 0; i < back.projections[k].frames[f].size(); ++i)
                REQUIRE(static_cast<float>(back.projections[k].frames[f][i]) ==
                        static_cast<float>(ts.projections[k].frames[f][i]));
    }
}

TEST_CASE("run config JSON round trip") {
    RunConfig cfg;
    cfg.seed = 777;
    cfg.phantom.particle_count = 13;
    cfg.fit.epochs = 42;
    cfg.fit.mode = FitMode::noise2noise_only;
    cfg.split_mode = SplitMode::frame_based;
    RunConfig back = run_config_from_json(run_config_to_json(cfg));
    CHECK(back.seed == 777);
    CHECK(back.phantom.particle_count == 13);
    CHECK(back.fit.epochs == 42);
    CHECK(back.fit.mode == FitMode::noise2noise_only);
    CHECK(back.split_mode == SplitMode::frame_based);

    CHECK_THROWS_AS(run_config_from_json("{ not json"), invalid_input);
}

TEST_CASE("particle set JSON round trip") {
    TempDir tmp;
    ParticleSet set;
    set.particles.push_back({{1.5, 2.5, 3.5}, 4.0, ParticleKind::rod});
    set.particles.push_back({{10.0, 11.0, 12.0}, 2.0, ParticleKind::sphere});
    const std::string path = tmp.file("particles.json");
    write_particles_json(set, path);
    ParticleSet back = read_particles_json(path);
    REQUIRE(back.particles.size() == 2);
    CHECK(back.particles[0].center[0] == 1.5);
    CHECK(back.particles[0].kind == ParticleKind::rod);
    CHECK(back.particles[1].extent == 2.0);
}
