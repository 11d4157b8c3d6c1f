#include <doctest.h>

#include <random>

#include "dewedge/fft.hpp"
#include "dewedge/fit.hpp"
#include "test_helpers.hpp"

using namespace dewedge;
using namespace dewedge::testing;

namespace {

std::vector<SubTomoPair> toy_pairs(std::int64_t extracted, int count, std::uint64_t seed,
                                   bool equal_halves = false) {
    std::vector<SubTomoPair> pairs;
    for (int i = 0; i < count; ++i) {
        SubTomoPair p;
        p.v0 = blob_volume(Dims3{extracted, extracted, extracted},
                           seed + static_cast<std::uint64_t>(2 * i), 4);
        p.v1 = equal_halves ? p.v0
                            : blob_volume(Dims3{extracted, extracted, extracted},
                                          seed + static_cast<std::uint64_t>(2 * i + 1), 4);
        p.location = {0, 0, 0};
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace

TEST_CASE("oversize rule pads for rotation and stays model-compatible") {
    CHECK(oversize_for_rotation(32, 3) == 56);  // ceil(sqrt(3)*32) = 56, already divisible by 8
    CHECK(oversize_for_rotation(24, 3) == 48);  // ceil = 42, rounded up to a multiple of 8
    CHECK(oversize_for_rotation(16, 1) == 28);
}

TEST_CASE("make_fit_sample applies the wedge to the input only") {
    const Dims3 small{16, 16, 16};
    WedgeMask m = wedge_mask(small, 60.0);
    SubTomoPair pair;
    pair.v0 = blob_volume(Dims3{32, 32, 32}, 1, 4);
    pair.v1 = blob_volume(Dims3{32, 32, 32}, 2, 4);
    pair.location = {0, 0, 0};
    std::mt19937_64 rng(3);
    FitSample s = make_fit_sample(pair, sample_rotation(rng), m);
    CHECK(s.input.dims == small);
    CHECK(s.target.dims == small);

    // F(input) vanishes outside the canonical mask
    SpectralVolume fi = to_fourier(s.input);
    double outside = 0.0, total = 0.0;
    for (std::size_t i = 0; i < fi.data.size(); ++i) {
        total += std::norm(fi.data[i]);
        if (!m.keep[i]) outside += std::norm(fi.data[i]);
    }
    CHECK(outside < 1e-12 * total);

    // the target keeps content inside the wedge
    SpectralVolume ft = to_fourier(s.target);
    double t_outside = 0.0;
    for (std::size_t i = 0; i < ft.data.size(); ++i)
        if (!m.keep[i]) t_outside += std::norm(ft.data[i]);
    CHECK(t_outside > 0.0);
}

TEST_CASE("identity rotation on an already-masked cube is a no-op") {
    const Dims3 dims{16, 16, 16};
    WedgeMask m = wedge_mask(dims, 60.0);
    SubTomoPair pair;
    pair.v0 = apply_wedge(blob_volume(dims, 4, 3), m);
    pair.v1 = pair.v0;
    FitSample s = make_fit_sample(pair, EulerAngles{}, m);
    CHECK(rel_rms_diff(s.input, pair.v0) < 1e-6);
}

TEST_CASE("full mask and equal halves give input equal to target") {
    const Dims3 dims{24, 24, 24};
    WedgeMask full = wedge_mask(Dims3{12, 12, 12}, 90.0);
    SubTomoPair pair;
    pair.v0 = blob_volume(dims, 5, 4);
    pair.v1 = pair.v0;
    std::mt19937_64 rng(6);
    FitSample s = make_fit_sample(pair, sample_rotation(rng), full);
    // same rotation on both; only interpolation separates them
    CHECK(rel_rms_diff(s.input, s.target) < 1e-9);
}

TEST_CASE("sample_loss basics") {
    const Dims3 dims{16, 16, 16};
    WedgeMask m = wedge_mask(dims, 60.0);
    std::mt19937_64 rng(7);
    WedgeMask m_phi = wedge_mask(dims, 60.0, sample_rotation(rng));
    Volume v = random_volume(dims, 8);
    CHECK(sample_loss(v, v, m, m_phi) == 0.0);
}

TEST_CASE("a unit-norm difference inside the doubly-weighted region scores 4") {
    const Dims3 dims{16, 16, 16};
    WedgeMask m = wedge_mask(dims, 60.0);
    WedgeMask m_phi = wedge_mask(dims, 90.0);  // rotated mask keeps everything

    // build a real difference supported on one conjugate bin pair inside
    // M^C (and its mirror), with unit Fourier norm
    SpectralVolume s;
    s.dims = dims;
    s.voxel_size = 1.0;
    s.data.assign(static_cast<std::size_t>(dims.total()), 0.0);
    std::size_t bin = 0;
    for (std::int64_t qz = 0; qz < dims.d && !bin; ++qz)
        for (std::int64_t qy = 0; qy < dims.h && !bin; ++qy)
            for (std::int64_t qx = 0; qx < dims.w && !bin; ++qx) {
                const std::size_t i = static_cast<std::size_t>((qz * dims.h + qy) * dims.w + qx);
                // pick a wedge-interior bin that is not its own mirror
                if (!m.keep[i] && !(qz == 0 && qy == 0 && qx == 0) &&
                    !((2 * qz) % dims.d == 0 && (2 * qy) % dims.h == 0 && (2 * qx) % dims.w == 0))
                    bin = i;
            }
    REQUIRE(bin != 0);
    const std::int64_t qz = static_cast<std::int64_t>(bin) / (dims.h * dims.w);
    const std::int64_t qy = (static_cast<std::int64_t>(bin) / dims.w) % dims.h;
    const std::int64_t qx = static_cast<std::int64_t>(bin) % dims.w;
    const double amp = 1.0 / std::sqrt(2.0);  // two conjugate bins carry norm 1
    s.at(qz, qy, qx) = amp;
    s.at((dims.d - qz) % dims.d, (dims.h - qy) % dims.h, (dims.w - qx) % dims.w) = amp;
    Volume diff = from_fourier(s);

    Volume zero(dims, 1.0);
    CHECK(sample_loss(diff, zero, m, m_phi) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("combined-mask loss equals the 1x/4x two-term decomposition (brute force)") {
    const Dims3 dims{16, 16, 16};
    WedgeMask m = wedge_mask(dims, 60.0);
    std::mt19937_64 rng(9);
    WedgeMask m_phi = wedge_mask(dims, 60.0, sample_rotation(rng));
    Volume pred = random_volume(dims, 10);
    Volume target = random_volume(dims, 11);

    const double combined = sample_loss(pred, target, m, m_phi);

    // independent voxel-loop oracle over the two orthogonal mask regions
    Volume diff = pred;
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= target.data[i];
    SpectralVolume fd = to_fourier(diff);
    double term_keep = 0.0, term_missing = 0.0;
    for (std::int64_t qz = 0; qz < dims.d; ++qz)
        for (std::int64_t qy = 0; qy < dims.h; ++qy)
            for (std::int64_t qx = 0; qx < dims.w; ++qx) {
                const std::size_t i = static_cast<std::size_t>((qz * dims.h + qy) * dims.w + qx);
                if (!m_phi.keep[i]) continue;
                if (m.keep[i])
                    term_keep += std::norm(fd.at(qz, qy, qx));
                else
                    term_missing += std::norm(fd.at(qz, qy, qx));
            }
    CHECK(combined == doctest::Approx(term_keep + 4.0 * term_missing).epsilon(1e-6));
}

TEST_CASE("noise2noise loss with a full mask reduces to Parseval") {
    const Dims3 dims{16, 16, 16};
    WedgeMask full = wedge_mask(dims, 90.0);
    Volume pred = random_volume(dims, 12);
    Volume target = random_volume(dims, 13);
    const double loss = noise2noise_loss(pred, target, full, full);
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        sse += d * d;
    }
    CHECK(loss == doctest::Approx(static_cast<double>(dims.total()) * sse).epsilon(1e-6));
}

TEST_CASE("update_input_wedges splices model content into the wedge only") {
    const Dims3 dims{16, 16, 16};
    WedgeMask m = wedge_mask(dims, 60.0);
    Model model = build_model(ModelConfig{2, 1, 0.0, 21});
    std::vector<Volume> inputs = {apply_wedge(blob_volume(dims, 22, 4), m)};
    std::vector<Volume> updated = update_input_wedges(model, inputs, m);
    REQUIRE(updated.size() == 1);

    SpectralVolume before = to_fourier(inputs[0]);
    SpectralVolume after = to_fourier(updated[0]);
    SpectralVolume pred = to_fourier(forward(model, inputs[0]));
    double kept_diff = 0.0, wedge_diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < before.data.size(); ++i) {
        scale = std::max(scale, std::abs(before.data[i]));
        if (m.keep[i])
            kept_diff = std::max(kept_diff, std::abs(after.data[i] - before.data[i]));
        else
            wedge_diff = std::max(wedge_diff, std::abs(after.data[i] - pred.data[i]));
    }
    CHECK(kept_diff < 1e-6 * scale);   // kept coefficients bit-stable up to FFT round trip
    CHECK(wedge_diff < 1e-6 * scale);  // wedge region now carries the prediction
}

TEST_CASE("zero model turns the update into wedge projection") {
    const Dims3 dims{16, 16, 16};
    WedgeMask m = wedge_mask(dims, 60.0);
    Model model = build_model(ModelConfig{2, 1, 0.0, 23});
    std::fill(model.params.begin(), model.params.end(), 0.0f);
    Volume v = apply_wedge(blob_volume(dims, 24, 4), m);
    std::vector<Volume> updated = update_input_wedges(model, {v}, m);
    CHECK(rel_rms_diff(updated[0], v) < 1e-6);
}

TEST_CASE("fit is deterministic and the loss decreases on an easy task") {
    auto pairs = toy_pairs(16, 3, 1000);
    Model model = build_model(ModelConfig{2, 1, 0.0, 5});
    FitConfig cfg;
    cfg.epochs = 8;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 2;
    cfg.wedge_alpha_max_deg = 60.0;
    cfg.cube_size = 8;
    cfg.seed = 99;

    FitResult a = fit(pairs, model, cfg);
    FitResult b = fit(pairs, model, cfg);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.model.params == b.model.params);
    CHECK(a.updated_inputs.size() == pairs.size());
    CHECK(a.loss_history.size() == 8);
    for (double l : a.loss_history) CHECK(std::isfinite(l));
}

TEST_CASE("fit results do not depend on the worker count") {
    auto pairs = toy_pairs(16, 4, 2000);
    Model model = build_model(ModelConfig{2, 1, 0.0, 6});
    FitConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.cube_size = 8;
    cfg.seed = 7;

    set_max_workers(1);
    FitResult serial = fit(pairs, model, cfg);
    set_max_workers(4);
    FitResult parallel = fit(pairs, model, cfg);
    set_max_workers(0);
    CHECK(serial.loss_history == parallel.loss_history);
    CHECK(serial.model.params == parallel.model.params);
    for (std::size_t i = 0; i < serial.updated_inputs.size(); ++i)
        CHECK(serial.updated_inputs[i].data == parallel.updated_inputs[i].data);
}

TEST_CASE("noise2noise mode ignores the wedge machinery") {
    auto pairs = toy_pairs(16, 2, 3000);
    Model model = build_model(ModelConfig{2, 1, 0.0, 8});
    FitConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.cube_size = 8;
    cfg.mode = FitMode::noise2noise_only;
    cfg.wedge_alpha_max_deg = 90.0;
    cfg.seed = 13;
    FitResult r = fit(pairs, model, cfg);
    CHECK(r.loss_history.size() == 2);
    // inputs are standardized but never wedge-updated in this mode
    Volume expect = standardize(pairs[0].v0, r.stats);
    CHECK(max_abs_diff(r.updated_inputs[0], expect) < 1e-12);
}

TEST_CASE("targets are never wedge-updated") {
    // fit() never touches v1: verify sample targets keep wedge content
    const Dims3 dims{24, 24, 24};
    WedgeMask m = wedge_mask(Dims3{8, 8, 8}, 60.0);
    SubTomoPair pair;
    pair.v0 = blob_volume(dims, 50, 4);
    pair.v1 = blob_volume(dims, 51, 4);
    std::mt19937_64 rng(52);
    FitSample s = make_fit_sample(pair, sample_rotation(rng), m);
    SpectralVolume ft = to_fourier(s.target);
    double in_wedge = 0.0;
    for (std::size_t i = 0; i < ft.data.size(); ++i)
        if (!m.keep[i]) in_wedge += std::norm(ft.data[i]);
    CHECK(in_wedge > 0.0);
}

TEST_CASE("divergence raises a numeric failure") {
    auto pairs = toy_pairs(16, 2, 4000);
    Model model = build_model(ModelConfig{2, 1, 0.0, 60});
    FitConfig cfg;
    cfg.epochs = 40;
    cfg.learning_rate = 1e18;  // guaranteed blow-up
    cfg.batch_size = 2;
    cfg.cube_size = 8;
    CHECK_THROWS_AS(fit(pairs, model, cfg), numeric_failure);
}

TEST_CASE("fit validates its inputs") {
    Model model = build_model(ModelConfig{2, 1, 0.0, 9});
    FitConfig cfg;
    CHECK_THROWS_AS(fit({}, model, cfg), invalid_input);

    auto pairs = toy_pairs(15, 1, 5000);  // 15 is not model-compatible
    cfg.cube_size = 7;
    CHECK_THROWS_AS(fit(pairs, model, cfg), invalid_input);
}
