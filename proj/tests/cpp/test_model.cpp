#include <doctest.h>

#include <cstdio>
#include <random>

#include "dewedge/fft.hpp"
#include "dewedge/fit.hpp"
#include "dewedge/model.hpp"
#include "nn.hpp"
#include "test_helpers.hpp"

using namespace dewedge;
using namespace dewedge::testing;

namespace {

// independent layer-by-layer arithmetic for the parameter count
std::size_t hand_count(std::int64_t base, int depth) {
    auto conv3 = [](std::int64_t cin, std::int64_t cout) { return cin * cout * 27 + cout; };
    std::size_t total = 0;
    std::int64_t cin = 1;
    for (int l = 0; l < depth; ++l) {
        const std::int64_t ch = base << l;
        total += static_cast<std::size_t>(conv3(cin, ch) + conv3(ch, ch));
        cin = ch;
    }
    const std::int64_t bott = base << depth;
    total += static_cast<std::size_t>(conv3(cin, bott) + conv3(bott, bott));
    for (int l = depth - 1; l >= 0; --l) {
        const std::int64_t ch = base << l;
        total += static_cast<std::size_t>(conv3(base << (l + 1), ch));  // upsampling
        total += static_cast<std::size_t>(conv3(2 * ch, ch) + conv3(ch, ch));
    }
    total += static_cast<std::size_t>(base * 1 + 1);  // 1^3 head
    return total;
}

}  // namespace

TEST_CASE("default architecture lands near 27.3 million parameters") {
    const double count = static_cast<double>(parameter_count(ModelConfig{64, 3, 0.0, 0}));
    CHECK(count > 27.3e6 * 0.85);
    CHECK(count < 27.3e6 * 1.15);
}

TEST_CASE("parameter count matches an independent hand count") {
    for (auto [base, depth] : {std::pair<int, int>{16, 3}, {4, 2}, {2, 1}}) {
        ModelConfig cfg{base, depth, 0.0, 0};
        CHECK(parameter_count(cfg) == hand_count(base, depth));
    }
}

TEST_CASE("same seed gives identical parameter vectors") {
    ModelConfig cfg{4, 2, 0.0, 42};
    Model a = build_model(cfg);
    Model b = build_model(cfg);
    CHECK(a.params == b.params);
    cfg.seed = 43;
    Model c = build_model(cfg);
    CHECK(a.params != c.params);
}

TEST_CASE("forward preserves the input shape") {
    Model m = build_model(ModelConfig{2, 2, 0.0, 7});
    for (std::int64_t n : {8, 32}) {
        Volume v = random_volume(Dims3{n, n, n}, 1);
        Volume out = forward(m, v);
        CHECK(out.dims == v.dims);
        CHECK(all_finite(out));
    }
    // 96^3 with depth 3
    Model deep = build_model(ModelConfig{1, 3, 0.0, 7});
    Volume big = random_volume(Dims3{96, 96, 96}, 2);
    CHECK(forward(deep, big).dims == big.dims);
}

TEST_CASE("indivisible cube sides are rejected") {
    Model m = build_model(ModelConfig{2, 3, 0.0, 7});
    Volume v = random_volume(Dims3{12, 12, 12}, 1);
    CHECK_THROWS_AS(forward(m, v), invalid_input);
}

TEST_CASE("eval forward is deterministic; dropout only acts in training") {
    Volume v = random_volume(Dims3{8, 8, 8}, 3);

    SUBCASE("no dropout: training equals eval") {
        Model m = build_model(ModelConfig{2, 1, 0.0, 9});
        Volume e = forward(m, v, false);
        Volume t = forward(m, v, true, 123);
        CHECK(max_abs_diff(e, t) == 0.0);
    }
    SUBCASE("dropout changes training outputs but not eval") {
        Model m = build_model(ModelConfig{2, 1, 0.3, 9});
        Volume e1 = forward(m, v, false);
        Volume e2 = forward(m, v, false);
        CHECK(max_abs_diff(e1, e2) == 0.0);
        Volume t1 = forward(m, v, true, 1);
        Volume t2 = forward(m, v, true, 2);
        CHECK(max_abs_diff(t1, t2) > 0.0);
        // same dropout stream reproduces the same output
        Volume t3 = forward(m, v, true, 1);
        CHECK(max_abs_diff(t1, t3) == 0.0);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    // double instantiation of the same templated engine; the loss is the
    // wedge-masked Fourier objective used in fitting
    const ModelConfig cfg{2, 2, 0.0, 11};
    nn::UNet<double> net(cfg);
    Model proto = build_model(cfg);
    std::vector<double> params(proto.params.begin(), proto.params.end());

    const Dims3 dims{8, 8, 8};
    Volume input = random_volume(dims, 21);
    Volume target = random_volume(dims, 22);
    const WedgeMask m = wedge_mask(dims, 60.0);
    std::mt19937_64 phi_rng(5);
    const WedgeMask m_phi = wedge_mask(dims, 60.0, sample_rotation(phi_rng));

    nn::Tensor<double> in;
    in.resize(1, dims.d, dims.h, dims.w);
    for (std::size_t i = 0; i < input.data.size(); ++i) in.v[i] = input.data[i];

    auto loss_of = [&](const std::vector<double>& p) {
        nn::Tensor<double> out = net.forward(std::span<const double>(p), in, false, 0, nullptr);
        Volume pred(dims, 1.0);
        for (std::size_t i = 0; i < pred.data.size(); ++i) pred.data[i] = out.v[i];
        return sample_loss(pred, target, m, m_phi);
    };

    // analytic gradient
    nn::Tape<double> tape;
    nn::Tensor<double> out = net.forward(std::span<const double>(params), in, false, 0, &tape);
    Volume pred(dims, 1.0);
    for (std::size_t i = 0; i < pred.data.size(); ++i) pred.data[i] = out.v[i];

    Volume diff = pred;
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= target.data[i];
    SpectralVolume fd = to_fourier(diff);
    for (std::size_t i = 0; i < fd.data.size(); ++i) {
        const double w = m_phi.keep[i] ? (m.keep[i] ? 1.0 : 4.0) : 0.0;
        fd.data[i] *= w;
    }
    Volume grad_pred = from_fourier(fd);
    for (auto& g : grad_pred.data) g *= 2.0 * static_cast<double>(dims.total());
    nn::Tensor<double> grad_out;
    grad_out.resize(1, dims.d, dims.h, dims.w);
    for (std::size_t i = 0; i < grad_pred.data.size(); ++i) grad_out.v[i] = grad_pred.data[i];

    std::vector<double> grad(params.size(), 0.0);
    net.backward(std::span<const double>(params), tape, grad_out, std::span<double>(grad));

    double max_grad = 0.0;
    for (double g : grad) max_grad = std::max(max_grad, std::abs(g));
    REQUIRE(max_grad > 0.0);

    std::mt19937_64 pick(2025);
    std::uniform_int_distribution<std::size_t> dist(0, params.size() - 1);
    for (int k = 0; k < 5; ++k) {
        const std::size_t j = dist(pick);
        const double h = 1e-4 * (1.0 + std::abs(params[j]));
        std::vector<double> plus = params, minus = params;
        plus[j] += h;
        minus[j] -= h;
        const double fd_grad = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
        const double denom = std::max({std::abs(fd_grad), std::abs(grad[j]), 1e-9 * max_grad});
        CHECK(std::abs(fd_grad - grad[j]) / denom < 1e-3);
    }
}

TEST_CASE("float and double engines agree on the forward pass") {
    const ModelConfig cfg{2, 1, 0.0, 31};
    Model m = build_model(cfg);
    Volume v = random_volume(Dims3{8, 8, 8}, 6);
    Volume out_f = forward(m, v);

    nn::UNet<double> net(cfg);
    std::vector<double> params(m.params.begin(), m.params.end());
    nn::Tensor<double> in;
    in.resize(1, 8, 8, 8);
    for (std::size_t i = 0; i < v.data.size(); ++i) in.v[i] = v.data[i];
    nn::Tensor<double> out_d = net.forward(std::span<const double>(params), in, false, 0, nullptr);
    double max_rel = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < out_d.v.size(); ++i) scale = std::max(scale, std::abs(out_d.v[i]));
    for (std::size_t i = 0; i < out_d.v.size(); ++i)
        max_rel = std::max(max_rel, std::abs(out_d.v[i] - out_f.data[i]) / scale);
    CHECK(max_rel < 1e-4);
}

TEST_CASE("checkpoint round trip and validation") {
    Model m = build_model(ModelConfig{3, 2, 0.25, 77});
    const std::string path = "test_model_roundtrip.ckpt";
    save_model(m, path);
    Model back = load_model(path);
    CHECK(back.config.base_channels == 3);
    CHECK(back.config.depth == 2);
    CHECK(back.config.dropout_p == doctest::Approx(0.25));
    CHECK(back.config.seed == 77);
    CHECK(back.params == m.params);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_model("does_not_exist.ckpt"), invalid_input);
}

TEST_CASE("invalid model configs are rejected") {
    CHECK_THROWS_AS(build_model(ModelConfig{0, 3, 0.0, 0}), invalid_input);
    CHECK_THROWS_AS(build_model(ModelConfig{4, 0, 0.0, 0}), invalid_input);
    CHECK_THROWS_AS(build_model(ModelConfig{4, 2, 1.0, 0}), invalid_input);
}
