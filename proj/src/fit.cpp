#include "dewedge/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "dewedge/fft.hpp"
#include "nn.hpp"

namespace dewedge {

std::string to_string(FitMode m) {
    return m == FitMode::deepdewedge ? "deepdewedge" : "noise2noise_only";
}

FitMode fit_mode_from_string(const std::string& s) {
    if (s == "deepdewedge") return FitMode::deepdewedge;
    if (s == "noise2noise_only") return FitMode::noise2noise_only;
    throw invalid_input("unknown fit mode: " + s);
}

namespace {

// RNG stream tags
constexpr std::uint64_t kNormTag = 1;
constexpr std::uint64_t kRotTag = 2;
constexpr std::uint64_t kDropTag = 3;
constexpr std::uint64_t kShuffleTag = 4;

// Per-bin squared loss weights: u_k = w_k^2 with w = M M_phi + 2 M^C M_phi
// for the full objective, or w = M M_phi for the denoising-only one.
std::vector<double> loss_weights(const FourierMask& m, const FourierMask& m_phi, FitMode mode) {
    if (m.dims != m_phi.dims) throw invalid_input("sample_loss: mask shape mismatch");
    std::vector<double> u(m.keep.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!m_phi.keep[i]) {
            u[i] = 0.0;
        } else if (m.keep[i]) {
            u[i] = 1.0;
        } else {
            u[i] = mode == FitMode::deepdewedge ? 4.0 : 0.0;
        }
    }
    return u;
}

double weighted_fourier_sse(const Volume& pred, const Volume& target,
                            const std::vector<double>& u) {
    if (pred.dims != target.dims) throw invalid_input("sample_loss: shape mismatch");
    Volume diff = pred;
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= target.data[i];
    SpectralVolume fd = to_fourier(diff);
    double loss = 0.0;
    for (std::size_t i = 0; i < fd.data.size(); ++i) loss += u[i] * std::norm(fd.data[i]);
    return loss;
}

// Returns the loss and writes dL/dpred = 2 N F^-1(u .* F(pred - target)),
// which is real because u is centrally symmetric.
double loss_and_grad(const Volume& pred, const Volume& target, const std::vector<double>& u,
                     Volume& grad) {
    Volume diff = pred;
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= target.data[i];
    SpectralVolume fd = to_fourier(diff);
    double loss = 0.0;
    for (std::size_t i = 0; i < fd.data.size(); ++i) {
        loss += u[i] * std::norm(fd.data[i]);
        fd.data[i] *= u[i];
    }
    const double n = static_cast<double>(pred.dims.total());
    grad = from_fourier(fd);
    for (auto& g : grad.data) g *= 2.0 * n;
    return loss;
}

nn::Tensor<float> to_tensor(const Volume& v) {
    nn::Tensor<float> t;
    t.resize(1, v.dims.d, v.dims.h, v.dims.w);
    for (std::size_t i = 0; i < v.data.size(); ++i) t.v[i] = static_cast<float>(v.data[i]);
    return t;
}

Volume to_volume(const nn::Tensor<float>& t, const Dims3& dims, double voxel) {
    Volume v(dims, voxel);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(t.v[i]);
    return v;
}

struct AdamState {
    std::vector<float> m, v;
    std::int64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

    void step(std::vector<float>& params, const std::vector<float>& grad, const FitConfig& cfg) {
        ++t;
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
        const double lr = cfg.learning_rate;
        const double eps = cfg.adam_epsilon;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = static_cast<double>(grad[i]);
            const double mi = b1 * m[i] + (1.0 - b1) * g;
            const double vi = b2 * v[i] + (1.0 - b2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            params[i] -= static_cast<float>(lr * (mi / corr1) / (std::sqrt(vi / corr2) + eps));
        }
    }
};

FitSample build_sample(const Volume& v0, const Volume& v1, const EulerAngles& phi,
                       const WedgeMask& m, bool apply_input_wedge) {
    if (v0.dims != v1.dims) throw invalid_input("fit sample: pair cubes must be congruent");
    const Dims3 target_dims = m.dims;
    if (target_dims.d > v0.dims.d || ((v0.dims.d - target_dims.d) % 2) != 0)
        throw invalid_input("fit sample: mask shape incompatible with extracted cube");
    FitSample s;
    s.angles = phi;
    Volume in = crop_center(rotate_volume(v0, phi), target_dims);
    s.target = crop_center(rotate_volume(v1, phi), target_dims);
    s.input = apply_input_wedge ? apply_wedge(in, m) : std::move(in);
    return s;
}

}  // namespace

FitSample make_fit_sample(const SubTomoPair& pair, const EulerAngles& phi, const WedgeMask& m) {
    return build_sample(pair.v0, pair.v1, phi, m, true);
}

double sample_loss(const Volume& pred, const Volume& target, const WedgeMask& m,
                   const WedgeMask& m_phi) {
    return weighted_fourier_sse(pred, target, loss_weights(m, m_phi, FitMode::deepdewedge));
}

double noise2noise_loss(const Volume& pred, const Volume& target, const WedgeMask& m,
                        const WedgeMask& m_phi) {
    return weighted_fourier_sse(pred, target, loss_weights(m, m_phi, FitMode::noise2noise_only));
}

std::vector<Volume> update_input_wedges(const Model& m, const std::vector<Volume>& inputs,
                                        const WedgeMask& wedge) {
    std::vector<Volume> out(inputs.size());
    const FourierMask missing = complement(wedge);
    parallel_chunks(static_cast<std::int64_t>(inputs.size()), 0,
                    [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const Volume& v = inputs[static_cast<std::size_t>(i)];
            if (v.dims != wedge.dims)
                throw invalid_input("update_input_wedges: cube/mask shape mismatch");
            Volume pred = forward(m, v, /*train_mode=*/false);
            SpectralVolume fv = to_fourier(v);
            SpectralVolume fp = to_fourier(pred);
            for (std::size_t k = 0; k < fv.data.size(); ++k)
                if (missing.keep[k]) fv.data[k] = fp.data[k];
            out[static_cast<std::size_t>(i)] = from_fourier(fv);
        }
    });
    return out;
}

std::int64_t oversize_for_rotation(std::int64_t cube, int depth) {
    if (cube < 1) throw invalid_input("oversize_for_rotation: cube must be >= 1");
    const std::int64_t div = std::max<std::int64_t>(2, std::int64_t(1) << depth);
    const auto needed = static_cast<std::int64_t>(std::ceil(std::sqrt(3.0) * static_cast<double>(cube)));
    return ((needed + div - 1) / div) * div;
}

FitResult fit(const std::vector<SubTomoPair>& pairs, const Model& model, const FitConfig& cfg) {
    if (pairs.empty()) throw invalid_input("fit: no sub-tomogram pairs");
    if (!(cfg.learning_rate > 0.0)) throw invalid_input("fit: learning_rate must be > 0");
    if (cfg.epochs < 1) throw invalid_input("fit: epochs must be >= 1");
    if (cfg.batch_size < 1) throw invalid_input("fit: batch_size must be >= 1");

    const Dims3 extracted = pairs.front().v0.dims;
    if (!extracted.cubic()) throw invalid_input("fit: extracted cubes must be cubic");
    for (const auto& p : pairs)
        if (p.v0.dims != extracted || p.v1.dims != extracted)
            throw invalid_input("fit: all pairs must share one cube size");

    const int depth = model.config.depth;
    const std::int64_t div = std::int64_t(1) << depth;
    std::int64_t s = cfg.cube_size;
    if (s == 0) {
        s = static_cast<std::int64_t>(std::floor(static_cast<double>(extracted.d) / std::sqrt(3.0)));
        s -= s % div;
    }
    if (s < div || s > extracted.d || (s % div) != 0 || ((extracted.d - s) % 2) != 0)
        throw invalid_input("fit: cube_size " + std::to_string(s) +
                            " incompatible with extracted side " + std::to_string(extracted.d) +
                            " and depth " + std::to_string(depth));
    const bool do_update = cfg.mode == FitMode::deepdewedge && cfg.update_input_wedges;
    if (do_update && (extracted.d % div) != 0)
        throw invalid_input(
            "fit: extracted cube side must be divisible by 2^depth for the wedge update");

    const std::size_t n = pairs.size();
    const WedgeMask crop_mask = wedge_mask(Dims3{s, s, s}, cfg.wedge_alpha_max_deg);
    const bool mask_inputs = cfg.mode == FitMode::deepdewedge;

    std::vector<Volume> w0, w1;
    w0.reserve(n);
    w1.reserve(n);
    for (const auto& p : pairs) {
        w0.push_back(p.v0);
        w1.push_back(p.v1);
    }

    // Normalization constants from one batch of preliminary model inputs.
    std::vector<Volume> prelim(n);
    parallel_chunks(static_cast<std::int64_t>(n), 0, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            std::mt19937_64 rng(mix_seed(cfg.seed, kNormTag, static_cast<std::uint64_t>(i)));
            const EulerAngles phi = sample_rotation(rng);
            prelim[static_cast<std::size_t>(i)] =
                build_sample(w0[static_cast<std::size_t>(i)], w1[static_cast<std::size_t>(i)], phi,
                             crop_mask, mask_inputs)
                    .input;
        }
    });
    const NormStats stats = compute_norm_stats(prelim);
    prelim.clear();
    for (std::size_t i = 0; i < n; ++i) {
        w0[i] = standardize(w0[i], stats);
        w1[i] = standardize(w1[i], stats);
    }

    nn::UNet<float> net(model.config);
    if (model.params.size() != net.param_count())
        throw invalid_input("fit: model parameter vector does not match its config");
    Model fitted = model;
    AdamState adam(fitted.params.size());

    WedgeMask full_mask;
    if (do_update) full_mask = wedge_mask(extracted, cfg.wedge_alpha_max_deg);

    std::vector<double> loss_history;
    loss_history.reserve(static_cast<std::size_t>(cfg.epochs));

    std::vector<std::size_t> order(n);
    std::vector<float> batch_grad(fitted.params.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        for (std::size_t batch_start = 0; batch_start < n;
             batch_start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t batch_end =
                std::min(n, batch_start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t batch_count = batch_end - batch_start;

            std::vector<std::vector<float>> sample_grads(batch_count);
            std::vector<double> sample_losses(batch_count, 0.0);
            parallel_chunks(static_cast<std::int64_t>(batch_count), 0,
                            [&](std::int64_t b0, std::int64_t b1) {
                for (std::int64_t b = b0; b < b1; ++b) {
                    const std::size_t idx = order[batch_start + static_cast<std::size_t>(b)];
                    std::mt19937_64 rot_rng(mix_seed(cfg.seed, kRotTag,
                                                     static_cast<std::uint64_t>(epoch),
                                                     static_cast<std::uint64_t>(idx)));
                    const EulerAngles phi = sample_rotation(rot_rng);
                    FitSample sample = build_sample(w0[idx], w1[idx], phi, crop_mask, mask_inputs);
                    const WedgeMask m_phi =
                        wedge_mask(crop_mask.dims, cfg.wedge_alpha_max_deg, phi);
                    const std::vector<double> u = loss_weights(crop_mask, m_phi, cfg.mode);

                    nn::Tape<float> tape;
                    const std::uint64_t drop_seed = mix_seed(cfg.seed, kDropTag,
                                                             static_cast<std::uint64_t>(epoch),
                                                             static_cast<std::uint64_t>(idx));
                    nn::Tensor<float> out =
                        net.forward(std::span<const float>(fitted.params), to_tensor(sample.input),
                                    /*train=*/true, drop_seed, &tape);
                    Volume pred = to_volume(out, crop_mask.dims, sample.input.voxel_size);

                    Volume grad_pred;
                    sample_losses[static_cast<std::size_t>(b)] =
                        loss_and_grad(pred, sample.target, u, grad_pred);

                    nn::Tensor<float> grad_out = to_tensor(grad_pred);
                    auto& gbuf = sample_grads[static_cast<std::size_t>(b)];
                    gbuf.assign(fitted.params.size(), 0.0f);
                    net.backward(std::span<const float>(fitted.params), tape, grad_out,
                                 std::span<float>(gbuf));
                }
            });

            std::fill(batch_grad.begin(), batch_grad.end(), 0.0f);
            const float scale = 1.0f / static_cast<float>(batch_count);
            for (std::size_t b = 0; b < batch_count; ++b) {
                const auto& g = sample_grads[b];
                for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i] += g[i] * scale;
                epoch_loss += sample_losses[b];
            }
            adam.step(fitted.params, batch_grad, cfg);
        }

        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw numeric_failure("fit: non-finite loss at epoch " + std::to_string(epoch) +
                                  "; fitting diverged");
        loss_history.push_back(epoch_loss);

        if (do_update) w0 = update_input_wedges(fitted, w0, full_mask);

        if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_dir.empty() &&
            (epoch + 1) % cfg.checkpoint_interval == 0) {
            save_model(fitted, cfg.checkpoint_dir + "/model_epoch_" + std::to_string(epoch + 1) +
                                   ".ckpt");
        }
    }

    FitResult result;
    result.model = std::move(fitted);
    result.loss_history = std::move(loss_history);
    result.updated_inputs = std::move(w0);
    result.stats = stats;
    return result;
}

void write_loss_csv(const std::string& path, const std::vector<double>& loss_history) {
    std::ofstream f(path);
    if (!f) throw invalid_input("write_loss_csv: cannot open " + path);
    f << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < loss_history.size(); ++e) {
        f << (e + 1) << "," << std::setprecision(17) << loss_history[e] << "\n";
    }
}

}  // namespace dewedge
