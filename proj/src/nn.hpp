#pragma once

// Internal volumetric U-Net engine: 3^3 convolutions, leaky rectifier
// (slope 0.1), 2x max-pool downsampling, transposed-convolution upsampling
// (kernel 3, stride 2, realized as zero-stuffing + a flipped-kernel
// convolution over the stuffed grid), skip concatenation, final 1^3
// projection. Templated on the scalar so the float production path and the
// double path used by finite-difference tests share one implementation.

#include <cblas.h>

#include <cstring>
#include <random>
#include <span>
#include <vector>

#include "dewedge/common.hpp"
#include "dewedge/model.hpp"

namespace dewedge::nn {

template <typename S>
struct Tensor {
    std::int64_t c = 0, d = 0, h = 0, w = 0;
    std::vector<S> v;

    void resize(std::int64_t c_, std::int64_t d_, std::int64_t h_, std::int64_t w_) {
        c = c_;
        d = d_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(c * d * h * w), S(0));
    }
    std::int64_t spatial() const { return d * h * w; }
    S* channel(std::int64_t ci) { return v.data() + ci * spatial(); }
    const S* channel(std::int64_t ci) const { return v.data() + ci * spatial(); }
};

inline void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::int64_t m, std::int64_t n,
                 std::int64_t k, float alpha, const float* a, std::int64_t lda, const float* b,
                 std::int64_t ldb, float beta, float* c, std::int64_t ldc) {
    cblas_sgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, c, static_cast<int>(ldc));
}

inline void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::int64_t m, std::int64_t n,
                 std::int64_t k, double alpha, const double* a, std::int64_t lda, const double* b,
                 std::int64_t ldb, double beta, double* c, std::int64_t ldc) {
    cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, c, static_cast<int>(ldc));
}

// ---------------------------------------------------------------------------
// im2col for 3^3 stride-1 pad-1 convolution, built per z-slab to bound memory.
// Column order is (z, y, x) within the slab; row order is (ci, kz, ky, kx),
// matching the weight layout W[cout][cin][kz][ky][kx].

template <typename S>
void im2col_slab(const Tensor<S>& in, std::int64_t z0, std::int64_t z1, std::vector<S>& col) {
    const std::int64_t d = in.d, h = in.h, w = in.w;
    const std::int64_t ncols = (z1 - z0) * h * w;
    col.assign(static_cast<std::size_t>(in.c * 27 * ncols), S(0));
    for (std::int64_t ci = 0; ci < in.c; ++ci) {
        const S* src_c = in.channel(ci);
        for (int kz = 0; kz < 3; ++kz)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const std::int64_t row = ((ci * 3 + kz) * 3 + ky) * 3 + kx;
                    S* dst_row = col.data() + row * ncols;
                    for (std::int64_t z = z0; z < z1; ++z) {
                        const std::int64_t sz = z + kz - 1;
                        for (std::int64_t y = 0; y < h; ++y) {
                            const std::int64_t sy = y + ky - 1;
                            S* dst = dst_row + ((z - z0) * h + y) * w;
                            if (sz < 0 || sz >= d || sy < 0 || sy >= h) continue;  // stays zero
                            const S* src = src_c + (sz * h + sy) * w;
                            if (kx == 1) {
                                std::memcpy(dst, src, sizeof(S) * static_cast<std::size_t>(w));
                            } else if (kx == 0) {
                                std::memcpy(dst + 1, src, sizeof(S) * static_cast<std::size_t>(w - 1));
                            } else {
                                std::memcpy(dst, src + 1, sizeof(S) * static_cast<std::size_t>(w - 1));
                            }
                        }
                    }
                }
    }
}

// Number of z-slices per chunk so the column buffer stays near 32 MB.
template <typename S>
std::int64_t conv_chunk_slices(std::int64_t cin, std::int64_t h, std::int64_t w) {
    const std::int64_t budget = 32ll * 1024 * 1024 / static_cast<std::int64_t>(sizeof(S));
    std::int64_t per_slice = cin * 27 * h * w;
    std::int64_t slices = per_slice > 0 ? budget / per_slice : 1;
    return slices < 1 ? 1 : slices;
}

// out = W * col(in) + bias. W is [cout x (cin*27)], out keeps the input's
// spatial shape.
template <typename S>
void conv3_forward(const Tensor<S>& in, std::span<const S> weights, std::span<const S> bias,
                   Tensor<S>& out, std::vector<S>& scratch) {
    const std::int64_t cout = static_cast<std::int64_t>(bias.size());
    const std::int64_t k = in.c * 27;
    out.resize(cout, in.d, in.h, in.w);
    const std::int64_t chunk = conv_chunk_slices<S>(in.c, in.h, in.w);
    for (std::int64_t z0 = 0; z0 < in.d; z0 += chunk) {
        const std::int64_t z1 = std::min(in.d, z0 + chunk);
        const std::int64_t ncols = (z1 - z0) * in.h * in.w;
        im2col_slab(in, z0, z1, scratch);
        gemm(CblasNoTrans, CblasNoTrans, cout, ncols, k, S(1), weights.data(), k, scratch.data(),
             ncols, S(0), out.v.data() + z0 * in.h * in.w, out.spatial());
    }
    for (std::int64_t co = 0; co < cout; ++co) {
        S* ch = out.channel(co);
        const S b = bias[static_cast<std::size_t>(co)];
        for (std::int64_t i = 0; i < out.spatial(); ++i) ch[i] += b;
    }
}

// grad_in = conv3(grad_out, W~) where W~[ci][(co, k)] = W[co][(ci, flip k)].
template <typename S>
void conv3_grad_input(const Tensor<S>& grad_out, std::span<const S> weights, std::int64_t cin,
                      Tensor<S>& grad_in, std::vector<S>& scratch, std::vector<S>& wflip) {
    const std::int64_t cout = grad_out.c;
    wflip.assign(static_cast<std::size_t>(cin * cout * 27), S(0));
    for (std::int64_t co = 0; co < cout; ++co)
        for (std::int64_t ci = 0; ci < cin; ++ci)
            for (int t = 0; t < 27; ++t)
                wflip[static_cast<std::size_t>((ci * cout + co) * 27 + (26 - t))] =
                    weights[static_cast<std::size_t>((co * cin + ci) * 27 + t)];

    const std::int64_t k = cout * 27;
    grad_in.resize(cin, grad_out.d, grad_out.h, grad_out.w);
    const std::int64_t chunk = conv_chunk_slices<S>(cout, grad_out.h, grad_out.w);
    for (std::int64_t z0 = 0; z0 < grad_out.d; z0 += chunk) {
        const std::int64_t z1 = std::min(grad_out.d, z0 + chunk);
        const std::int64_t ncols = (z1 - z0) * grad_out.h * grad_out.w;
        im2col_slab(grad_out, z0, z1, scratch);
        gemm(CblasNoTrans, CblasNoTrans, cin, ncols, k, S(1), wflip.data(), k, scratch.data(),
             ncols, S(0), grad_in.v.data() + z0 * grad_out.h * grad_out.w, grad_in.spatial());
    }
}

// grad_W += grad_out * col(in)^T, grad_bias += row sums of grad_out.
template <typename S>
void conv3_grad_params(const Tensor<S>& in, const Tensor<S>& grad_out, std::span<S> grad_weights,
                       std::span<S> grad_bias, std::vector<S>& scratch) {
    const std::int64_t cout = grad_out.c;
    const std::int64_t k = in.c * 27;
    const std::int64_t chunk = conv_chunk_slices<S>(in.c, in.h, in.w);
    for (std::int64_t z0 = 0; z0 < in.d; z0 += chunk) {
        const std::int64_t z1 = std::min(in.d, z0 + chunk);
        const std::int64_t ncols = (z1 - z0) * in.h * in.w;
        im2col_slab(in, z0, z1, scratch);
        gemm(CblasNoTrans, CblasTrans, cout, k, ncols, S(1),
             grad_out.v.data() + z0 * in.h * in.w, grad_out.spatial(), scratch.data(), ncols, S(1),
             grad_weights.data(), k);
    }
    for (std::int64_t co = 0; co < cout; ++co) {
        const S* ch = grad_out.channel(co);
        S acc = S(0);
        for (std::int64_t i = 0; i < grad_out.spatial(); ++i) acc += ch[i];
        grad_bias[static_cast<std::size_t>(co)] += acc;
    }
}

// 1^3 convolution (channel mixing), used for the output head.
template <typename S>
void conv1_forward(const Tensor<S>& in, std::span<const S> weights, std::span<const S> bias,
                   Tensor<S>& out) {
    const std::int64_t cout = static_cast<std::int64_t>(bias.size());
    out.resize(cout, in.d, in.h, in.w);
    gemm(CblasNoTrans, CblasNoTrans, cout, in.spatial(), in.c, S(1), weights.data(), in.c,
         in.v.data(), in.spatial(), S(0), out.v.data(), out.spatial());
    for (std::int64_t co = 0; co < cout; ++co) {
        S* ch = out.channel(co);
        const S b = bias[static_cast<std::size_t>(co)];
        for (std::int64_t i = 0; i < out.spatial(); ++i) ch[i] += b;
    }
}

template <typename S>
void conv1_grad(const Tensor<S>& in, const Tensor<S>& grad_out, std::span<const S> weights,
                std::span<S> grad_weights, std::span<S> grad_bias, Tensor<S>& grad_in) {
    gemm(CblasNoTrans, CblasTrans, grad_out.c, in.c, in.spatial(), S(1), grad_out.v.data(),
         grad_out.spatial(), in.v.data(), in.spatial(), S(1), grad_weights.data(), in.c);
    for (std::int64_t co = 0; co < grad_out.c; ++co) {
        const S* ch = grad_out.channel(co);
        S acc = S(0);
        for (std::int64_t i = 0; i < grad_out.spatial(); ++i) acc += ch[i];
        grad_bias[static_cast<std::size_t>(co)] += acc;
    }
    grad_in.resize(in.c, in.d, in.h, in.w);
    gemm(CblasTrans, CblasNoTrans, in.c, in.spatial(), grad_out.c, S(1), weights.data(), in.c,
         grad_out.v.data(), grad_out.spatial(), S(0), grad_in.v.data(), grad_in.spatial());
}

template <typename S>
void leaky_relu_inplace(Tensor<S>& t) {
    for (auto& x : t.v)
        if (x < S(0)) x *= S(0.1);
}

// Derivative from the activated value: output > 0 iff input > 0.
template <typename S>
void leaky_relu_backward_inplace(const Tensor<S>& activated, Tensor<S>& grad) {
    for (std::size_t i = 0; i < grad.v.size(); ++i)
        if (activated.v[i] <= S(0)) grad.v[i] *= S(0.1);
}

template <typename S>
void maxpool2_forward(const Tensor<S>& in, Tensor<S>& out, std::vector<std::uint8_t>& argmax) {
    out.resize(in.c, in.d / 2, in.h / 2, in.w / 2);
    argmax.assign(out.v.size(), 0);
    for (std::int64_t ci = 0; ci < in.c; ++ci) {
        const S* src = in.channel(ci);
        S* dst = out.channel(ci);
        std::uint8_t* am = argmax.data() + ci * out.spatial();
        for (std::int64_t z = 0; z < out.d; ++z)
            for (std::int64_t y = 0; y < out.h; ++y)
                for (std::int64_t x = 0; x < out.w; ++x) {
                    S best = -std::numeric_limits<S>::infinity();
                    std::uint8_t best_idx = 0;
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const S val =
                                    src[((2 * z + dz) * in.h + 2 * y + dy) * in.w + 2 * x + dx];
                                const std::uint8_t idx = static_cast<std::uint8_t>(dz * 4 + dy * 2 + dx);
                                if (val > best) {
                                    best = val;
                                    best_idx = idx;
                                }
                            }
                    dst[(z * out.h + y) * out.w + x] = best;
                    am[(z * out.h + y) * out.w + x] = best_idx;
                }
    }
}

template <typename S>
void maxpool2_backward(const Tensor<S>& grad_out, const std::vector<std::uint8_t>& argmax,
                       Tensor<S>& grad_in, std::int64_t in_d, std::int64_t in_h, std::int64_t in_w) {
    grad_in.resize(grad_out.c, in_d, in_h, in_w);
    for (std::int64_t ci = 0; ci < grad_out.c; ++ci) {
        const S* go = grad_out.channel(ci);
        S* gi = grad_in.channel(ci);
        const std::uint8_t* am = argmax.data() + ci * grad_out.spatial();
        for (std::int64_t z = 0; z < grad_out.d; ++z)
            for (std::int64_t y = 0; y < grad_out.h; ++y)
                for (std::int64_t x = 0; x < grad_out.w; ++x) {
                    const std::int64_t o = (z * grad_out.h + y) * grad_out.w + x;
                    const std::uint8_t idx = am[o];
                    const std::int64_t dz = idx / 4, dy = (idx / 2) % 2, dx = idx % 2;
                    gi[((2 * z + dz) * in_h + 2 * y + dy) * in_w + 2 * x + dx] = go[o];
                }
    }
}

// Zero-stuffing: u[2z][2y][2x] = x[z][y][x]; everything else zero. Convolving
// the stuffed grid with a 3^3 kernel realizes the stride-2 transposed
// convolution with output padding 1.
template <typename S>
void zero_stuff(const Tensor<S>& in, Tensor<S>& out) {
    out.resize(in.c, in.d * 2, in.h * 2, in.w * 2);
    for (std::int64_t ci = 0; ci < in.c; ++ci) {
        const S* src = in.channel(ci);
        S* dst = out.channel(ci);
        for (std::int64_t z = 0; z < in.d; ++z)
            for (std::int64_t y = 0; y < in.h; ++y) {
                const S* s = src + (z * in.h + y) * in.w;
                S* d = dst + (2 * z * out.h + 2 * y) * out.w;
                for (std::int64_t x = 0; x < in.w; ++x) d[2 * x] = s[x];
            }
    }
}

template <typename S>
void zero_unstuff_grad(const Tensor<S>& grad_stuffed, Tensor<S>& grad_in) {
    grad_in.resize(grad_stuffed.c, grad_stuffed.d / 2, grad_stuffed.h / 2, grad_stuffed.w / 2);
    for (std::int64_t ci = 0; ci < grad_in.c; ++ci) {
        const S* src = grad_stuffed.channel(ci);
        S* dst = grad_in.channel(ci);
        for (std::int64_t z = 0; z < grad_in.d; ++z)
            for (std::int64_t y = 0; y < grad_in.h; ++y) {
                const S* s = src + (2 * z * grad_stuffed.h + 2 * y) * grad_stuffed.w;
                S* d = dst + (z * grad_in.h + y) * grad_in.w;
                for (std::int64_t x = 0; x < grad_in.w; ++x) d[x] = s[2 * x];
            }
    }
}

template <typename S>
void concat_channels(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& out) {
    out.resize(a.c + b.c, a.d, a.h, a.w);
    std::memcpy(out.v.data(), a.v.data(), sizeof(S) * a.v.size());
    std::memcpy(out.v.data() + a.v.size(), b.v.data(), sizeof(S) * b.v.size());
}

// ---------------------------------------------------------------------------
// Network description

struct ConvDesc {
    std::int64_t cin = 0, cout = 0;
    int kernel = 3;            // 3 or 1
    bool stuffed_input = false;  // transposed-convolution upsampling
    std::size_t w_off = 0, b_off = 0;

    std::size_t weight_count() const {
        return static_cast<std::size_t>(cin * cout * (kernel == 3 ? 27 : 1));
    }
};

struct NetPlan {
    std::vector<ConvDesc> convs;
    int depth = 0;
    std::int64_t base = 0;
    double dropout_p = 0.0;
    std::size_t param_count = 0;

    explicit NetPlan(const ModelConfig& cfg) {
        depth = cfg.depth;
        base = cfg.base_channels;
        dropout_p = cfg.dropout_p;
        auto add = [&](std::int64_t cin, std::int64_t cout, int kernel, bool stuffed) {
            ConvDesc d;
            d.cin = cin;
            d.cout = cout;
            d.kernel = kernel;
            d.stuffed_input = stuffed;
            d.w_off = param_count;
            param_count += d.weight_count();
            d.b_off = param_count;
            param_count += static_cast<std::size_t>(cout);
            convs.push_back(d);
        };
        std::int64_t cin = 1;
        for (int l = 0; l < depth; ++l) {
            const std::int64_t ch = base << l;
            add(cin, ch, 3, false);
            add(ch, ch, 3, false);
            cin = ch;
        }
        const std::int64_t bott = base << depth;
        add(cin, bott, 3, false);
        add(bott, bott, 3, false);
        for (int l = depth - 1; l >= 0; --l) {
            const std::int64_t ch = base << l;
            const std::int64_t above = base << (l + 1);
            add(above, ch, 3, true);   // upsample
            add(2 * ch, ch, 3, false);  // after skip concatenation
            add(ch, ch, 3, false);
        }
        add(base, 1, 1, false);
    }
};

template <typename S>
struct Tape {
    std::vector<Tensor<S>> conv_inputs;            // per conv, the tensor fed to it
    std::vector<std::vector<std::uint8_t>> pool_idx;  // per encoder level
    std::vector<Tensor<S>> activations;            // per conv, activated output (pre-dropout)
    std::vector<std::vector<std::uint8_t>> dropout_masks;  // per block with dropout
};

template <typename S>
class UNet {
public:
    explicit UNet(const ModelConfig& cfg) : plan_(cfg), cfg_(cfg) {}

    std::size_t param_count() const { return plan_.param_count; }
    const NetPlan& plan() const { return plan_; }

    // input: single-channel tensor; cube side must be divisible by 2^depth.
    Tensor<S> forward(std::span<const S> params, const Tensor<S>& input, bool train,
                      std::uint64_t dropout_seed, Tape<S>* tape) const;

    // grad_output has the output's shape; gradients are accumulated into
    // grad_params (same layout as params).
    void backward(std::span<const S> params, const Tape<S>& tape, const Tensor<S>& grad_output,
                  std::span<S> grad_params) const;

private:
    struct Ws {
        std::vector<S> col, wflip;
    };

    Tensor<S> run_conv(std::span<const S> params, int conv_id, const Tensor<S>& in, Ws& ws) const {
        const ConvDesc& d = plan_.convs[static_cast<std::size_t>(conv_id)];
        Tensor<S> out;
        auto w = params.subspan(d.w_off, d.weight_count());
        auto b = params.subspan(d.b_off, static_cast<std::size_t>(d.cout));
        if (d.kernel == 1)
            conv1_forward(in, w, b, out);
        else
            conv3_forward(in, w, b, out, ws.col);
        return out;
    }

    void apply_dropout(Tensor<S>& t, bool train, std::mt19937_64& rng,
                       std::vector<std::uint8_t>* mask_out) const {
        const double p = plan_.dropout_p;
        if (p <= 0.0) return;
        if (!train) return;  // inverted dropout: eval path is untouched
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::vector<std::uint8_t> mask(t.v.size());
        const S scale = S(1.0 / (1.0 - p));
        for (std::size_t i = 0; i < t.v.size(); ++i) {
            const bool keep = uni(rng) >= p;
            mask[i] = keep ? 1 : 0;
            t.v[i] = keep ? t.v[i] * scale : S(0);
        }
        if (mask_out) *mask_out = std::move(mask);
    }

    NetPlan plan_;
    ModelConfig cfg_;
};

template <typename S>
Tensor<S> UNet<S>::forward(std::span<const S> params, const Tensor<S>& input, bool train,
                           std::uint64_t dropout_seed, Tape<S>* tape) const {
    if (input.c != 1) throw invalid_input("model forward: single-channel input expected");
    const std::int64_t div = std::int64_t(1) << plan_.depth;
    if (input.d % div || input.h % div || input.w % div || !(input.d && input.h && input.w))
        throw invalid_input("model forward: cube side must be divisible by 2^depth");

    Ws ws;
    std::mt19937_64 drop_rng(dropout_seed);
    const bool use_dropout = plan_.dropout_p > 0.0 && train;
    if (tape) {
        tape->conv_inputs.assign(plan_.convs.size(), {});
        tape->activations.assign(plan_.convs.size(), {});
        tape->pool_idx.assign(static_cast<std::size_t>(plan_.depth), {});
        tape->dropout_masks.assign(static_cast<std::size_t>(plan_.depth) + 1 +
                                       static_cast<std::size_t>(plan_.depth),
                                   {});
    }

    int conv_id = 0;
    int drop_id = 0;
    auto conv_act = [&](const Tensor<S>& in) {
        if (tape) tape->conv_inputs[static_cast<std::size_t>(conv_id)] = in;
        Tensor<S> out = run_conv(params, conv_id, in, ws);
        leaky_relu_inplace(out);
        if (tape) tape->activations[static_cast<std::size_t>(conv_id)] = out;
        ++conv_id;
        return out;
    };

    std::vector<Tensor<S>> skips;
    Tensor<S> cur = input;
    for (int l = 0; l < plan_.depth; ++l) {
        cur = conv_act(cur);
        cur = conv_act(cur);
        apply_dropout(cur, train, drop_rng,
                      tape && use_dropout ? &tape->dropout_masks[static_cast<std::size_t>(drop_id)]
                                          : nullptr);
        ++drop_id;
        skips.push_back(cur);
        Tensor<S> pooled;
        std::vector<std::uint8_t> idx;
        maxpool2_forward(cur, pooled, idx);
        if (tape) tape->pool_idx[static_cast<std::size_t>(l)] = std::move(idx);
        cur = std::move(pooled);
    }

    cur = conv_act(cur);
    cur = conv_act(cur);
    apply_dropout(cur, train, drop_rng,
                  tape && use_dropout ? &tape->dropout_masks[static_cast<std::size_t>(drop_id)]
                                      : nullptr);
    ++drop_id;

    for (int l = plan_.depth - 1; l >= 0; --l) {
        Tensor<S> stuffed;
        zero_stuff(cur, stuffed);
        cur = conv_act(stuffed);
        Tensor<S> merged;
        concat_channels(cur, skips[static_cast<std::size_t>(l)], merged);
        cur = conv_act(merged);
        cur = conv_act(cur);
        apply_dropout(cur, train, drop_rng,
                      tape && use_dropout ? &tape->dropout_masks[static_cast<std::size_t>(drop_id)]
                                          : nullptr);
        ++drop_id;
    }

    if (tape) tape->conv_inputs[static_cast<std::size_t>(conv_id)] = cur;
    Tensor<S> out = run_conv(params, conv_id, cur, ws);  // linear head, no activation
    return out;
}

template <typename S>
void UNet<S>::backward(std::span<const S> params, const Tape<S>& tape, const Tensor<S>& grad_output,
                       std::span<S> grad_params) const {
    Ws ws;
    const bool use_dropout = plan_.dropout_p > 0.0 && !tape.dropout_masks.empty() &&
                             !tape.dropout_masks[0].empty();
    const S drop_scale = S(plan_.dropout_p > 0.0 ? 1.0 / (1.0 - plan_.dropout_p) : 1.0);

    auto drop_backward = [&](Tensor<S>& grad, int drop_id) {
        if (!use_dropout) return;
        const auto& mask = tape.dropout_masks[static_cast<std::size_t>(drop_id)];
        for (std::size_t i = 0; i < grad.v.size(); ++i)
            grad.v[i] = mask[i] ? grad.v[i] * drop_scale : S(0);
    };

    int conv_id = static_cast<int>(plan_.convs.size()) - 1;

    // conv backward through activation; consumes grad for conv output,
    // returns grad for conv input.
    auto conv_back = [&](Tensor<S>& grad, bool through_activation) {
        const ConvDesc& d = plan_.convs[static_cast<std::size_t>(conv_id)];
        if (through_activation)
            leaky_relu_backward_inplace(tape.activations[static_cast<std::size_t>(conv_id)], grad);
        const Tensor<S>& in = tape.conv_inputs[static_cast<std::size_t>(conv_id)];
        auto gw = grad_params.subspan(d.w_off, d.weight_count());
        auto gb = grad_params.subspan(d.b_off, static_cast<std::size_t>(d.cout));
        Tensor<S> grad_in;
        if (d.kernel == 1) {
            auto w = params.subspan(d.w_off, d.weight_count());
            conv1_grad(in, grad, w, gw, gb, grad_in);
        } else {
            conv3_grad_params(in, grad, gw, gb, ws.col);
            auto w = params.subspan(d.w_off, d.weight_count());
            conv3_grad_input(grad, w, d.cin, grad_in, ws.col, ws.wflip);
        }
        --conv_id;
        return grad_in;
    };

    Tensor<S> grad = grad_output;
    grad = conv_back(grad, false);  // output head

    int drop_id = 2 * plan_.depth;  // last decoder block's dropout slot
    std::vector<Tensor<S>> skip_grads(static_cast<std::size_t>(plan_.depth));
    for (int l = 0; l < plan_.depth; ++l) {
        // decoder blocks were applied for l = depth-1 .. 0; reversed here
        drop_backward(grad, drop_id);
        --drop_id;
        grad = conv_back(grad, true);
        grad = conv_back(grad, true);
        // split concat gradient: [up_out | skip]
        const std::int64_t ch = grad.c / 2;
        Tensor<S> up_grad, skip_grad;
        up_grad.resize(ch, grad.d, grad.h, grad.w);
        skip_grad.resize(ch, grad.d, grad.h, grad.w);
        std::memcpy(up_grad.v.data(), grad.v.data(), sizeof(S) * up_grad.v.size());
        std::memcpy(skip_grad.v.data(), grad.v.data() + up_grad.v.size(),
                    sizeof(S) * skip_grad.v.size());
        skip_grads[static_cast<std::size_t>(l)] = std::move(skip_grad);
        Tensor<S> grad_stuffed = conv_back(up_grad, true);
        zero_unstuff_grad(grad_stuffed, grad);
    }

    // bottleneck
    drop_backward(grad, drop_id);
    --drop_id;
    grad = conv_back(grad, true);
    grad = conv_back(grad, true);

    for (int l = plan_.depth - 1; l >= 0; --l) {
        const Tensor<S>& pre_pool =
            tape.activations[static_cast<std::size_t>(2 * l + 1)];  // second conv of level l
        Tensor<S> grad_unpooled;
        maxpool2_backward(grad, tape.pool_idx[static_cast<std::size_t>(l)], grad_unpooled,
                          pre_pool.d, pre_pool.h, pre_pool.w);
        // add the skip-path gradient (decoder level l consumed skip l)
        const Tensor<S>& sg = skip_grads[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < grad_unpooled.v.size(); ++i) grad_unpooled.v[i] += sg.v[i];
        grad = std::move(grad_unpooled);
        drop_backward(grad, drop_id);
        --drop_id;
        grad = conv_back(grad, true);
        grad = conv_back(grad, true);
    }
}

}  // namespace dewedge::nn
