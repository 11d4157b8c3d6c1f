#include "dewedge/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "nn.hpp"

namespace dewedge {

namespace {

void validate_config(const ModelConfig& cfg) {
    if (cfg.base_channels < 1) throw invalid_input("model: base_channels must be >= 1");
    if (cfg.depth < 1) throw invalid_input("model: depth must be >= 1");
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0)
        throw invalid_input("model: dropout_p must be in [0, 1)");
}

constexpr char kMagic[4] = {'D', 'W', 'M', 'D'};
constexpr std::uint8_t kVersion = 1;

}  // namespace

std::size_t parameter_count(const ModelConfig& cfg) {
    validate_config(cfg);
    return nn::NetPlan(cfg).param_count;
}

Model build_model(const ModelConfig& cfg) {
    validate_config(cfg);
    nn::NetPlan plan(cfg);
    Model m;
    m.config = cfg;
    m.params.assign(plan.param_count, 0.0f);

    std::mt19937_64 rng(mix_seed(cfg.seed, 0x30de1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double gain = std::sqrt(2.0 / (1.0 + 0.1 * 0.1));  // leaky rectifier
    for (const auto& conv : plan.convs) {
        const double fan_in = static_cast<double>(conv.cin * (conv.kernel == 3 ? 27 : 1));
        const double std_dev = gain / std::sqrt(fan_in);
        for (std::size_t i = 0; i < conv.weight_count(); ++i)
            m.params[conv.w_off + i] = static_cast<float>(std_dev * gauss(rng));
        // biases stay zero
    }
    return m;
}

Volume forward(const Model& m, const Volume& cube, bool train_mode, std::uint64_t dropout_seed) {
    if (!all_finite(cube)) throw invalid_input("model forward: non-finite input");
    nn::UNet<float> net(m.config);
    if (m.params.size() != net.param_count())
        throw invalid_input("model forward: parameter vector does not match config");
    nn::Tensor<float> in;
    in.resize(1, cube.dims.d, cube.dims.h, cube.dims.w);
    for (std::size_t i = 0; i < cube.data.size(); ++i) in.v[i] = static_cast<float>(cube.data[i]);
    nn::Tensor<float> out = net.forward(std::span<const float>(m.params), in, train_mode,
                                        dropout_seed, nullptr);
    Volume result(cube.dims, cube.voxel_size);
    for (std::size_t i = 0; i < result.data.size(); ++i)
        result.data[i] = static_cast<double>(out.v[i]);
    if (!all_finite(result)) throw numeric_failure("model forward: non-finite output");
    return result;
}

void save_model(const Model& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw invalid_input("save_model: cannot open " + path);
    f.write(kMagic, 4);
    f.put(static_cast<char>(kVersion));
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    auto put_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) f.put(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put_u32(static_cast<std::uint32_t>(m.config.base_channels));
    put_u32(static_cast<std::uint32_t>(m.config.depth));
    float drop = static_cast<float>(m.config.dropout_p);
    std::uint32_t drop_bits;
    std::memcpy(&drop_bits, &drop, 4);
    put_u32(drop_bits);
    put_u64(m.config.seed);
    put_u64(m.params.size());
    // assumes little-endian host, as does the MRC writer
    f.write(reinterpret_cast<const char*>(m.params.data()),
            static_cast<std::streamsize>(m.params.size() * sizeof(float)));
    if (!f) throw invalid_input("save_model: write failed for " + path);
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw invalid_input("load_model: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw invalid_input("load_model: bad magic in " + path);
    int version = f.get();
    if (version != kVersion)
        throw invalid_input("load_model: unsupported version " + std::to_string(version));
    auto get_u32 = [&]() {
        unsigned char b[4];
        f.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    auto get_u64 = [&]() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(f.get() & 0xff) << (8 * i);
        return v;
    };
    Model m;
    m.config.base_channels = static_cast<int>(get_u32());
    m.config.depth = static_cast<int>(get_u32());
    std::uint32_t drop_bits = get_u32();
    float drop;
    std::memcpy(&drop, &drop_bits, 4);
    m.config.dropout_p = drop;
    m.config.seed = get_u64();
    std::uint64_t count = get_u64();
    if (!f) throw invalid_input("load_model: truncated header in " + path);
    if (count != parameter_count(m.config))
        throw invalid_input("load_model: parameter count does not match config");
    m.params.resize(count);
    f.read(reinterpret_cast<char*>(m.params.data()),
           static_cast<std::streamsize>(count * sizeof(float)));
    if (!f) throw invalid_input("load_model: truncated parameters in " + path);
    return m;
}

}  // namespace dewedge
