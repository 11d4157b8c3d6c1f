#include "dewedge/mrc.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dewedge {

namespace {

struct MrcHeader {
    std::int32_t nx = 0, ny = 0, nz = 0;
    std::int32_t mode = 2;
    std::int32_t nxstart = 0, nystart = 0, nzstart = 0;
    std::int32_t mx = 0, my = 0, mz = 0;
    float cella[3] = {0, 0, 0};
    float cellb[3] = {90, 90, 90};
    std::int32_t mapc = 1, mapr = 2, maps = 3;
    float dmin = 0, dmax = 0, dmean = 0;
    std::int32_t ispg = 1;
    std::int32_t nsymbt = 0;
};

constexpr std::size_t kHeaderBytes = 1024;

void put_i32(std::vector<unsigned char>& buf, std::size_t off, std::int32_t v) {
    for (int i = 0; i < 4; ++i) buf[off + static_cast<std::size_t>(i)] =
        static_cast<unsigned char>((static_cast<std::uint32_t>(v) >> (8 * i)) & 0xff);
}

void put_f32(std::vector<unsigned char>& buf, std::size_t off, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_i32(buf, off, static_cast<std::int32_t>(bits));
}

std::int32_t get_i32(const unsigned char* buf) {
    std::uint32_t v = static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
                      (static_cast<std::uint32_t>(buf[2]) << 16) |
                      (static_cast<std::uint32_t>(buf[3]) << 24);
    return static_cast<std::int32_t>(v);
}

float get_f32(const unsigned char* buf) {
    std::uint32_t bits = static_cast<std::uint32_t>(get_i32(buf));
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void write_mrc_file(const std::vector<float>& data, std::int64_t nx, std::int64_t ny,
                    std::int64_t nz, double voxel_size, bool is_volume, const std::string& path) {
    std::vector<unsigned char> header(kHeaderBytes, 0);
    put_i32(header, 0, static_cast<std::int32_t>(nx));
    put_i32(header, 4, static_cast<std::int32_t>(ny));
    put_i32(header, 8, static_cast<std::int32_t>(nz));
    put_i32(header, 12, 2);  // mode 2: float32
    put_i32(header, 28, static_cast<std::int32_t>(nx));  // mx
    put_i32(header, 32, static_cast<std::int32_t>(ny));
    put_i32(header, 36, static_cast<std::int32_t>(nz));
    put_f32(header, 40, static_cast<float>(voxel_size * static_cast<double>(nx)));
    put_f32(header, 44, static_cast<float>(voxel_size * static_cast<double>(ny)));
    put_f32(header, 48, static_cast<float>(voxel_size * static_cast<double>(nz)));
    put_f32(header, 52, 90.0f);
    put_f32(header, 56, 90.0f);
    put_f32(header, 60, 90.0f);
    put_i32(header, 64, 1);  // mapc
    put_i32(header, 68, 2);
    put_i32(header, 72, 3);
    float dmin = 0.0f, dmax = 0.0f;
    double dsum = 0.0;
    if (!data.empty()) {
        dmin = dmax = data[0];
        for (float v : data) {
            dmin = std::min(dmin, v);
            dmax = std::max(dmax, v);
            dsum += static_cast<double>(v);
        }
    }
    put_f32(header, 76, dmin);
    put_f32(header, 80, dmax);
    put_f32(header, 84, data.empty() ? 0.0f : static_cast<float>(dsum / static_cast<double>(data.size())));
    put_i32(header, 88, is_volume ? 1 : 0);  // ispg: 0 = image stack, 1 = volume
    // words 50-52: origin = 0; word 53: "MAP "
    header[208] = 'M';
    header[209] = 'A';
    header[210] = 'P';
    header[211] = ' ';
    header[212] = 0x44;  // machine stamp, little-endian
    header[213] = 0x44;
    put_i32(header, 220, 0);  // rms placeholder
    put_i32(header, 224, 1);  // nlabl
    const char* label = "dewedge";
    std::memcpy(header.data() + 228, label, std::strlen(label));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw invalid_input("write_mrc: cannot open " + path);
    f.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!f) throw invalid_input("write_mrc: write failed for " + path);
}

struct RawMrc {
    MrcHeader h;
    std::vector<float> data;
    double voxel_size = 1.0;
};

RawMrc read_mrc_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw invalid_input("read_mrc: cannot open " + path);
    std::vector<unsigned char> header(kHeaderBytes);
    f.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(kHeaderBytes));
    if (!f) throw invalid_input("read_mrc: truncated header in " + path);

    RawMrc out;
    out.h.nx = get_i32(header.data() + 0);
    out.h.ny = get_i32(header.data() + 4);
    out.h.nz = get_i32(header.data() + 8);
    out.h.mode = get_i32(header.data() + 12);
    out.h.mx = get_i32(header.data() + 28);
    out.h.my = get_i32(header.data() + 32);
    out.h.mz = get_i32(header.data() + 36);
    out.h.cella[0] = get_f32(header.data() + 40);
    out.h.cella[1] = get_f32(header.data() + 44);
    out.h.cella[2] = get_f32(header.data() + 48);
    out.h.nsymbt = get_i32(header.data() + 92);

    if (out.h.mode != 2)
        throw invalid_input("read_mrc: unsupported mode " + std::to_string(out.h.mode) +
                            " in " + path + " (only mode 2 float32 is supported)");
    if (out.h.nx < 1 || out.h.ny < 1 || out.h.nz < 1)
        throw invalid_input("read_mrc: bad dimensions in " + path);
    if (header[212] == 0x11)
        throw invalid_input("read_mrc: big-endian file not supported: " + path);

    const std::uint64_t count = static_cast<std::uint64_t>(out.h.nx) *
                                static_cast<std::uint64_t>(out.h.ny) *
                                static_cast<std::uint64_t>(out.h.nz);
    const std::uint64_t expected = kHeaderBytes + static_cast<std::uint64_t>(out.h.nsymbt) +
                                   count * sizeof(float);
    const std::uint64_t fsize = std::filesystem::file_size(path);
    if (fsize < expected)
        throw invalid_input("read_mrc: file size " + std::to_string(fsize) +
                            " smaller than header implies (" + std::to_string(expected) + "): " +
                            path);

    if (out.h.nsymbt > 0) f.seekg(out.h.nsymbt, std::ios::cur);
    out.data.resize(count);
    f.read(reinterpret_cast<char*>(out.data.data()),
           static_cast<std::streamsize>(count * sizeof(float)));
    if (!f) throw invalid_input("read_mrc: truncated data in " + path);

    out.voxel_size = out.h.mx > 0 && out.h.cella[0] > 0.0f
                         ? static_cast<double>(out.h.cella[0]) / static_cast<double>(out.h.mx)
                         : 1.0;
    return out;
}

std::vector<double> read_angle_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw invalid_input("read_mrc: cannot open angle file " + path);
    std::vector<double> angles;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        double a;
        if (ss >> a) angles.push_back(a);
    }
    return angles;
}

}  // namespace

std::string tlt_sidecar_path(const std::string& mrc_path) {
    std::filesystem::path p(mrc_path);
    p.replace_extension(".tlt");
    return p.string();
}

Volume read_mrc_volume(const std::string& path) {
    RawMrc raw = read_mrc_file(path);
    Volume v(Dims3{raw.h.nz, raw.h.ny, raw.h.nx}, raw.voxel_size);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(raw.data[i]);
    return v;
}

void write_mrc(const Volume& v, const std::string& path) {
    if (!all_finite(v)) throw invalid_input("write_mrc: non-finite volume data");
    std::vector<float> data(v.data.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(v.data[i]);
    write_mrc_file(data, v.dims.w, v.dims.h, v.dims.d, v.voxel_size, true, path);
}

void write_mrc(const TiltSeries& t, const std::string& path, double voxel_size) {
    if (t.projections.empty()) throw invalid_input("write_mrc: empty tilt series");
    const std::int64_t w = t.projections.front().width, h = t.projections.front().height;
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(w * h) * t.projections.size());
    std::ofstream angles(tlt_sidecar_path(path));
    if (!angles) throw invalid_input("write_mrc: cannot open sidecar for " + path);
    for (const auto& p : t.projections) {
        if (p.width != w || p.height != h)
            throw invalid_input("write_mrc: inconsistent projection shapes");
        for (double x : p.data) data.push_back(static_cast<float>(x));
        angles << p.angle_deg << "\n";
    }
    write_mrc_file(data, w, h, static_cast<std::int64_t>(t.projections.size()), voxel_size, false,
                   path);
}

TiltSeries read_mrc_tilt_series(const std::string& path) {
    RawMrc raw = read_mrc_file(path);
    const std::vector<double> angles = read_angle_file(tlt_sidecar_path(path));
    if (static_cast<std::int64_t>(angles.size()) != raw.h.nz)
        throw invalid_input("read_mrc: angle file has " + std::to_string(angles.size()) +
                            " entries for " + std::to_string(raw.h.nz) + " images: " + path);
    TiltSeries t;
    t.scheme.frames_per_tilt = 1;
    if (angles.size() >= 2) {
        t.scheme.min_angle_deg = angles.front();
        t.scheme.max_angle_deg = angles.back();
        t.scheme.increment_deg = angles[1] - angles[0];
    }
    const std::size_t npix = static_cast<std::size_t>(raw.h.nx) * static_cast<std::size_t>(raw.h.ny);
    for (std::int64_t k = 0; k < raw.h.nz; ++k) {
        Projection p;
        p.width = raw.h.nx;
        p.height = raw.h.ny;
        p.angle_deg = angles[static_cast<std::size_t>(k)];
        p.data.resize(npix);
        for (std::size_t i = 0; i < npix; ++i)
            p.data[i] = static_cast<double>(raw.data[static_cast<std::size_t>(k) * npix + i]);
        t.projections.push_back(std::move(p));
    }
    return t;
}

void write_mrc_frame_stack(const TiltSeries& t, const std::string& path, double voxel_size) {
    if (t.projections.empty()) throw invalid_input("write_mrc_frame_stack: empty tilt series");
    const std::int64_t w = t.projections.front().width, h = t.projections.front().height;
    const std::size_t m = t.projections.front().frames.size();
    if (m < 2) throw invalid_input("write_mrc_frame_stack: projections carry no frames");
    std::vector<float> data;
    std::ofstream angles(tlt_sidecar_path(path));
    if (!angles) throw invalid_input("write_mrc_frame_stack: cannot open sidecar for " + path);
    for (const auto& p : t.projections) {
        if (p.frames.size() != m)
            throw invalid_input("write_mrc_frame_stack: inconsistent frame counts");
        for (const auto& frame : p.frames)
            for (double x : frame) data.push_back(static_cast<float>(x));
        angles << p.angle_deg << "\n";
    }
    write_mrc_file(data, w, h, static_cast<std::int64_t>(t.projections.size() * m), voxel_size,
                   false, path);
}

TiltSeries read_mrc_frame_stack(const std::string& path, int frames_per_tilt) {
    if (frames_per_tilt < 2)
        throw invalid_input("read_mrc_frame_stack: frames_per_tilt must be >= 2");
    RawMrc raw = read_mrc_file(path);
    const std::vector<double> angles = read_angle_file(tlt_sidecar_path(path));
    if (raw.h.nz % frames_per_tilt != 0 ||
        static_cast<std::int64_t>(angles.size()) * frames_per_tilt != raw.h.nz)
        throw invalid_input("read_mrc_frame_stack: stack size does not match frames_per_tilt");
    TiltSeries t;
    t.scheme.frames_per_tilt = frames_per_tilt;
    const std::size_t npix = static_cast<std::size_t>(raw.h.nx) * static_cast<std::size_t>(raw.h.ny);
    for (std::size_t k = 0; k < angles.size(); ++k) {
        Projection p;
        p.width = raw.h.nx;
        p.height = raw.h.ny;
        p.angle_deg = angles[k];
        p.frames.assign(static_cast<std::size_t>(frames_per_tilt), std::vector<double>(npix));
        p.data.assign(npix, 0.0);
        for (int f = 0; f < frames_per_tilt; ++f) {
            const std::size_t base = (k * static_cast<std::size_t>(frames_per_tilt) +
                                      static_cast<std::size_t>(f)) * npix;
            for (std::size_t i = 0; i < npix; ++i) {
                const double val = static_cast<double>(raw.data[base + i]);
                p.frames[static_cast<std::size_t>(f)][i] = val;
                p.data[i] += val;
            }
        }
        for (auto& x : p.data) x /= static_cast<double>(frames_per_tilt);
        t.projections.push_back(std::move(p));
    }
    return t;
}

std::variant<Volume, TiltSeries> read_mrc(const std::string& path) {
    if (std::filesystem::exists(tlt_sidecar_path(path))) return read_mrc_tilt_series(path);
    return read_mrc_volume(path);
}

}  // namespace dewedge
