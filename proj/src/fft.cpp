#include "dewedge/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace dewedge {

namespace {

// FFTW planning is not thread-safe; execution through the new-array
// interface is. Plans are cached per shape and direction under a lock.
// FFTW_ESTIMATE keeps plan selection independent of runtime timings, which
// run-to-run determinism relies on.
class PlanCache {
public:
    fftw_plan get(const Dims3& dims, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_tuple(dims.d, dims.h, dims.w, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<fftw_complex> scratch(static_cast<std::size_t>(dims.total()));
        fftw_plan p = fftw_plan_dft_3d(static_cast<int>(dims.d), static_cast<int>(dims.h),
                                       static_cast<int>(dims.w), scratch.data(), scratch.data(),
                                       sign, FFTW_ESTIMATE);
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

void execute(const Dims3& dims, int sign, std::vector<std::complex<double>>& buf) {
    fftw_plan p = plan_cache().get(dims, sign);
    auto* raw = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_execute_dft(p, raw, raw);
}

}  // namespace

SpectralVolume to_fourier(const Volume& v) {
    if (!all_finite(v)) throw invalid_input("to_fourier: non-finite input");
    SpectralVolume s;
    s.dims = v.dims;
    s.voxel_size = v.voxel_size;
    s.data.assign(v.data.begin(), v.data.end());
    execute(v.dims, FFTW_FORWARD, s.data);
    return s;
}

void inverse_fft_complex(const SpectralVolume& s, std::vector<std::complex<double>>& out) {
    out.assign(s.data.begin(), s.data.end());
    execute(s.dims, FFTW_BACKWARD, out);
    double scale = 1.0 / static_cast<double>(s.dims.total());
    for (auto& c : out) c *= scale;
}

Volume from_fourier(const SpectralVolume& s) {
    std::vector<std::complex<double>> buf;
    inverse_fft_complex(s, buf);
    double real_sq = 0.0, imag_sq = 0.0;
    for (const auto& c : buf) {
        real_sq += c.real() * c.real();
        imag_sq += c.imag() * c.imag();
    }
    double n = static_cast<double>(buf.size());
    double real_rms = std::sqrt(real_sq / n), imag_rms = std::sqrt(imag_sq / n);
    if (imag_rms > 1e-4 * real_rms && imag_rms > 1e-12)
        throw numeric_failure("from_fourier: imaginary residue RMS " + std::to_string(imag_rms) +
                              " exceeds 1e-4 of real RMS; spectrum is not Hermitian");
    Volume v(s.dims, s.voxel_size);
    for (std::size_t i = 0; i < buf.size(); ++i) v.data[i] = buf[i].real();
    return v;
}

}  // namespace dewedge
