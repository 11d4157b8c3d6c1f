#pragma once

#include "dewedge/volume.hpp"

namespace dewedge {

// Unnormalized forward DFT: the DC coefficient equals the sum of voxels.
SpectralVolume to_fourier(const Volume& v);

// Inverse DFT with 1/(D*H*W) normalization. The imaginary residue must be
// below 1e-4 RMS relative to the real part; larger residues indicate a
// non-Hermitian spectrum and raise numeric_failure.
Volume from_fourier(const SpectralVolume& s);

// Inverse DFT keeping the complex result (used by tests and the Fourier
// slice oracle).
void inverse_fft_complex(const SpectralVolume& s, std::vector<std::complex<double>>& out);

}  // namespace dewedge
