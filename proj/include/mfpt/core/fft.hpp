#pragma once

#include <complex>
#include <vector>

#include "mfpt/core/tensor.hpp"

namespace mfpt::fft {

using cplx = std::complex<double>;

// In-place forward/inverse transform of arbitrary length. Power-of-two
// lengths run radix-2 Cooley-Tukey; everything else goes through Bluestein's
// chirp-z reformulation. Inverse includes the 1/n factor.
void transform(std::vector<cplx>& data, bool inverse);

// Row-column 2-D transform of an H x W grid (rows = y, cols = x).
std::vector<cplx> forward_2d(const Tensor& grid);
Tensor inverse_2d_real(std::vector<cplx> spectrum, int height, int width);

// Signed centered frequency coordinate for bin index k of an n-point axis.
inline int centered_freq(int k, int n) { return (k <= n / 2) ? k : k - n; }

}  // namespace mfpt::fft
