#pragma once

#include "mfpt/core/image.hpp"
#include "mfpt/core/tensor.hpp"

namespace mfpt::model {

// ITU-R BT.601 luma, rounded half-up to integers in [0, 255].
// Output grid is height x width.
Tensor to_grayscale(const Image& image);

// Ideal high-pass filter in the 2-D Fourier domain: every coefficient whose
// centered radial distance is below cutoff * min(W, H) / 2 is zeroed (the DC
// bin always is), then the real part of the inverse transform is returned.
Tensor highpass_prompt(const Tensor& gray, double cutoff);

// Spectral energy of a grid split at the same cutoff radius; used by the
// high-pass invariant checks and the blur robustness analysis.
struct SpectralEnergy {
    double inside = 0.0;   // |F|^2 summed over bins strictly inside the disk
    double outside = 0.0;  // remaining bins
    double total() const { return inside + outside; }
};

SpectralEnergy spectral_energy(const Tensor& grid, double cutoff);

}  // namespace mfpt::model
