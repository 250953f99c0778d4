#include "mfpt/model/frequency.hpp"

#include <cmath>

#include "mfpt/core/error.hpp"
#include "mfpt/core/fft.hpp"

namespace mfpt::model {

Tensor to_grayscale(const Image& image) {
    if (image.channels != 3) {
        throw DataError("grayscale: expected a 3-channel image, got " +
                        std::to_string(image.channels));
    }
    Tensor gray(image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double v = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                             0.114 * image.at(x, y, 2);
            gray(y, x) = std::floor(v + 0.5);
        }
    }
    return gray;
}

Tensor highpass_prompt(const Tensor& gray, double cutoff) {
    const int h = gray.rows();
    const int w = gray.cols();
    if (h <= 0 || w <= 0) throw NumericError("highpass: non-positive dimensions");
    if (!(cutoff > 0.0 && cutoff < 1.0)) {
        throw UsageError("highpass: cutoff must be in (0, 1)");
    }
    auto spectrum = fft::forward_2d(gray);
    const double radius = cutoff * (std::min(w, h) / 2.0);
    for (int y = 0; y < h; ++y) {
        const double fy = fft::centered_freq(y, h);
        for (int x = 0; x < w; ++x) {
            const double fx = fft::centered_freq(x, w);
            if (std::sqrt(fy * fy + fx * fx) < radius) {
                spectrum[static_cast<size_t>(y) * w + x] = fft::cplx(0.0, 0.0);
            }
        }
    }
    return fft::inverse_2d_real(std::move(spectrum), h, w);
}

SpectralEnergy spectral_energy(const Tensor& grid, double cutoff) {
    const int h = grid.rows();
    const int w = grid.cols();
    auto spectrum = fft::forward_2d(grid);
    const double radius = cutoff * (std::min(w, h) / 2.0);
    SpectralEnergy e;
    for (int y = 0; y < h; ++y) {
        const double fy = fft::centered_freq(y, h);
        for (int x = 0; x < w; ++x) {
            const double fx = fft::centered_freq(x, w);
            const double mag2 = std::norm(spectrum[static_cast<size_t>(y) * w + x]);
            if (std::sqrt(fy * fy + fx * fx) < radius) {
                e.inside += mag2;
            } else {
                e.outside += mag2;
            }
        }
    }
    return e;
}

}  // namespace mfpt::model
