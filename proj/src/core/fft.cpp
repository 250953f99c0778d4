#include "mfpt/core/fft.hpp"

#include <cmath>

#include "mfpt/core/error.hpp"

namespace mfpt::fft {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 Cooley-Tukey. n must be a power of two.
void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;

    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (size_t len = 2; len <= n; len <<= 1) {
        const double angle = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const cplx wlen(std::cos(angle), std::sin(angle));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Bluestein chirp-z: expresses an arbitrary-length DFT as a power-of-two
// convolution. Chirp phases use k^2 mod 2n to avoid large-angle error.
void fft_bluestein(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    const size_t m = next_pow2(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<cplx> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        const size_t sq = (k * k) % (2 * n);
        const double angle = sign * kPi * static_cast<double>(sq) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(angle), std::sin(angle));
    }

    std::vector<cplx> x(m, cplx(0.0, 0.0));
    std::vector<cplx> y(m, cplx(0.0, 0.0));
    for (size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    y[0] = std::conj(chirp[0]);
    for (size_t k = 1; k < n; ++k) {
        y[k] = std::conj(chirp[k]);
        y[m - k] = std::conj(chirp[k]);
    }

    fft_pow2(x, false);
    fft_pow2(y, false);
    for (size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_pow2(x, true);

    const double scale = 1.0 / static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

void transform_rows(std::vector<cplx>& data, int rows, int cols, bool inverse) {
    std::vector<cplx> row(static_cast<size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        cplx* base = data.data() + static_cast<size_t>(r) * cols;
        row.assign(base, base + cols);
        transform(row, inverse);
        std::copy(row.begin(), row.end(), base);
    }
}

void transform_cols(std::vector<cplx>& data, int rows, int cols, bool inverse) {
    std::vector<cplx> col(static_cast<size_t>(rows));
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) col[r] = data[static_cast<size_t>(r) * cols + c];
        transform(col, inverse);
        for (int r = 0; r < rows; ++r) data[static_cast<size_t>(r) * cols + c] = col[r];
    }
}

}  // namespace

void transform(std::vector<cplx>& data, bool inverse) {
    const size_t n = data.size();
    if (n <= 1) return;
    if (is_pow2(n)) {
        fft_pow2(data, inverse);
    } else {
        fft_bluestein(data, inverse);
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : data) v *= scale;
    }
}

std::vector<cplx> forward_2d(const Tensor& grid) {
    const int h = grid.rows();
    const int w = grid.cols();
    if (h <= 0 || w <= 0) throw NumericError("fft: non-positive grid dimensions");
    std::vector<cplx> data(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < data.size(); ++i) data[i] = cplx(grid[i], 0.0);
    transform_rows(data, h, w, false);
    transform_cols(data, h, w, false);
    return data;
}

Tensor inverse_2d_real(std::vector<cplx> spectrum, int height, int width) {
    if (spectrum.size() != static_cast<size_t>(height) * width) {
        throw NumericError("fft: spectrum size does not match grid");
    }
    transform_rows(spectrum, height, width, true);
    transform_cols(spectrum, height, width, true);
    Tensor out(height, width);
    for (size_t i = 0; i < spectrum.size(); ++i) out[i] = spectrum[i].real();
    return out;
}

}  // namespace mfpt::fft
