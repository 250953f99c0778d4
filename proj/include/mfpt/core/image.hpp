#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfpt/core/tensor.hpp"

namespace mfpt {

// 8-bit interleaved image, RGB or single channel. Pixel (x, y) channel c is
// data[(y * width + x) * channels + c].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> data;

    Image() = default;
    Image(int w, int h, int ch, uint8_t fill = 0)
        : width(w), height(h), channels(ch),
          data(static_cast<size_t>(w) * h * ch, fill) {}

    uint8_t& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool empty() const { return data.empty(); }
};

namespace imageio {

// PNG or JPEG by extension; RGB channel order throughout.
Image load(const std::string& path);
void save(const std::string& path, const Image& image);

// Reads only enough of the file to learn its dimensions. Understands PNG and
// JPEG headers; falls back to a full decode for anything else.
bool probe_dimensions(const std::string& path, int& width, int& height);

// In-memory JPEG round trip at the given quality factor [1, 100].
std::vector<uint8_t> encode_jpeg(const Image& image, int quality);
Image decode_jpeg(const std::vector<uint8_t>& bytes);

}  // namespace imageio

// Per-channel planar view of an image as double grids in [0, 255].
std::vector<Tensor> to_planes(const Image& image);
Image from_planes(const std::vector<Tensor>& planes);

// Bilinear resize of a real-valued grid (rows = height).
Tensor resize_bilinear(const Tensor& grid, int out_height, int out_width);
// Nearest-neighbor resize; preserves the value set (used for masks).
Tensor resize_nearest(const Tensor& grid, int out_height, int out_width);

Image resize_image_bilinear(const Image& image, int out_width, int out_height);

}  // namespace mfpt
