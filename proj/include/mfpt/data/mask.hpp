#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mfpt::data {

// Binary ground-truth mask on the pixel grid; 1 marks an edited pixel.
struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> values;  // row-major, each 0 or 1

    PixelMask() = default;
    PixelMask(int w, int h, uint8_t fill = 0)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {}

    uint8_t& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t pixel_count() const { return values.size(); }
};

// Real-valued change-detection prediction in [0, 1] per pixel.
struct ProbabilityMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major

    ProbabilityMap() = default;
    ProbabilityMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Fraction of pixels marked edited; exact rational over the pixel count.
double edited_area_ratio(const PixelMask& mask);

PixelMask complement(const PixelMask& mask);

// Mask files are single-channel 8-bit PNG; values >= 128 map to 1.
PixelMask load_mask(const std::string& path);
void save_mask(const std::string& path, const PixelMask& mask);

// Probability maps come either as single-channel PNG (value / 255) or as a
// raw little-endian float32 grid with an 8-byte width/height header.
ProbabilityMap load_probability_map(const std::string& path);
void save_probability_map_f32(const std::string& path, const ProbabilityMap& map);
void save_probability_map_png(const std::string& path, const ProbabilityMap& map);

double mean_probability(const ProbabilityMap& map);

}  // namespace mfpt::data
