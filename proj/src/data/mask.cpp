#include "mfpt/data/mask.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mfpt/core/error.hpp"
#include "mfpt/core/image.hpp"

namespace mfpt::data {

double edited_area_ratio(const PixelMask& mask) {
    if (mask.values.empty()) return 0.0;
    size_t ones = 0;
    for (uint8_t v : mask.values) ones += v;
    return static_cast<double>(ones) / static_cast<double>(mask.values.size());
}

PixelMask complement(const PixelMask& mask) {
    PixelMask out(mask.width, mask.height);
    for (size_t i = 0; i < mask.values.size(); ++i) out.values[i] = mask.values[i] ? 0 : 1;
    return out;
}

PixelMask load_mask(const std::string& path) {
    Image img = imageio::load(path);
    PixelMask mask(img.width, img.height);
    const int stride = img.channels;
    for (size_t i = 0; i < mask.values.size(); ++i) {
        mask.values[i] = img.data[i * stride] >= 128 ? 1 : 0;
    }
    return mask;
}

void save_mask(const std::string& path, const PixelMask& mask) {
    Image img(mask.width, mask.height, 1);
    for (size_t i = 0; i < mask.values.size(); ++i) img.data[i] = mask.values[i] ? 255 : 0;
    imageio::save(path, img);
}

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

uint32_t read_le32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
           (uint32_t(p[3]) << 24);
}

ProbabilityMap load_probability_map_f32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("probmap: cannot open '" + path + "'");
    uint8_t header[8];
    if (!in.read(reinterpret_cast<char*>(header), 8)) {
        throw DataError("probmap: truncated header in '" + path + "'");
    }
    const uint32_t w = read_le32(header);
    const uint32_t h = read_le32(header + 4);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) {
        throw DataError("probmap: implausible dimensions in '" + path + "'");
    }
    ProbabilityMap map(static_cast<int>(w), static_cast<int>(h));
    std::vector<float> raw(static_cast<size_t>(w) * h);
    if (!in.read(reinterpret_cast<char*>(raw.data()),
                 static_cast<std::streamsize>(raw.size() * sizeof(float)))) {
        throw DataError("probmap: truncated data in '" + path + "'");
    }
    for (size_t i = 0; i < raw.size(); ++i) {
        const double v = static_cast<double>(raw[i]);
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DataError("probmap: value out of [0,1] in '" + path + "'");
        }
        map.values[i] = v;
    }
    return map;
}

}  // namespace

ProbabilityMap load_probability_map(const std::string& path) {
    if (has_suffix(path, ".png")) {
        Image img = imageio::load(path);
        ProbabilityMap map(img.width, img.height);
        const int stride = img.channels;
        for (size_t i = 0; i < map.values.size(); ++i) {
            map.values[i] = static_cast<double>(img.data[i * stride]) / 255.0;
        }
        return map;
    }
    return load_probability_map_f32(path);
}

void save_probability_map_f32(const std::string& path, const ProbabilityMap& map) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("probmap: cannot write '" + path + "'");
    const uint32_t w = static_cast<uint32_t>(map.width);
    const uint32_t h = static_cast<uint32_t>(map.height);
    uint8_t header[8] = {
        static_cast<uint8_t>(w),       static_cast<uint8_t>(w >> 8),
        static_cast<uint8_t>(w >> 16), static_cast<uint8_t>(w >> 24),
        static_cast<uint8_t>(h),       static_cast<uint8_t>(h >> 8),
        static_cast<uint8_t>(h >> 16), static_cast<uint8_t>(h >> 24)};
    out.write(reinterpret_cast<const char*>(header), 8);
    std::vector<float> raw(map.values.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(map.values[i]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw DataError("probmap: write failed for '" + path + "'");
}

void save_probability_map_png(const std::string& path, const ProbabilityMap& map) {
    Image img(map.width, map.height, 1);
    for (size_t i = 0; i < map.values.size(); ++i) {
        const double v = std::clamp(map.values[i], 0.0, 1.0);
        img.data[i] = static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
    }
    imageio::save(path, img);
}

double mean_probability(const ProbabilityMap& map) {
    if (map.values.empty()) return 0.0;
    double s = 0.0;
    for (double v : map.values) s += v;
    return s / static_cast<double>(map.values.size());
}

}  // namespace mfpt::data
