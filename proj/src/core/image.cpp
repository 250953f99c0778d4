#include "mfpt/core/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mfpt/core/error.hpp"

namespace mfpt {

namespace {

Image from_mat(const cv::Mat& mat) {
    if (mat.empty()) throw DataError("image: decode produced an empty image");
    if (mat.depth() != CV_8U) throw DataError("image: only 8-bit images are supported");
    Image out(mat.cols, mat.rows, mat.channels());
    for (int y = 0; y < mat.rows; ++y) {
        const uint8_t* row = mat.ptr<uint8_t>(y);
        uint8_t* dst = out.data.data() + static_cast<size_t>(y) * mat.cols * mat.channels();
        std::memcpy(dst, row, static_cast<size_t>(mat.cols) * mat.channels());
    }
    if (out.channels == 3) {
        // OpenCV decodes as BGR; the toolkit works in RGB.
        for (size_t i = 0; i + 2 < out.data.size(); i += 3) std::swap(out.data[i], out.data[i + 2]);
    }
    return out;
}

cv::Mat to_mat(const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw DataError("image: expected 1 or 3 channels");
    }
    cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        uint8_t* row = mat.ptr<uint8_t>(y);
        const uint8_t* src =
            image.data.data() + static_cast<size_t>(y) * image.width * image.channels;
        std::memcpy(row, src, static_cast<size_t>(image.width) * image.channels);
    }
    if (image.channels == 3) {
        for (int y = 0; y < mat.rows; ++y) {
            uint8_t* row = mat.ptr<uint8_t>(y);
            for (int x = 0; x < mat.cols; ++x) std::swap(row[x * 3], row[x * 3 + 2]);
        }
    }
    return mat;
}

uint32_t read_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

bool probe_png(std::ifstream& in, int& width, int& height) {
    uint8_t buf[24];
    in.seekg(0);
    if (!in.read(reinterpret_cast<char*>(buf), 24)) return false;
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(buf, sig, 8) != 0) return false;
    if (std::memcmp(buf + 12, "IHDR", 4) != 0) return false;
    width = static_cast<int>(read_be32(buf + 16));
    height = static_cast<int>(read_be32(buf + 20));
    return width > 0 && height > 0;
}

bool probe_jpeg(std::ifstream& in, int& width, int& height) {
    in.seekg(0);
    uint8_t b0 = 0, b1 = 0;
    in.read(reinterpret_cast<char*>(&b0), 1);
    in.read(reinterpret_cast<char*>(&b1), 1);
    if (!in || b0 != 0xFF || b1 != 0xD8) return false;
    while (in) {
        uint8_t marker[2];
        if (!in.read(reinterpret_cast<char*>(marker), 2)) return false;
        if (marker[0] != 0xFF) return false;
        const uint8_t m = marker[1];
        if (m == 0xD8 || (m >= 0xD0 && m <= 0xD7)) continue;
        uint8_t lenb[2];
        if (!in.read(reinterpret_cast<char*>(lenb), 2)) return false;
        const int len = (lenb[0] << 8) | lenb[1];
        const bool is_sof = (m >= 0xC0 && m <= 0xCF) && m != 0xC4 && m != 0xC8 && m != 0xCC;
        if (is_sof) {
            uint8_t sof[5];
            if (!in.read(reinterpret_cast<char*>(sof), 5)) return false;
            height = (sof[1] << 8) | sof[2];
            width = (sof[3] << 8) | sof[4];
            return width > 0 && height > 0;
        }
        in.seekg(len - 2, std::ios::cur);
    }
    return false;
}

}  // namespace

namespace imageio {

Image load(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw DataError("image: cannot load '" + path + "'");
    if (mat.channels() == 4) {
        cv::Mat rgb;
        cv::mixChannels({mat}, {rgb = cv::Mat(mat.rows, mat.cols, CV_8UC3)},
                        {0, 0, 1, 1, 2, 2});
        mat = rgb;
    }
    return from_mat(mat);
}

void save(const std::string& path, const Image& image) {
    cv::Mat mat = to_mat(image);
    std::vector<int> params;
    if (path.size() >= 4) {
        const std::string ext = path.substr(path.size() - 4);
        if (ext == ".png") params = {cv::IMWRITE_PNG_COMPRESSION, 6};
    }
    if (!cv::imwrite(path, mat, params)) {
        throw DataError("image: cannot write '" + path + "'");
    }
}

bool probe_dimensions(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    if (probe_png(in, width, height)) return true;
    in.clear();
    if (probe_jpeg(in, width, height)) return true;
    try {
        Image img = load(path);
        width = img.width;
        height = img.height;
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::vector<uint8_t> encode_jpeg(const Image& image, int quality) {
    if (quality < 1 || quality > 100) throw UsageError("jpeg: quality must be in [1, 100]");
    cv::Mat mat = to_mat(image);
    std::vector<uint8_t> bytes;
    if (!cv::imencode(".jpg", mat, bytes, {cv::IMWRITE_JPEG_QUALITY, quality})) {
        throw NumericError("jpeg: encoding failed");
    }
    return bytes;
}

Image decode_jpeg(const std::vector<uint8_t>& bytes) {
    cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    return from_mat(mat);
}

}  // namespace imageio

std::vector<Tensor> to_planes(const Image& image) {
    std::vector<Tensor> planes(image.channels, Tensor(image.height, image.width));
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                planes[c](y, x) = static_cast<double>(image.at(x, y, c));
    return planes;
}

Image from_planes(const std::vector<Tensor>& planes) {
    if (planes.empty()) throw DataError("image: no planes");
    const int h = planes[0].rows(), w = planes[0].cols();
    Image out(w, h, static_cast<int>(planes.size()));
    for (int c = 0; c < out.channels; ++c) {
        if (planes[c].rows() != h || planes[c].cols() != w)
            throw DataError("image: plane shapes disagree");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = std::floor(planes[c](y, x) + 0.5);
                out.at(x, y, c) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
            }
    }
    return out;
}

Tensor resize_bilinear(const Tensor& grid, int out_height, int out_width) {
    const int h = grid.rows(), w = grid.cols();
    if (h == out_height && w == out_width) return grid;
    Tensor out(out_height, out_width);
    const double sy = static_cast<double>(h) / out_height;
    const double sx = static_cast<double>(w) / out_width;
    for (int y = 0; y < out_height; ++y) {
        // Half-pixel-center mapping.
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            out(y, x) = (1 - wy) * ((1 - wx) * grid(y0, x0) + wx * grid(y0, x1)) +
                        wy * ((1 - wx) * grid(y1, x0) + wx * grid(y1, x1));
        }
    }
    return out;
}

Tensor resize_nearest(const Tensor& grid, int out_height, int out_width) {
    const int h = grid.rows(), w = grid.cols();
    if (h == out_height && w == out_width) return grid;
    Tensor out(out_height, out_width);
    for (int y = 0; y < out_height; ++y) {
        int sy = std::min(static_cast<int>((y + 0.5) * h / out_height), h - 1);
        for (int x = 0; x < out_width; ++x) {
            int sx = std::min(static_cast<int>((x + 0.5) * w / out_width), w - 1);
            out(y, x) = grid(sy, sx);
        }
    }
    return out;
}

Image resize_image_bilinear(const Image& image, int out_width, int out_height) {
    if (image.width == out_width && image.height == out_height) return image;
    std::vector<Tensor> planes = to_planes(image);
    for (auto& p : planes) p = resize_bilinear(p, out_height, out_width);
    return from_planes(planes);
}

}  // namespace mfpt
