#include "mfpt/eval/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mfpt/core/error.hpp"
#include "mfpt/core/parallel.hpp"
#include "mfpt/eval/metrics.hpp"

namespace mfpt::eval {

DegradationKind parse_degradation_kind(const std::string& s) {
    if (s == "jpeg") return DegradationKind::Jpeg;
    if (s == "blur" || s == "gaussian_blur") return DegradationKind::GaussianBlur;
    throw UsageError("degrade: unknown kind '" + s + "' (expected jpeg or blur)");
}

const char* degradation_kind_name(DegradationKind kind) {
    return kind == DegradationKind::Jpeg ? "jpeg" : "gaussian_blur";
}

void DegradationSpec::validate() const {
    if (levels.empty()) throw UsageError("degrade: no levels given");
    for (int level : levels) {
        if (kind == DegradationKind::Jpeg) {
            if (level < 1 || level > 100) {
                throw UsageError("degrade: jpeg quality " + std::to_string(level) +
                                 " outside [1, 100]");
            }
        } else {
            if (level < 0 || (level != 0 && level % 2 == 0)) {
                throw UsageError("degrade: blur kernel " + std::to_string(level) +
                                 " must be 0 or odd positive");
            }
        }
    }
}

namespace {

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

std::vector<double> gaussian_kernel(int size) {
    const double sigma = 0.3 * ((size - 1) / 2.0 - 1.0) + 0.8;
    std::vector<double> k(size);
    const int c = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double x = i - c;
        k[i] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

Image gaussian_blur(const Image& image, int kernel) {
    if (kernel == 0) return image;
    if (kernel < 0 || kernel % 2 == 0) {
        throw UsageError("blur: kernel must be 0 or odd positive");
    }
    const std::vector<double> k = gaussian_kernel(kernel);
    const int radius = kernel / 2;
    std::vector<Tensor> planes = to_planes(image);
    for (Tensor& plane : planes) {
        const int h = plane.rows(), w = plane.cols();
        Tensor tmp(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    acc += k[t + radius] * plane(y, reflect_index(x + t, w));
                }
                tmp(y, x) = acc;
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    acc += k[t + radius] * tmp(reflect_index(y + t, h), x);
                }
                plane(y, x) = acc;
            }
        }
    }
    return from_planes(planes);
}

Image degrade(const Image& image, DegradationKind kind, int level) {
    DegradationSpec spec;
    spec.kind = kind;
    spec.levels = {level};
    spec.validate();
    if (kind == DegradationKind::Jpeg) {
        return imageio::decode_jpeg(imageio::encode_jpeg(image, level));
    }
    return gaussian_blur(image, level);
}

data::ProbabilityMap predict_native(const model::MfptNetwork& net, const Image& image) {
    const auto& cfg = net.config();
    const Image resized = resize_image_bilinear(image, cfg.input_width, cfg.input_height);
    data::ProbabilityMap raw = net.predict(resized);
    if (raw.width == image.width && raw.height == image.height) return raw;
    Tensor grid(raw.height, raw.width);
    for (size_t i = 0; i < raw.values.size(); ++i) grid[i] = raw.values[i];
    const Tensor up = resize_bilinear(grid, image.height, image.width);
    data::ProbabilityMap out(image.width, image.height);
    for (size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = std::clamp(up[i], 0.0, 1.0);
    }
    return out;
}

std::vector<RobustnessRow> robustness_sweep(const model::MfptNetwork& net,
                                            const data::DatasetManifest& manifest,
                                            const std::string& subset,
                                            const DegradationSpec& spec, double threshold,
                                            int workers) {
    spec.validate();
    const auto samples = select_subset(manifest, subset);
    std::vector<RobustnessRow> rows;
    rows.reserve(spec.levels.size());
    for (int level : spec.levels) {
        std::vector<PixelMetrics> per_image(samples.size());
        parallel_for(samples.size(), workers, [&](size_t i) {
            const data::ImageSample* s = samples[i];
            Image img = imageio::load(manifest.resolve(s->image_path));
            img = degrade(img, spec.kind, level);
            const data::ProbabilityMap prob = predict_native(net, img);
            const data::PixelMask gt = manifest.ground_truth(*s);
            per_image[i] = metrics(confusion(binarize(prob, threshold), gt));
        });
        RobustnessRow row;
        row.level = level;
        row.n = samples.size();
        for (const auto& m : per_image) {
            row.iou += m.iou;
            row.pf1 += m.pf1;
        }
        if (!samples.empty()) {
            row.iou /= static_cast<double>(samples.size());
            row.pf1 /= static_cast<double>(samples.size());
        }
        rows.push_back(row);
    }
    return rows;
}

std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
    std::string out = "level,IoU,pF1\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", r.level, r.iou, r.pf1);
        out += buf;
    }
    return out;
}

}  // namespace mfpt::eval
