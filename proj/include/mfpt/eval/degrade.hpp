#pragma once

#include <string>
#include <vector>

#include "mfpt/core/image.hpp"
#include "mfpt/data/manifest.hpp"
#include "mfpt/model/network.hpp"

namespace mfpt::eval {

enum class DegradationKind { Jpeg, GaussianBlur };

DegradationKind parse_degradation_kind(const std::string& s);
const char* degradation_kind_name(DegradationKind kind);

struct DegradationSpec {
    DegradationKind kind = DegradationKind::Jpeg;
    std::vector<int> levels;

    // JPEG qualities must lie in [1, 100]; blur kernels must be odd positive
    // or 0 (the identity).
    void validate() const;
};

// Separable Gaussian blur with sigma = 0.3 * ((k - 1) / 2 - 1) + 0.8 and a
// reflective border; kernel 0 is the identity.
Image gaussian_blur(const Image& image, int kernel);

Image degrade(const Image& image, DegradationKind kind, int level);

// Runs the model on a native-resolution image: resize to the model input,
// predict, then upsample the probabilities back to the native grid.
data::ProbabilityMap predict_native(const model::MfptNetwork& net, const Image& image);

struct RobustnessRow {
    int level = 0;
    double iou = 0.0;
    double pf1 = 0.0;
    size_t n = 0;
};

// One row per level, in the given order; masks are never degraded.
std::vector<RobustnessRow> robustness_sweep(const model::MfptNetwork& net,
                                            const data::DatasetManifest& manifest,
                                            const std::string& subset,
                                            const DegradationSpec& spec, double threshold,
                                            int workers = 1);

std::string robustness_csv(const std::vector<RobustnessRow>& rows);

}  // namespace mfpt::eval
