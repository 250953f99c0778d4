#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfpt/data/manifest.hpp"
#include "mfpt/data/mask.hpp"

namespace mfpt::eval {

struct ConfusionCounts {
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;
    uint64_t tn = 0;

    uint64_t total() const { return tp + fp + fn + tn; }
};

struct PixelMetrics {
    double pf1 = 0.0;
    double iou = 0.0;
    double pacc = 0.0;
};

// pixel = 1 iff p >= threshold.
data::PixelMask binarize(const data::ProbabilityMap& prob, double threshold);

ConfusionCounts confusion(const data::PixelMask& pred, const data::PixelMask& gt);

// pF1 = 2tp / (2tp + fp + fn); IoU = tp / (tp + fp + fn); pACC over all
// pixels. Empty ground truth: both empty -> pF1 = IoU = 1; pred nonempty
// -> pF1 = IoU = 0.
PixelMetrics metrics(const ConfusionCounts& c);

struct PerImageMetrics {
    std::string id;
    PixelMetrics values;
    bool gt_empty = false;
};

struct EvalReport {
    std::string subset;
    double threshold = 0.5;
    size_t n = 0;
    bool authentic_only = false;
    std::optional<double> pf1;   // absent for authentic-only subsets
    std::optional<double> iou;   // absent for authentic-only subsets
    std::optional<double> pacc;
    std::vector<PerImageMetrics> per_image;

    std::string to_json() const;
};

// Subset selection: "all" keeps everything; split names filter by split;
// anything else filters by the manifest's subset tags.
std::vector<const data::ImageSample*> select_subset(const data::DatasetManifest& manifest,
                                                    const std::string& subset);

// Per-image metrics, then the arithmetic mean. Authentic-only subsets
// aggregate pACC alone; mixed or edited subsets also aggregate IoU and pF1.
EvalReport evaluate_subset(const std::map<std::string, data::ProbabilityMap>& predictions,
                           const data::DatasetManifest& manifest, const std::string& subset,
                           double threshold);

}  // namespace mfpt::eval
