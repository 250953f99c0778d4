#include "mfpt/eval/metrics.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "mfpt/core/error.hpp"

using json = nlohmann::json;

namespace mfpt::eval {

data::PixelMask binarize(const data::ProbabilityMap& prob, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw UsageError("binarize: threshold must be in [0, 1]");
    }
    data::PixelMask mask(prob.width, prob.height);
    for (size_t i = 0; i < prob.values.size(); ++i) {
        mask.values[i] = prob.values[i] >= threshold ? 1 : 0;
    }
    return mask;
}

ConfusionCounts confusion(const data::PixelMask& pred, const data::PixelMask& gt) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw DataError("confusion: prediction is " + std::to_string(pred.width) + "x" +
                        std::to_string(pred.height) + " but ground truth is " +
                        std::to_string(gt.width) + "x" + std::to_string(gt.height));
    }
    ConfusionCounts c;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] != 0;
        const bool g = gt.values[i] != 0;
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

PixelMetrics metrics(const ConfusionCounts& c) {
    PixelMetrics m;
    const uint64_t denom_f1 = 2 * c.tp + c.fp + c.fn;
    const uint64_t denom_iou = c.tp + c.fp + c.fn;
    if (denom_iou == 0) {
        // Ground truth and prediction both empty.
        m.pf1 = 1.0;
        m.iou = 1.0;
    } else {
        m.pf1 = static_cast<double>(2 * c.tp) / static_cast<double>(denom_f1);
        m.iou = static_cast<double>(c.tp) / static_cast<double>(denom_iou);
    }
    const uint64_t total = c.total();
    m.pacc = total == 0 ? 1.0
                        : static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
    return m;
}

std::vector<const data::ImageSample*> select_subset(const data::DatasetManifest& manifest,
                                                    const std::string& subset) {
    std::vector<const data::ImageSample*> out;
    if (subset == "all" || subset.empty()) {
        for (const auto& s : manifest.samples) out.push_back(&s);
        return out;
    }
    if (subset == "train" || subset == "val" || subset == "test" || subset == "unassigned") {
        const data::Split split = data::parse_split(subset);
        for (const auto& s : manifest.samples)
            if (s.split == split) out.push_back(&s);
        return out;
    }
    for (const auto& s : manifest.samples) {
        auto it = manifest.subset_tags.find(s.id);
        if (it != manifest.subset_tags.end() && it->second == subset) out.push_back(&s);
    }
    return out;
}

EvalReport evaluate_subset(const std::map<std::string, data::ProbabilityMap>& predictions,
                           const data::DatasetManifest& manifest, const std::string& subset,
                           double threshold) {
    EvalReport report;
    report.subset = subset.empty() ? "all" : subset;
    report.threshold = threshold;

    const auto samples = select_subset(manifest, subset);
    report.n = samples.size();

    bool any_edited = false;
    double sum_pf1 = 0.0, sum_iou = 0.0, sum_pacc = 0.0;
    for (const data::ImageSample* s : samples) {
        auto it = predictions.find(s->id);
        if (it == predictions.end()) {
            throw DataError("evaluate: no prediction for sample '" + s->id + "'");
        }
        const data::ProbabilityMap& prob = it->second;
        if (prob.width != s->width || prob.height != s->height) {
            throw DataError("evaluate: prediction size mismatch for sample '" + s->id + "'");
        }
        const data::PixelMask gt = manifest.ground_truth(*s);
        const PixelMetrics m = metrics(confusion(binarize(prob, threshold), gt));

        PerImageMetrics row;
        row.id = s->id;
        row.values = m;
        row.gt_empty = s->role == data::Role::Authentic;
        report.per_image.push_back(std::move(row));

        if (s->role == data::Role::Edited) any_edited = true;
        sum_pf1 += m.pf1;
        sum_iou += m.iou;
        sum_pacc += m.pacc;
    }

    report.authentic_only = report.n > 0 && !any_edited;
    if (report.n > 0) {
        report.pacc = sum_pacc / static_cast<double>(report.n);
        if (!report.authentic_only) {
            report.pf1 = sum_pf1 / static_cast<double>(report.n);
            report.iou = sum_iou / static_cast<double>(report.n);
        }
    }
    return report;
}

std::string EvalReport::to_json() const {
    json j;
    j["subset"] = subset;
    j["threshold"] = threshold;
    j["n"] = n;
    j["authentic_only"] = authentic_only;
    if (pf1) j["pF1"] = *pf1;
    if (iou) j["IoU"] = *iou;
    if (pacc) j["pACC"] = *pacc;
    json per = json::array();
    for (const auto& row : per_image) {
        json r;
        r["id"] = row.id;
        r["pF1"] = row.values.pf1;
        r["IoU"] = row.values.iou;
        r["pACC"] = row.values.pacc;
        per.push_back(std::move(r));
    }
    j["per_image"] = std::move(per);
    return j.dump(2);
}

}  // namespace mfpt::eval
