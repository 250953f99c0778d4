#include "mfpt/triage/triage.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mfpt/core/error.hpp"

namespace fs = std::filesystem;

namespace mfpt::triage {

void TriagePolicy::validate() const {
    if (!(review_low >= 0.0 && review_low <= accept_above && accept_above <= 1.0)) {
        throw UsageError("triage: need 0 <= review_low <= accept_above <= 1");
    }
    if (!(area_min > 0.0 && area_min < area_max && area_max < 1.0)) {
        throw UsageError("triage: need 0 < area_min < area_max < 1");
    }
    if (!(label_threshold > 0.0 && label_threshold < 1.0)) {
        throw UsageError("triage: label_threshold must be in (0, 1)");
    }
}

const char* outcome_name(TriageOutcome outcome) {
    switch (outcome) {
        case TriageOutcome::Accept: return "accept";
        case TriageOutcome::Review: return "review";
        case TriageOutcome::Discard: return "discard";
    }
    return "?";
}

const char* failure_name(FailureClass failure) {
    switch (failure) {
        case FailureClass::None: return "none";
        case FailureClass::UncontrolledGeneration: return "uncontrolled_generation";
        case FailureClass::NoChange: return "no_change";
    }
    return "?";
}

TriageOutcome triage_decide(double mean_prob, const TriagePolicy& policy) {
    if (!(mean_prob >= 0.0 && mean_prob <= 1.0)) {
        throw DataError("triage: mean probability " + std::to_string(mean_prob) +
                        " outside [0, 1]");
    }
    if (mean_prob > policy.accept_above) return TriageOutcome::Accept;
    if (mean_prob >= policy.review_low) return TriageOutcome::Review;
    return TriageOutcome::Discard;
}

data::PixelMask finalize_label(const data::ProbabilityMap& prob,
                               const TriagePolicy& policy) {
    data::PixelMask mask(prob.width, prob.height);
    for (size_t i = 0; i < prob.values.size(); ++i) {
        mask.values[i] = prob.values[i] >= policy.label_threshold ? 1 : 0;
    }
    return mask;
}

AreaGateResult area_gate(const data::PixelMask& mask, const TriagePolicy& policy) {
    AreaGateResult r;
    r.ratio = data::edited_area_ratio(mask);
    if (r.ratio >= policy.area_max) {
        r.keep = false;
        r.failure = FailureClass::UncontrolledGeneration;
    } else if (r.ratio <= policy.area_min) {
        r.keep = false;
        r.failure = FailureClass::NoChange;
    }
    return r;
}

double predicted_region_mean(const data::ProbabilityMap& prob, double label_threshold) {
    double sum = 0.0;
    size_t count = 0;
    for (double v : prob.values) {
        if (v >= label_threshold) {
            sum += v;
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

std::string find_probmap(const std::string& dir, const std::string& id) {
    const fs::path base = fs::path(dir) / id;
    for (const char* ext : {".png", ".f32", ".bin"}) {
        fs::path candidate = base;
        candidate += ext;
        if (fs::exists(candidate)) return candidate.string();
    }
    throw DataError("triage: no probability map for sample '" + id + "' under '" + dir +
                    "'");
}

// Output manifests live under out_dir; image paths must stay resolvable.
std::string rebase_path(const data::DatasetManifest& manifest, const std::string& rel,
                        const std::string& out_dir) {
    std::error_code ec;
    const fs::path resolved = fs::absolute(manifest.resolve(rel));
    const fs::path rebased = fs::relative(resolved, fs::absolute(out_dir), ec);
    if (ec || rebased.empty()) return resolved.string();
    return rebased.string();
}

}  // namespace

TriageResult run_triage(const std::string& probmap_dir,
                        const data::DatasetManifest& manifest, const TriagePolicy& policy,
                        const std::string& out_dir) {
    policy.validate();
    fs::create_directories(fs::path(out_dir) / "masks");

    TriageResult result;
    result.accept_manifest.base_dir = out_dir;
    result.review_manifest.base_dir = out_dir;

    // Sort by id so outputs are invariant under input permutation.
    std::vector<const data::ImageSample*> ordered;
    for (const auto& s : manifest.samples) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });

    struct DiscardRow {
        std::string id;
        double mean_prob;
        double ratio;
        FailureClass failure;
    };
    std::vector<DiscardRow> discard_rows;

    for (const data::ImageSample* s : ordered) {
        if (s->role == data::Role::Authentic) {
            data::ImageSample passthrough = *s;
            passthrough.image_path = rebase_path(manifest, s->image_path, out_dir);
            result.accept_manifest.samples.push_back(std::move(passthrough));
            continue;
        }
        const std::string map_path = find_probmap(probmap_dir, s->id);
        const data::ProbabilityMap prob = data::load_probability_map(map_path);
        if (prob.width != s->width || prob.height != s->height) {
            throw DataError("triage: probability map for '" + s->id + "' is " +
                            std::to_string(prob.width) + "x" + std::to_string(prob.height) +
                            " but the sample is " + std::to_string(s->width) + "x" +
                            std::to_string(s->height));
        }

        TriageDecision d;
        d.id = s->id;
        d.mean_prob = predicted_region_mean(prob, policy.label_threshold);
        d.decision = triage_decide(d.mean_prob, policy);

        const data::PixelMask label = finalize_label(prob, policy);
        const AreaGateResult gate = area_gate(label, policy);
        d.area_ratio = gate.ratio;
        d.failure = gate.failure;

        if (!gate.keep || d.decision == TriageOutcome::Discard) {
            discard_rows.push_back({d.id, d.mean_prob, d.area_ratio, d.failure});
            ++result.discarded;
        } else if (d.decision == TriageOutcome::Review) {
            data::ImageSample review = *s;
            review.image_path = rebase_path(manifest, s->image_path, out_dir);
            if (review.mask_path) {
                review.mask_path = rebase_path(manifest, *s->mask_path, out_dir);
            }
            result.review_manifest.samples.push_back(std::move(review));
        } else {
            d.kept = true;
            const std::string mask_rel = "masks/" + s->id + ".png";
            data::save_mask((fs::path(out_dir) / mask_rel).string(), label);
            data::ImageSample accepted = *s;
            accepted.image_path = rebase_path(manifest, s->image_path, out_dir);
            accepted.mask_path = mask_rel;
            result.accept_manifest.samples.push_back(std::move(accepted));
        }
        result.decisions.push_back(std::move(d));
    }

    data::save_manifest((fs::path(out_dir) / "accept.jsonl").string(),
                        result.accept_manifest);
    data::save_manifest((fs::path(out_dir) / "review.jsonl").string(),
                        result.review_manifest);

    std::ofstream csv(fs::path(out_dir) / "discard.csv", std::ios::trunc);
    if (!csv) throw DataError("triage: cannot write discard.csv under '" + out_dir + "'");
    csv << "id,mean_prob,area_ratio,failure_class\n";
    char buf[64];
    for (const auto& row : discard_rows) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", row.mean_prob, row.ratio);
        csv << row.id << "," << buf << "," << failure_name(row.failure) << "\n";
    }
    return result;
}

}  // namespace mfpt::triage
