#pragma once

#include <string>
#include <vector>

#include "mfpt/data/manifest.hpp"
#include "mfpt/data/mask.hpp"

namespace mfpt::triage {

// Decision thresholds of the labeling pipeline. Boundaries are honored
// exactly: accept strictly above accept_above, review inside
// [review_low, accept_above], discard strictly below review_low.
struct TriagePolicy {
    double accept_above = 0.5;
    double review_low = 0.3;
    double label_threshold = 0.1;
    double area_min = 0.01;
    double area_max = 0.99;

    void validate() const;
};

enum class TriageOutcome { Accept, Review, Discard };
enum class FailureClass { None, UncontrolledGeneration, NoChange };

const char* outcome_name(TriageOutcome outcome);
const char* failure_name(FailureClass failure);

TriageOutcome triage_decide(double mean_prob, const TriagePolicy& policy);

// Binarize at the labeling threshold (pixel = 1 iff p >= label_threshold).
data::PixelMask finalize_label(const data::ProbabilityMap& prob, const TriagePolicy& policy);

struct AreaGateResult {
    bool keep = true;
    FailureClass failure = FailureClass::None;
    double ratio = 0.0;
};

// ratio >= area_max -> drop as uncontrolled generation; ratio <= area_min
// -> drop as a no-change case.
AreaGateResult area_gate(const data::PixelMask& mask, const TriagePolicy& policy);

// Confidence of the predicted region: mean probability over pixels at or
// above the labeling threshold; 0 when the predicted region is empty.
double predicted_region_mean(const data::ProbabilityMap& prob, double label_threshold);

struct TriageDecision {
    std::string id;
    double mean_prob = 0.0;
    TriageOutcome decision = TriageOutcome::Discard;  // from mean_prob alone
    double area_ratio = 0.0;
    FailureClass failure = FailureClass::None;
    bool kept = false;  // accepted and past the area gate
};

struct TriageResult {
    std::vector<TriageDecision> decisions;  // edited samples, sorted by id
    data::DatasetManifest accept_manifest;
    data::DatasetManifest review_manifest;
    size_t discarded = 0;
};

// Applies the decision rules to every edited sample, expecting one
// probability map per sample at <probmap_dir>/<id>.png or <id>.f32. Writes
// accept.jsonl, review.jsonl, discard.csv and masks/ under out_dir.
// Authentic samples pass through to the accept manifest unchanged.
TriageResult run_triage(const std::string& probmap_dir,
                        const data::DatasetManifest& manifest, const TriagePolicy& policy,
                        const std::string& out_dir);

}  // namespace mfpt::triage
