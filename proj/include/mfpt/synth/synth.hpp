#pragma once

#include <string>

#include "mfpt/data/manifest.hpp"

namespace mfpt::synth {

struct SynthOptions {
    int count = 8;          // total samples (authentic + edited)
    int width = 64;
    int height = 64;
    unsigned long seed = 0;
    double area = 0.12;            // target edited-area fraction
    double authentic_frac = 0.5;   // fraction of samples that are authentic

    void validate() const;
};

// Procedural desk-scale dataset: smooth textured sources, edited variants
// with one contiguous locally-resampled region, exact masks, and a manifest
// at <out_dir>/manifest.jsonl. Splits round-robin per source so leakage is
// impossible by construction. Fully deterministic per seed.
data::DatasetManifest generate_dataset(const std::string& out_dir,
                                       const SynthOptions& options);

}  // namespace mfpt::synth
