#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfpt/data/manifest.hpp"
#include "mfpt/model/network.hpp"
#include "mfpt/train/loss.hpp"

namespace mfpt::train {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    int batch_size = 8;
    int max_iterations = 200;
    unsigned long seed = 0;
    int eval_interval = 50;
    double eval_threshold = 0.5;
    LossWeights loss_weights;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct TraceRow {
    int iteration = 0;
    double train_loss = 0.0;
    std::optional<double> val_pf1;
};

struct TrainResult {
    std::vector<TraceRow> trace;
    std::vector<std::pair<int, double>> val_history;  // (iteration, val pF1)
    int best_iteration = 0;  // 0 means the initial state
    double best_val_pf1 = 0.0;
};

// Argmax of validation pF1; ties break toward the earliest iteration.
int select_best_checkpoint(const std::vector<std::pair<int, double>>& history);

// Mean pF1 over the given split at the config threshold (model input
// resolution; masks resampled nearest-neighbor).
double mean_split_pf1(const model::MfptNetwork& net, const data::DatasetManifest& manifest,
                      data::Split split, double threshold);

// Seeded shuffled batches over the train split; updates trainable parameters
// only. When checkpoint_dir is non-empty, writes best.ckpt and final.ckpt
// there (best falls back to the initial state when validation never ran).
TrainResult train(model::MfptNetwork& net, const data::DatasetManifest& manifest,
                  const TrainConfig& config, const std::string& checkpoint_dir = "");

std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace mfpt::train
