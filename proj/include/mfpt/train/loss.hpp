#pragma once

#include "mfpt/core/tensor.hpp"
#include "mfpt/data/mask.hpp"
#include "mfpt/nn/graph.hpp"

namespace mfpt::train {

struct LossWeights {
    double lambda_dice = 1.0;
    double lambda_ce = 1.0;
};

// Losses consume 2 x (W*H) logits; the edited-class probability is the
// softmax over the two channels, i.e. sigmoid(logit_1 - logit_0).

constexpr double kDiceSmoothing = 1.0;
constexpr double kBceClamp = 1e-7;

// Graph builders returning a 1x1 loss node (used by the trainer).
int build_dice_loss(nn::Graph& g, int logits, const data::PixelMask& mask);
int build_bce_loss(nn::Graph& g, int logits, const data::PixelMask& mask);
int build_total_loss(nn::Graph& g, int logits, const data::PixelMask& mask,
                     const LossWeights& weights);

// Value-only evaluation.
double dice_loss(const Tensor& logits, const data::PixelMask& mask);
double bce_loss(const Tensor& logits, const data::PixelMask& mask);
double total_loss(const Tensor& logits, const data::PixelMask& mask,
                  const LossWeights& weights);

}  // namespace mfpt::train
