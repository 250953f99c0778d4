#include "mfpt/train/loss.hpp"

#include "mfpt/core/error.hpp"

namespace mfpt::train {

namespace {

void check_shapes(const Tensor& logits, const data::PixelMask& mask) {
    const int n = mask.width * mask.height;
    if (logits.rows() != 2 || logits.cols() != n) {
        throw NumericError("loss: logits must be 2 x (W*H) matching the mask");
    }
}

Tensor mask_row(const data::PixelMask& mask) {
    Tensor m(1, static_cast<int>(mask.pixel_count()));
    for (size_t i = 0; i < mask.pixel_count(); ++i) m[i] = mask.values[i];
    return m;
}

// Edited-class probability: sigmoid of the channel-1 minus channel-0 logit.
int edited_probability(nn::Graph& g, int logits) {
    const int z = g.sub(g.slice_rows(logits, 1, 2), g.slice_rows(logits, 0, 1));
    return g.sigmoid(z);
}

}  // namespace

int build_dice_loss(nn::Graph& g, int logits, const data::PixelMask& mask) {
    check_shapes(g.val(logits), mask);
    const int p = edited_probability(g, logits);
    const int m = g.constant(mask_row(mask));
    const double mask_sum = edited_area_ratio(mask) * static_cast<double>(mask.pixel_count());
    const int intersection = g.sum_all(g.mul(p, m));
    const int pred_sum = g.sum_all(p);
    const int numerator = g.affine(intersection, 2.0, kDiceSmoothing);
    const int denominator = g.affine(pred_sum, 1.0, mask_sum + kDiceSmoothing);
    // 1 - (2*i + eps) / (sum_p + sum_m + eps)
    return g.affine(g.div(numerator, denominator), -1.0, 1.0);
}

int build_bce_loss(nn::Graph& g, int logits, const data::PixelMask& mask) {
    check_shapes(g.val(logits), mask);
    const int p = edited_probability(g, logits);
    const int pc = g.clamp(p, kBceClamp, 1.0 - kBceClamp);
    Tensor m = mask_row(mask);
    Tensor m_inv(1, m.cols());
    for (int i = 0; i < m.cols(); ++i) m_inv[i] = 1.0 - m[i];
    const int pos = g.mul(g.constant(std::move(m)), g.log(pc));
    const int neg = g.mul(g.constant(std::move(m_inv)), g.log(g.affine(pc, -1.0, 1.0)));
    return g.affine(g.mean_all(g.add(pos, neg)), -1.0, 0.0);
}

int build_total_loss(nn::Graph& g, int logits, const data::PixelMask& mask,
                     const LossWeights& weights) {
    const int dice = build_dice_loss(g, logits, mask);
    const int bce = build_bce_loss(g, logits, mask);
    return g.add(g.affine(dice, weights.lambda_dice, 0.0),
                 g.affine(bce, weights.lambda_ce, 0.0));
}

double dice_loss(const Tensor& logits, const data::PixelMask& mask) {
    nn::Graph g;
    return g.val(build_dice_loss(g, g.constant(logits), mask))(0, 0);
}

double bce_loss(const Tensor& logits, const data::PixelMask& mask) {
    nn::Graph g;
    return g.val(build_bce_loss(g, g.constant(logits), mask))(0, 0);
}

double total_loss(const Tensor& logits, const data::PixelMask& mask,
                  const LossWeights& weights) {
    nn::Graph g;
    return g.val(build_total_loss(g, g.constant(logits), mask, weights))(0, 0);
}

}  // namespace mfpt::train
