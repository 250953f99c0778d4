#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mfpt/data/mask.hpp"
#include "mfpt/train/loss.hpp"

using namespace mfpt;
using namespace mfpt::train;
using data::PixelMask;

namespace {

// Logits that push the edited-class probability to ~p per pixel.
Tensor logits_for(const std::vector<double>& probs) {
    Tensor t(2, static_cast<int>(probs.size()));
    for (size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
        const double z = std::log(p / (1.0 - p));
        t(0, i) = -z / 2;
        t(1, i) = z / 2;
    }
    return t;
}

Tensor hard_logits(const PixelMask& mask, double magnitude = 25.0) {
    Tensor t(2, static_cast<int>(mask.pixel_count()));
    for (size_t i = 0; i < mask.pixel_count(); ++i) {
        const double z = mask.values[i] ? magnitude : -magnitude;
        t(0, i) = -z / 2;
        t(1, i) = z / 2;
    }
    return t;
}

}  // namespace

TEST_CASE("dice loss rewards perfect overlap and punishes a total miss") {
    PixelMask mask(64, 64);
    for (int i = 0; i < 150; ++i) mask.values[i] = 1;  // >= 100 positives

    SUBCASE("hard perfect prediction stays under 1e-3") {
        CHECK(dice_loss(hard_logits(mask), mask) < 1e-3);
    }
    SUBCASE("inverted prediction on an empty mask is near 1") {
        PixelMask empty(64, 64);
        PixelMask full(64, 64, 1);
        const double loss = dice_loss(hard_logits(full), empty);
        const double n = 64.0 * 64.0;
        CHECK(loss == doctest::Approx(1.0 - 1.0 / (n + 1.0)).epsilon(1e-4));
    }
    SUBCASE("4x4 confusion fixture gives 2/7") {
        // tp = 2, fp = 1, fn = 1 with hard probabilities:
        // loss = 1 - (2*2 + 1) / (3 + 3 + 1) = 2/7.
        PixelMask gt(4, 4);
        gt.values[0] = 1;
        gt.values[1] = 1;
        gt.values[2] = 1;  // three positives
        PixelMask pred(4, 4);
        pred.values[0] = 1;
        pred.values[1] = 1;  // tp = 2, fn = 1
        pred.values[5] = 1;  // fp = 1
        const double loss = dice_loss(hard_logits(pred, 40.0), gt);
        CHECK(loss == doctest::Approx(2.0 / 7.0).epsilon(1e-6));
    }
}

TEST_CASE("bce loss matches hand-computed values") {
    SUBCASE("clamped perfect prediction") {
        PixelMask mask(8, 8);
        for (int i = 0; i < 20; ++i) mask.values[i] = 1;
        const double loss = bce_loss(hard_logits(mask, 60.0), mask);
        CHECK(loss == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-3));
        CHECK(loss < 1e-6);
    }
    SUBCASE("uniform half probability is ln 2 regardless of the mask") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 3; ++trial) {
            PixelMask mask(6, 6);
            for (auto& v : mask.values) v = rng() % 2;
            const Tensor logits(2, 36);  // both channels zero -> p = 0.5
            CHECK(bce_loss(logits, mask) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
        }
    }
    SUBCASE("2x2 four-term hand sum") {
        PixelMask mask(2, 2);
        mask.values[0] = 1;
        const Tensor logits = logits_for({0.9, 0.1, 0.2, 0.3});
        const double want =
            -(std::log(0.9) + std::log(0.9) + std::log(0.8) + std::log(0.7)) / 4.0;
        CHECK(bce_loss(logits, mask) == doctest::Approx(want).epsilon(1e-6));
        CHECK(want == doctest::Approx(0.197635).epsilon(1e-4));
    }
}

TEST_CASE("total loss is the exact weighted sum") {
    std::mt19937_64 rng(7);
    PixelMask mask(5, 5);
    for (auto& v : mask.values) v = rng() % 2;
    std::vector<double> probs(25);
    for (auto& p : probs) p = 0.05 + 0.9 * (double(rng() % 1000) / 1000.0);
    const Tensor logits = logits_for(probs);

    const double dice = dice_loss(logits, mask);
    const double bce = bce_loss(logits, mask);
    CHECK(total_loss(logits, mask, {0.0, 1.0}) == doctest::Approx(bce).epsilon(1e-12));
    CHECK(total_loss(logits, mask, {1.0, 0.0}) == doctest::Approx(dice).epsilon(1e-12));
    CHECK(total_loss(logits, mask, {2.0, 3.0}) ==
          doctest::Approx(2.0 * dice + 3.0 * bce).epsilon(1e-12));
}

TEST_CASE("losses are nonnegative and permutation-invariant") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        PixelMask mask(4, 6);
        for (auto& v : mask.values) v = rng() % 2;
        std::vector<double> probs(24);
        for (auto& p : probs) p = double(rng() % 1000) / 999.0;
        const Tensor logits = logits_for(probs);

        const double dice = dice_loss(logits, mask);
        const double bce = bce_loss(logits, mask);
        CHECK(dice >= 0.0);
        CHECK(dice < 1.0);
        CHECK(bce >= 0.0);

        // Apply one random permutation to both prediction and mask.
        std::vector<int> perm(24);
        std::iota(perm.begin(), perm.end(), 0);
        for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
        PixelMask pmask(4, 6);
        std::vector<double> pprobs(24);
        for (int i = 0; i < 24; ++i) {
            pmask.values[i] = mask.values[perm[i]];
            pprobs[i] = probs[perm[i]];
        }
        CHECK(dice_loss(logits_for(pprobs), pmask) == doctest::Approx(dice).epsilon(1e-9));
        CHECK(bce_loss(logits_for(pprobs), pmask) == doctest::Approx(bce).epsilon(1e-9));
    }
}

TEST_CASE("loss gradients flow through the graph builders") {
    PixelMask mask(3, 3);
    mask.values[4] = 1;
    std::mt19937_64 rng(11);
    Tensor logits(2, 9);
    for (size_t i = 0; i < logits.size(); ++i) {
        logits[i] = (double(rng() % 1000) / 500.0) - 1.0;
    }
    nn::Graph g;
    const int in = g.leaf(logits, true);
    const int loss = build_total_loss(g, in, mask, {1.0, 1.0});
    g.backward(loss);

    // Finite-difference spot checks on a few coordinates.
    const double step = 1e-6;
    for (size_t i : {size_t(0), size_t(7), size_t(12)}) {
        Tensor lp = logits, lm = logits;
        lp[i] += step;
        lm[i] -= step;
        const double numeric =
            (total_loss(lp, mask, {1.0, 1.0}) - total_loss(lm, mask, {1.0, 1.0})) /
            (2.0 * step);
        CHECK(g.grad(in)[i] == doctest::Approx(numeric).epsilon(1e-4));
    }
}
