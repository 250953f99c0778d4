#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mfpt/core/image.hpp"
#include "mfpt/core/tensor.hpp"
#include "mfpt/data/mask.hpp"
#include "mfpt/model/config.hpp"
#include "mfpt/nn/graph.hpp"
#include "mfpt/nn/params.hpp"

namespace mfpt::model {

// ---------------------------------------------------------------------------
// Token-block utilities
// ---------------------------------------------------------------------------

// Flattens non-overlapping P x P patches of a grid into columns; patch order
// is row-major over the patch grid, values row-major within each patch.
Tensor extract_patches(const Tensor& grid, int patch_size);
// Multi-plane variant: rows are ordered plane-major (plane 0 patch values,
// then plane 1, ...).
Tensor extract_patches(const std::vector<Tensor>& planes, int patch_size, double scale);

// Splits a channels x length block into groups of group_length tokens; the
// tail group is zero-padded. Concatenating and stripping the padding is the
// exact inverse.
std::vector<Tensor> group_tokens(const Tensor& x, int group_length);
Tensor ungroup_tokens(const std::vector<Tensor>& groups, int original_length);

// ---------------------------------------------------------------------------
// Graph builders (shared between the network and the test suites)
// ---------------------------------------------------------------------------

struct MlpNodes {
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

// Two-layer MLP w2 * act(w1 * x + b1) + b2. The activation can be bypassed
// so identity-weight configurations compose exactly.
int build_mlp2(nn::Graph& g, int x, const MlpNodes& w, bool gelu_active);

// f_s(f_m(xh + xprev)); both inputs channels x tokens of equal shape.
int build_finp_fuse(nn::Graph& g, int xh, int xprev, const MlpNodes& fm,
                    const MlpNodes& fs, bool gelu_active);

// Multi-head softmax attention on channels x tokens blocks. q decides the
// output length; k and v share their token count.
int build_attention(nn::Graph& g, int q, int k, int v, int heads);

// Grouped self-attention: tokens attend only within their group.
int build_grouped_attention(nn::Graph& g, int q, int k, int v, int heads,
                            int group_length);

struct FfrpNodes {
    int wq_high = -1, wk_high = -1, wv_high = -1;
    int wq_low = -1, wk_low = -1, wv_low = -1;  // unused when heads_low == 0
    int filter_token = -1;                      // channels x 1
    int matching_token = -1;                    // channels x channels
};

// Full dual-branch feature prompter: grouped high-frequency self-attention,
// pooled low-frequency cross-attention, channel concat, cosine gate.
int build_ffrp(nn::Graph& g, int x_r, const FfrpNodes& w, const HeadChannelSplit& split,
               int group_length);

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

struct ParameterAccounting {
    size_t total = 0;
    size_t trainable = 0;
    double ratio = 0.0;
};

struct ForwardBuild {
    int logits = -1;                            // node id; 2 x (W*H)
    std::vector<std::pair<int, int>> bound;     // (param index, node id)
};

// The localization network: frozen transformer encoder, per-stage input
// prompts, per-block residual adapters, dual-branch feature prompts at tap
// stages, and a lightweight multi-scale pixel decoder.
class MfptNetwork {
public:
    MfptNetwork(MfptConfig config, unsigned long init_seed = 7);

    const MfptConfig& config() const { return config_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    // Builds the full forward graph. When with_grad is set, trainable
    // parameters enter as differentiable leaves listed in ForwardBuild::bound.
    ForwardBuild build(nn::Graph& g, const Image& image, bool with_grad) const;

    // Evaluation-mode forward; deterministic in (parameters, input).
    Tensor forward(const Image& image) const;

    // Edited-class probability at input resolution.
    data::ProbabilityMap predict(const Image& image) const;

    // Frozen-encoder reference path: tap features with prompts, adapters and
    // feature gating all skipped.
    std::vector<Tensor> backbone_taps(const Image& image) const;
    // Applies only the decoder to externally supplied tap features.
    Tensor decode_taps(const std::vector<Tensor>& taps) const;

    ParameterAccounting accounting() const;

    void save_checkpoint(const std::string& path) const;
    static MfptNetwork load_checkpoint(const std::string& path);

    // Copies arrays by name from an archive into matching parameters
    // (backbone import hook). Returns the number of arrays applied.
    size_t import_weights(const std::string& path);

private:
    void init_params(unsigned long seed);

    MfptConfig config_;
    nn::ParamStore store_;
};

}  // namespace mfpt::model
