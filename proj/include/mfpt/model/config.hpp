#pragma once

#include <string>
#include <vector>

namespace mfpt::model {

// Head/channel allocation between the high- and low-frequency attention
// branches. h_high = round(r * N_h) clamped to [floor(N_h/2)+1, N_h];
// channels follow the same proportion, adjusted to the nearest multiple of
// h_high (ties round up). Construction fails when the leftover low-branch
// channels are not divisible by h_low.
struct HeadChannelSplit {
    int heads_high = 0;
    int heads_low = 0;
    int channels_high = 0;
    int channels_low = 0;
};

HeadChannelSplit split_heads_channels(int head_count, int channels, double freq_ratio);

// Full architecture hyperparameter set. Defaults are the desk-scale
// configuration: an 8-block, 64-channel frozen backbone on 64x64 inputs.
struct MfptConfig {
    // Frozen backbone.
    int n_blocks = 8;                       // N
    std::vector<int> tap_stages = {2, 4, 6, 8};  // 1-based block indices, M entries
    int patch_size = 8;                     // P
    int backbone_channels = 64;             // token width inside the encoder
    int backbone_heads = 4;
    double backbone_mlp_ratio = 4.0;
    unsigned long backbone_seed = 1234;     // frozen random init

    // Prompters.
    int embed_channels = 64;                // prompt-embedding width C
    int head_count = 8;                     // N_h in the feature prompter
    double freq_ratio = 0.75;               // r in (0.5, 1]
    int group_length = 8;                   // tokens per attention group
    double highpass_cutoff = 0.25;          // fraction of the Nyquist radius
    int adapter_rank = 8;
    int decoder_channels = 16;

    int input_width = 64;
    int input_height = 64;

    // Component toggles for ablation runs.
    bool enable_finp = true;
    bool enable_ffrp = true;
    bool enable_adapter = true;

    int token_count() const {
        return (input_width / patch_size) * (input_height / patch_size);
    }
    int grid_width() const { return input_width / patch_size; }
    int grid_height() const { return input_height / patch_size; }

    // Throws UsageError on any violated constraint.
    void validate() const;

    HeadChannelSplit head_split() const {
        return split_heads_channels(head_count, backbone_channels, freq_ratio);
    }

    std::string to_json() const;
    static MfptConfig from_json(const std::string& text);
};

}  // namespace mfpt::model
