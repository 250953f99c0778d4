#include "mfpt/model/config.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mfpt/core/error.hpp"

using json = nlohmann::json;

namespace mfpt::model {

HeadChannelSplit split_heads_channels(int head_count, int channels, double freq_ratio) {
    if (head_count < 1) throw UsageError("split: head count must be >= 1");
    if (channels < 1) throw UsageError("split: channel count must be >= 1");
    if (!(freq_ratio > 0.5 && freq_ratio <= 1.0)) {
        throw UsageError("split: freq_ratio must be in (0.5, 1]");
    }

    HeadChannelSplit s;
    const int lo = head_count / 2 + 1;
    int h_high = static_cast<int>(std::llround(freq_ratio * head_count));
    h_high = std::max(lo, std::min(head_count, h_high));
    s.heads_high = h_high;
    s.heads_low = head_count - h_high;

    // Channels in the same proportion, snapped to the nearest multiple of
    // h_high; ties round up.
    const long long target = std::llround(freq_ratio * channels);
    const long long down = (target / h_high) * h_high;
    const long long up = down + h_high;
    const int c_high = static_cast<int>((target - down < up - target) ? down : up);
    if (c_high <= 0 || c_high > channels) {
        throw UsageError("split: no valid channel allocation for the high branch (got " +
                         std::to_string(c_high) + " of " + std::to_string(channels) + ")");
    }
    s.channels_high = c_high;
    s.channels_low = channels - c_high;
    if (s.heads_low > 0) {
        if (s.channels_low <= 0 || s.channels_low % s.heads_low != 0) {
            throw UsageError("split: low-branch channels (" + std::to_string(s.channels_low) +
                             ") not divisible by its head count (" +
                             std::to_string(s.heads_low) + ")");
        }
    } else if (s.channels_low != 0) {
        throw UsageError("split: low branch disabled but " + std::to_string(s.channels_low) +
                         " channels remain unallocated");
    }
    return s;
}

void MfptConfig::validate() const {
    if (n_blocks < 1) throw UsageError("config: n_blocks must be >= 1");
    if (tap_stages.empty()) throw UsageError("config: tap_stages must be non-empty");
    int prev = 0;
    for (int t : tap_stages) {
        if (t <= prev) throw UsageError("config: tap_stages must be strictly increasing");
        if (t < 1 || t > n_blocks) {
            throw UsageError("config: tap stage " + std::to_string(t) + " outside [1, N]");
        }
        prev = t;
    }
    if (patch_size < 1) throw UsageError("config: patch_size must be >= 1");
    if (input_width <= 0 || input_height <= 0) {
        throw UsageError("config: input size must be positive");
    }
    if (input_width % patch_size != 0 || input_height % patch_size != 0) {
        throw UsageError("config: patch_size must divide input width and height");
    }
    if (backbone_channels < 1) throw UsageError("config: backbone_channels must be >= 1");
    if (backbone_heads < 1 || backbone_channels % backbone_heads != 0) {
        throw UsageError("config: backbone_heads must divide backbone_channels");
    }
    if (embed_channels < 1) throw UsageError("config: embed_channels must be >= 1");
    if (group_length < 1) throw UsageError("config: group_length must be >= 1");
    if (!(highpass_cutoff > 0.0 && highpass_cutoff < 1.0)) {
        throw UsageError("config: highpass_cutoff must be in (0, 1)");
    }
    if (adapter_rank < 1) throw UsageError("config: adapter_rank must be >= 1");
    if (decoder_channels < 1) throw UsageError("config: decoder_channels must be >= 1");
    split_heads_channels(head_count, backbone_channels, freq_ratio);  // throws when invalid
}

std::string MfptConfig::to_json() const {
    json j;
    j["n_blocks"] = n_blocks;
    j["tap_stages"] = tap_stages;
    j["patch_size"] = patch_size;
    j["backbone_channels"] = backbone_channels;
    j["backbone_heads"] = backbone_heads;
    j["backbone_mlp_ratio"] = backbone_mlp_ratio;
    j["backbone_seed"] = backbone_seed;
    j["embed_channels"] = embed_channels;
    j["head_count"] = head_count;
    j["freq_ratio"] = freq_ratio;
    j["group_length"] = group_length;
    j["highpass_cutoff"] = highpass_cutoff;
    j["adapter_rank"] = adapter_rank;
    j["decoder_channels"] = decoder_channels;
    j["input_width"] = input_width;
    j["input_height"] = input_height;
    j["enable_finp"] = enable_finp;
    j["enable_ffrp"] = enable_ffrp;
    j["enable_adapter"] = enable_adapter;
    return j.dump();
}

MfptConfig MfptConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config: JSON parse error: ") + e.what());
    }
    MfptConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("n_blocks", c.n_blocks);
    get("tap_stages", c.tap_stages);
    get("patch_size", c.patch_size);
    get("backbone_channels", c.backbone_channels);
    get("backbone_heads", c.backbone_heads);
    get("backbone_mlp_ratio", c.backbone_mlp_ratio);
    get("backbone_seed", c.backbone_seed);
    get("embed_channels", c.embed_channels);
    get("head_count", c.head_count);
    get("freq_ratio", c.freq_ratio);
    get("group_length", c.group_length);
    get("highpass_cutoff", c.highpass_cutoff);
    get("adapter_rank", c.adapter_rank);
    get("decoder_channels", c.decoder_channels);
    get("input_width", c.input_width);
    get("input_height", c.input_height);
    get("enable_finp", c.enable_finp);
    get("enable_ffrp", c.enable_ffrp);
    get("enable_adapter", c.enable_adapter);
    c.validate();
    return c;
}

}  // namespace mfpt::model
