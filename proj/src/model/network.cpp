#include "mfpt/model/network.hpp"

#include <cmath>
#include <random>

#include "mfpt/core/error.hpp"
#include "mfpt/model/frequency.hpp"

namespace mfpt::model {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Box-Muller over mt19937_64 draws; fully specified, so initialization is
// reproducible independent of the standard library's distributions.
class Rng {
public:
    explicit Rng(unsigned long seed) : gen_(seed) {}

    double uniform() {
        return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    Tensor normal_tensor(int rows, int cols, double std_dev) {
        Tensor t(rows, cols);
        for (size_t i = 0; i < t.size(); ++i) t[i] = normal() * std_dev;
        return t;
    }

private:
    std::mt19937_64 gen_;
};

Tensor identity_tensor(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

// Binds store parameters into a graph on first use and remembers the node id
// so the trainer can pull gradients back out.
class Binder {
public:
    Binder(const nn::ParamStore& store, nn::Graph& g, bool with_grad)
        : store_(store), g_(g), with_grad_(with_grad), node_(store.count(), -1) {}

    int operator()(const std::string& name) {
        const int idx = store_.index_of(name);
        if (idx < 0) throw UsageError("network: unknown parameter '" + name + "'");
        if (node_[idx] < 0) {
            const nn::Param& p = store_.at(idx);
            node_[idx] = g_.leaf(p.value, with_grad_ && p.trainable);
        }
        return node_[idx];
    }

    std::vector<std::pair<int, int>> bound() const {
        std::vector<std::pair<int, int>> out;
        for (size_t i = 0; i < node_.size(); ++i) {
            if (node_[i] >= 0) out.emplace_back(static_cast<int>(i), node_[i]);
        }
        return out;
    }

private:
    const nn::ParamStore& store_;
    nn::Graph& g_;
    bool with_grad_;
    std::vector<int> node_;
};

std::string block_prefix(int n) { return "backbone.block" + std::to_string(n); }
std::string stage_prefix(const char* mod, int n) {
    return std::string(mod) + ".stage" + std::to_string(n);
}

}  // namespace

// ---------------------------------------------------------------------------
// Token-block utilities
// ---------------------------------------------------------------------------

Tensor extract_patches(const Tensor& grid, int patch_size) {
    return extract_patches(std::vector<Tensor>{grid}, patch_size, 1.0);
}

Tensor extract_patches(const std::vector<Tensor>& planes, int patch_size, double scale) {
    if (planes.empty()) throw NumericError("patches: no planes");
    const int h = planes[0].rows();
    const int w = planes[0].cols();
    if (h % patch_size != 0 || w % patch_size != 0) {
        throw UsageError("patches: patch size " + std::to_string(patch_size) +
                         " does not divide " + std::to_string(w) + "x" + std::to_string(h));
    }
    const int gh = h / patch_size;
    const int gw = w / patch_size;
    const int per_plane = patch_size * patch_size;
    Tensor out(static_cast<int>(planes.size()) * per_plane, gh * gw);
    for (size_t pl = 0; pl < planes.size(); ++pl) {
        const Tensor& plane = planes[pl];
        for (int gy = 0; gy < gh; ++gy) {
            for (int gx = 0; gx < gw; ++gx) {
                const int token = gy * gw + gx;
                for (int dy = 0; dy < patch_size; ++dy) {
                    for (int dx = 0; dx < patch_size; ++dx) {
                        const int row =
                            static_cast<int>(pl) * per_plane + dy * patch_size + dx;
                        out(row, token) =
                            plane(gy * patch_size + dy, gx * patch_size + dx) * scale;
                    }
                }
            }
        }
    }
    return out;
}

std::vector<Tensor> group_tokens(const Tensor& x, int group_length) {
    if (group_length < 1) throw UsageError("group_tokens: group length must be >= 1");
    const int length = x.cols();
    const int groups = std::max(1, (length + group_length - 1) / group_length);
    std::vector<Tensor> out;
    out.reserve(groups);
    for (int g = 0; g < groups; ++g) {
        Tensor block(x.rows(), group_length);
        for (int c = 0; c < group_length; ++c) {
            const int src = g * group_length + c;
            if (src >= length) break;  // zero-padded tail
            for (int r = 0; r < x.rows(); ++r) block(r, c) = x(r, src);
        }
        out.push_back(std::move(block));
    }
    return out;
}

Tensor ungroup_tokens(const std::vector<Tensor>& groups, int original_length) {
    if (groups.empty()) throw NumericError("ungroup: no groups");
    Tensor out(groups[0].rows(), original_length);
    int col = 0;
    for (const Tensor& g : groups) {
        for (int c = 0; c < g.cols() && col < original_length; ++c, ++col) {
            for (int r = 0; r < g.rows(); ++r) out(r, col) = g(r, c);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Graph builders
// ---------------------------------------------------------------------------

int build_mlp2(nn::Graph& g, int x, const MlpNodes& w, bool gelu_active) {
    int h = g.add_bias(g.matmul(w.w1, x), w.b1);
    if (gelu_active) h = g.gelu(h);
    return g.add_bias(g.matmul(w.w2, h), w.b2);
}

int build_finp_fuse(nn::Graph& g, int xh, int xprev, const MlpNodes& fm,
                    const MlpNodes& fs, bool gelu_active) {
    const int sum = g.add(xh, xprev);
    return build_mlp2(g, build_mlp2(g, sum, fm, gelu_active), fs, gelu_active);
}

int build_attention(nn::Graph& g, int q, int k, int v, int heads) {
    const int channels = g.val(q).rows();
    if (channels % heads != 0) {
        throw UsageError("attention: heads must divide channels");
    }
    const int d = channels / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    int out = -1;
    for (int h = 0; h < heads; ++h) {
        const int qh = g.slice_rows(q, h * d, (h + 1) * d);
        const int kh = g.slice_rows(k, h * d, (h + 1) * d);
        const int vh = g.slice_rows(v, h * d, (h + 1) * d);
        const int scores = g.affine(g.matmul_at_b(qh, kh), scale, 0.0);
        const int attn = g.row_softmax(scores);
        const int oh = g.matmul_a_bt(vh, attn);
        out = (out < 0) ? oh : g.concat_rows(out, oh);
    }
    return out;
}

int build_grouped_attention(nn::Graph& g, int q, int k, int v, int heads,
                            int group_length) {
    const int length = g.val(q).cols();
    const int groups = std::max(1, (length + group_length - 1) / group_length);
    const int padded = groups * group_length;
    int qp = q, kp = k, vp = v;
    if (padded != length) {
        qp = g.pad_cols_right(q, padded - length);
        kp = g.pad_cols_right(k, padded - length);
        vp = g.pad_cols_right(v, padded - length);
    }
    std::vector<int> parts;
    parts.reserve(groups);
    for (int grp = 0; grp < groups; ++grp) {
        const int c0 = grp * group_length;
        const int c1 = c0 + group_length;
        const int qg = g.slice_cols(qp, c0, c1);
        const int kg = g.slice_cols(kp, c0, c1);
        const int vg = g.slice_cols(vp, c0, c1);
        parts.push_back(build_attention(g, qg, kg, vg, heads));
    }
    int joined = parts.size() == 1 ? parts[0] : g.concat_cols(parts);
    if (padded != length) joined = g.slice_cols(joined, 0, length);
    return joined;
}

int build_ffrp(nn::Graph& g, int x_r, const FfrpNodes& w, const HeadChannelSplit& split,
               int group_length) {
    // High-frequency branch: grouped self-attention over local windows.
    const int qh = g.matmul(w.wq_high, x_r);
    const int kh = g.matmul(w.wk_high, x_r);
    const int vh = g.matmul(w.wv_high, x_r);
    const int x_hr = build_grouped_attention(g, qh, kh, vh, split.heads_high, group_length);

    int x_hlr = x_hr;
    if (split.heads_low > 0) {
        // Low-frequency branch: queries from every token, keys/values from
        // window-averaged tokens.
        const int pooled = g.avgpool_cols(x_r, group_length);
        const int ql = g.matmul(w.wq_low, x_r);
        const int kl = g.matmul(w.wk_low, pooled);
        const int vl = g.matmul(w.wv_low, pooled);
        const int x_lr = build_attention(g, ql, kl, vl, split.heads_low);
        x_hlr = g.concat_rows(x_hr, x_lr);
    }

    const int sim = g.cos_sim_cols(x_hlr, w.filter_token);
    return g.matmul(w.matching_token, g.scale_cols(x_r, sim));
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

MfptNetwork::MfptNetwork(MfptConfig config, unsigned long init_seed)
    : config_(std::move(config)) {
    config_.validate();
    init_params(init_seed);
}

void MfptNetwork::init_params(unsigned long seed) {
    const int cc = config_.backbone_channels;
    const int ec = config_.embed_channels;
    const int p2 = config_.patch_size * config_.patch_size;
    const int tokens = config_.token_count();
    const int hidden = static_cast<int>(cc * config_.backbone_mlp_ratio);
    const int dc = config_.decoder_channels;

    Rng frozen(config_.backbone_seed);
    auto add_frozen = [&](const std::string& name, Tensor t) {
        store_.add(name, nn::ParamGroup::Backbone, false, std::move(t));
    };

    const double attn_std = 1.0 / std::sqrt(static_cast<double>(cc));
    add_frozen("backbone.patch_embed.w", frozen.normal_tensor(cc, 3 * p2, attn_std));
    add_frozen("backbone.patch_embed.b", Tensor(cc, 1));
    add_frozen("backbone.pos_embed", frozen.normal_tensor(cc, tokens, 0.02));
    for (int n = 1; n <= config_.n_blocks; ++n) {
        const std::string pfx = block_prefix(n);
        Tensor gamma(cc, 1);
        gamma.fill(1.0);
        add_frozen(pfx + ".ln1.g", gamma);
        add_frozen(pfx + ".ln1.b", Tensor(cc, 1));
        add_frozen(pfx + ".attn.wq", frozen.normal_tensor(cc, cc, attn_std));
        add_frozen(pfx + ".attn.bq", Tensor(cc, 1));
        add_frozen(pfx + ".attn.wk", frozen.normal_tensor(cc, cc, attn_std));
        add_frozen(pfx + ".attn.bk", Tensor(cc, 1));
        add_frozen(pfx + ".attn.wv", frozen.normal_tensor(cc, cc, attn_std));
        add_frozen(pfx + ".attn.bv", Tensor(cc, 1));
        add_frozen(pfx + ".attn.wo", frozen.normal_tensor(cc, cc, attn_std));
        add_frozen(pfx + ".attn.bo", Tensor(cc, 1));
        Tensor gamma2(cc, 1);
        gamma2.fill(1.0);
        add_frozen(pfx + ".ln2.g", gamma2);
        add_frozen(pfx + ".ln2.b", Tensor(cc, 1));
        add_frozen(pfx + ".mlp.w1", frozen.normal_tensor(hidden, cc, attn_std));
        add_frozen(pfx + ".mlp.b1", Tensor(hidden, 1));
        add_frozen(pfx + ".mlp.w2", frozen.normal_tensor(cc, hidden,
                                                         1.0 / std::sqrt(double(hidden))));
        add_frozen(pfx + ".mlp.b2", Tensor(cc, 1));
    }

    Rng rng(seed);
    auto add_train = [&](const std::string& name, nn::ParamGroup grp, Tensor t) {
        store_.add(name, grp, true, std::move(t));
    };

    if (config_.enable_finp) {
        // Prompt pixels live in roughly [-255, 255]; the embedding init keeps
        // token magnitudes near the backbone's working range.
        const double embed_std = 1.0 / (255.0 * std::sqrt(static_cast<double>(p2)));
        const double mlp_std = 1.0 / std::sqrt(static_cast<double>(ec));
        if (ec == cc) {
            add_train("finp.bridge_in.w", nn::ParamGroup::FInP, identity_tensor(cc));
            add_train("finp.bridge_out.w", nn::ParamGroup::FInP, identity_tensor(cc));
        } else {
            const double bstd = 1.0 / std::sqrt(static_cast<double>(std::max(cc, ec)));
            add_train("finp.bridge_in.w", nn::ParamGroup::FInP,
                      rng.normal_tensor(ec, cc, bstd));
            add_train("finp.bridge_out.w", nn::ParamGroup::FInP,
                      rng.normal_tensor(cc, ec, bstd));
        }
        for (int n : config_.tap_stages) {
            const std::string pfx = stage_prefix("finp", n);
            add_train(pfx + ".embed.w", nn::ParamGroup::FInP,
                      rng.normal_tensor(ec, p2, embed_std));
            add_train(pfx + ".embed.b", nn::ParamGroup::FInP, Tensor(ec, 1));
            add_train(pfx + ".fm.w1", nn::ParamGroup::FInP,
                      rng.normal_tensor(ec, ec, mlp_std));
            add_train(pfx + ".fm.b1", nn::ParamGroup::FInP, Tensor(ec, 1));
            add_train(pfx + ".fm.w2", nn::ParamGroup::FInP,
                      rng.normal_tensor(ec, ec, mlp_std));
            add_train(pfx + ".fm.b2", nn::ParamGroup::FInP, Tensor(ec, 1));
        }
        add_train("finp.shared.fs.w1", nn::ParamGroup::FInP,
                  rng.normal_tensor(ec, ec, mlp_std));
        add_train("finp.shared.fs.b1", nn::ParamGroup::FInP, Tensor(ec, 1));
        add_train("finp.shared.fs.w2", nn::ParamGroup::FInP,
                  rng.normal_tensor(ec, ec, mlp_std));
        add_train("finp.shared.fs.b2", nn::ParamGroup::FInP, Tensor(ec, 1));
    }

    if (config_.enable_ffrp) {
        const HeadChannelSplit split = config_.head_split();
        const double proj_std = 1.0 / std::sqrt(static_cast<double>(cc));
        for (int n : config_.tap_stages) {
            const std::string pfx = stage_prefix("ffrp", n);
            add_train(pfx + ".high.wq", nn::ParamGroup::FFrP,
                      rng.normal_tensor(split.channels_high, cc, proj_std));
            add_train(pfx + ".high.wk", nn::ParamGroup::FFrP,
                      rng.normal_tensor(split.channels_high, cc, proj_std));
            add_train(pfx + ".high.wv", nn::ParamGroup::FFrP,
                      rng.normal_tensor(split.channels_high, cc, proj_std));
            if (split.heads_low > 0) {
                add_train(pfx + ".low.wq", nn::ParamGroup::FFrP,
                          rng.normal_tensor(split.channels_low, cc, proj_std));
                add_train(pfx + ".low.wk", nn::ParamGroup::FFrP,
                          rng.normal_tensor(split.channels_low, cc, proj_std));
                add_train(pfx + ".low.wv", nn::ParamGroup::FFrP,
                          rng.normal_tensor(split.channels_low, cc, proj_std));
            }
            // Gate starts as a benign pass-through: unit-norm all-ones filter
            // token, identity matching token.
            Tensor filt(cc, 1);
            filt.fill(1.0 / std::sqrt(static_cast<double>(cc)));
            add_train(pfx + ".filter_token", nn::ParamGroup::Tokens, filt);
            add_train(pfx + ".matching_token", nn::ParamGroup::Tokens, identity_tensor(cc));
        }
    }

    if (config_.enable_adapter) {
        const double v_std = 1.0 / std::sqrt(static_cast<double>(cc));
        for (int n = 1; n <= config_.n_blocks; ++n) {
            const std::string pfx = "adapter.block" + std::to_string(n);
            // U starts at zero so every adapter is the identity at init.
            add_train(pfx + ".u", nn::ParamGroup::Adapter, Tensor(cc, config_.adapter_rank));
            add_train(pfx + ".v", nn::ParamGroup::Adapter,
                      rng.normal_tensor(config_.adapter_rank, cc, v_std));
        }
    }

    const double dstd = 1.0 / std::sqrt(static_cast<double>(cc));
    for (int n : config_.tap_stages) {
        const std::string pfx = "decoder.tap" + std::to_string(n);
        add_train(pfx + ".proj.w", nn::ParamGroup::Decoder, rng.normal_tensor(dc, cc, dstd));
        add_train(pfx + ".proj.b", nn::ParamGroup::Decoder, Tensor(dc, 1));
    }
    const double cstd = 1.0 / std::sqrt(static_cast<double>(9 * dc));
    add_train("decoder.mix1.w", nn::ParamGroup::Decoder, rng.normal_tensor(dc, dc * 9, cstd));
    add_train("decoder.mix1.b", nn::ParamGroup::Decoder, Tensor(dc, 1));
    add_train("decoder.mix2.w", nn::ParamGroup::Decoder, rng.normal_tensor(dc, dc * 9, cstd));
    add_train("decoder.mix2.b", nn::ParamGroup::Decoder, Tensor(dc, 1));
    add_train("decoder.head.w", nn::ParamGroup::Decoder,
              rng.normal_tensor(2, dc, 1.0 / std::sqrt(static_cast<double>(dc))));
    add_train("decoder.head.b", nn::ParamGroup::Decoder, Tensor(2, 1));
}

ForwardBuild MfptNetwork::build(nn::Graph& g, const Image& image, bool with_grad) const {
    if (image.width != config_.input_width || image.height != config_.input_height) {
        throw DataError("network: input is " + std::to_string(image.width) + "x" +
                        std::to_string(image.height) + " but the model expects " +
                        std::to_string(config_.input_width) + "x" +
                        std::to_string(config_.input_height));
    }
    if (image.channels != 3) throw DataError("network: expected a 3-channel image");

    Binder P(store_, g, with_grad);
    const int gh = config_.grid_height();
    const int gw = config_.grid_width();

    // Frozen patch embedding (+ learned positions).
    const Tensor rgb = extract_patches(to_planes(image), config_.patch_size, 1.0 / 255.0);
    int x = g.add_bias(g.matmul(P("backbone.patch_embed.w"), g.constant(rgb)),
                       P("backbone.patch_embed.b"));
    x = g.add(x, P("backbone.pos_embed"));

    // One prompt image per input, shared by every tap stage.
    Tensor prompt_patches;
    if (config_.enable_finp) {
        const Tensor prompt =
            highpass_prompt(to_grayscale(image), config_.highpass_cutoff);
        prompt_patches = extract_patches(prompt, config_.patch_size);
    }

    const HeadChannelSplit split =
        config_.enable_ffrp ? config_.head_split() : HeadChannelSplit{};

    std::vector<int> tap_nodes;
    size_t next_tap = 0;
    for (int n = 1; n <= config_.n_blocks; ++n) {
        const bool is_tap =
            next_tap < config_.tap_stages.size() && config_.tap_stages[next_tap] == n;

        if (is_tap && config_.enable_finp) {
            const std::string pfx = stage_prefix("finp", n);
            const int xh = g.add_bias(
                g.matmul(P(pfx + ".embed.w"), g.constant(prompt_patches)),
                P(pfx + ".embed.b"));
            const int bridged = g.matmul(P("finp.bridge_in.w"), x);
            MlpNodes fm{P(pfx + ".fm.w1"), P(pfx + ".fm.b1"), P(pfx + ".fm.w2"),
                        P(pfx + ".fm.b2")};
            MlpNodes fs{P("finp.shared.fs.w1"), P("finp.shared.fs.b1"),
                        P("finp.shared.fs.w2"), P("finp.shared.fs.b2")};
            const int fused = build_finp_fuse(g, xh, bridged, fm, fs, true);
            x = g.add(g.matmul(P("finp.bridge_out.w"), fused), x);
        }

        // Frozen transformer block (pre-norm).
        {
            const std::string pfx = block_prefix(n);
            const int y = g.layernorm_cols(x, P(pfx + ".ln1.g"), P(pfx + ".ln1.b"));
            const int q = g.add_bias(g.matmul(P(pfx + ".attn.wq"), y), P(pfx + ".attn.bq"));
            const int k = g.add_bias(g.matmul(P(pfx + ".attn.wk"), y), P(pfx + ".attn.bk"));
            const int v = g.add_bias(g.matmul(P(pfx + ".attn.wv"), y), P(pfx + ".attn.bv"));
            const int att = build_attention(g, q, k, v, config_.backbone_heads);
            const int o = g.add_bias(g.matmul(P(pfx + ".attn.wo"), att), P(pfx + ".attn.bo"));
            x = g.add(x, o);
            const int y2 = g.layernorm_cols(x, P(pfx + ".ln2.g"), P(pfx + ".ln2.b"));
            MlpNodes mlp{P(pfx + ".mlp.w1"), P(pfx + ".mlp.b1"), P(pfx + ".mlp.w2"),
                         P(pfx + ".mlp.b2")};
            x = g.add(x, build_mlp2(g, y2, mlp, true));
        }

        if (config_.enable_adapter) {
            const std::string pfx = "adapter.block" + std::to_string(n);
            const int vx = g.matmul(P(pfx + ".v"), x);
            x = g.add(x, g.matmul(P(pfx + ".u"), vx));
        }

        if (is_tap) {
            int tap = x;
            if (config_.enable_ffrp) {
                const std::string pfx = stage_prefix("ffrp", n);
                FfrpNodes w;
                w.wq_high = P(pfx + ".high.wq");
                w.wk_high = P(pfx + ".high.wk");
                w.wv_high = P(pfx + ".high.wv");
                if (split.heads_low > 0) {
                    w.wq_low = P(pfx + ".low.wq");
                    w.wk_low = P(pfx + ".low.wk");
                    w.wv_low = P(pfx + ".low.wv");
                }
                w.filter_token = P(pfx + ".filter_token");
                w.matching_token = P(pfx + ".matching_token");
                tap = build_ffrp(g, x, w, split, config_.group_length);
            }
            tap_nodes.push_back(tap);
            ++next_tap;
        }
    }

    // Multi-scale pixel decoder. Every tap shares the patch grid here, so
    // the per-tap upsample to the finest grid is the identity.
    int acc = -1;
    for (size_t i = 0; i < tap_nodes.size(); ++i) {
        const std::string pfx = "decoder.tap" + std::to_string(config_.tap_stages[i]);
        const int proj =
            g.add_bias(g.matmul(P(pfx + ".proj.w"), tap_nodes[i]), P(pfx + ".proj.b"));
        acc = acc < 0 ? proj : g.add(acc, proj);
    }
    const int mix1 = g.gelu(g.conv3x3(acc, P("decoder.mix1.w"), P("decoder.mix1.b"), gh, gw));
    const int mix2 =
        g.gelu(g.conv3x3(mix1, P("decoder.mix2.w"), P("decoder.mix2.b"), gh, gw));
    const int head = g.add_bias(g.matmul(P("decoder.head.w"), mix2), P("decoder.head.b"));
    const int logits =
        g.bilinear_upsample(head, gh, gw, config_.input_height, config_.input_width);

    ForwardBuild out;
    out.logits = logits;
    out.bound = P.bound();
    return out;
}

Tensor MfptNetwork::forward(const Image& image) const {
    nn::Graph g;
    const ForwardBuild fb = build(g, image, false);
    return g.val(fb.logits);
}

data::ProbabilityMap MfptNetwork::predict(const Image& image) const {
    const Tensor logits = forward(image);
    data::ProbabilityMap map(config_.input_width, config_.input_height);
    const int n = config_.input_width * config_.input_height;
    for (int i = 0; i < n; ++i) {
        const double z = logits(1, i) - logits(0, i);
        map.values[i] = 1.0 / (1.0 + std::exp(-z));
    }
    return map;
}

std::vector<Tensor> MfptNetwork::backbone_taps(const Image& image) const {
    MfptConfig plain = config_;
    plain.enable_finp = false;
    plain.enable_ffrp = false;
    plain.enable_adapter = false;
    // Reuse this network's frozen weights through a temporary view network.
    MfptNetwork view(plain, 1);
    for (auto& p : view.store_.all()) {
        const nn::Param* src = store_.find(p.name);
        if (src) p.value = src->value;
    }
    nn::Graph g;
    Binder P(view.store_, g, false);
    const Tensor rgb = extract_patches(to_planes(image), plain.patch_size, 1.0 / 255.0);
    int x = g.add_bias(g.matmul(P("backbone.patch_embed.w"), g.constant(rgb)),
                       P("backbone.patch_embed.b"));
    x = g.add(x, P("backbone.pos_embed"));
    std::vector<Tensor> taps;
    size_t next_tap = 0;
    for (int n = 1; n <= plain.n_blocks; ++n) {
        const std::string pfx = block_prefix(n);
        const int y = g.layernorm_cols(x, P(pfx + ".ln1.g"), P(pfx + ".ln1.b"));
        const int q = g.add_bias(g.matmul(P(pfx + ".attn.wq"), y), P(pfx + ".attn.bq"));
        const int k = g.add_bias(g.matmul(P(pfx + ".attn.wk"), y), P(pfx + ".attn.bk"));
        const int v = g.add_bias(g.matmul(P(pfx + ".attn.wv"), y), P(pfx + ".attn.bv"));
        const int att = build_attention(g, q, k, v, plain.backbone_heads);
        const int o = g.add_bias(g.matmul(P(pfx + ".attn.wo"), att), P(pfx + ".attn.bo"));
        x = g.add(x, o);
        const int y2 = g.layernorm_cols(x, P(pfx + ".ln2.g"), P(pfx + ".ln2.b"));
        MlpNodes mlp{P(pfx + ".mlp.w1"), P(pfx + ".mlp.b1"), P(pfx + ".mlp.w2"),
                     P(pfx + ".mlp.b2")};
        x = g.add(x, build_mlp2(g, y2, mlp, true));
        if (next_tap < plain.tap_stages.size() && plain.tap_stages[next_tap] == n) {
            taps.push_back(g.val(x));
            ++next_tap;
        }
    }
    return taps;
}

Tensor MfptNetwork::decode_taps(const std::vector<Tensor>& taps) const {
    if (taps.size() != config_.tap_stages.size()) {
        throw UsageError("decoder: expected " + std::to_string(config_.tap_stages.size()) +
                         " tap features");
    }
    nn::Graph g;
    Binder P(store_, g, false);
    const int gh = config_.grid_height();
    const int gw = config_.grid_width();
    int acc = -1;
    for (size_t i = 0; i < taps.size(); ++i) {
        const std::string pfx = "decoder.tap" + std::to_string(config_.tap_stages[i]);
        const int proj = g.add_bias(
            g.matmul(P(pfx + ".proj.w"), g.constant(taps[i])), P(pfx + ".proj.b"));
        acc = acc < 0 ? proj : g.add(acc, proj);
    }
    const int mix1 = g.gelu(g.conv3x3(acc, P("decoder.mix1.w"), P("decoder.mix1.b"), gh, gw));
    const int mix2 =
        g.gelu(g.conv3x3(mix1, P("decoder.mix2.w"), P("decoder.mix2.b"), gh, gw));
    const int head = g.add_bias(g.matmul(P("decoder.head.w"), mix2), P("decoder.head.b"));
    const int logits =
        g.bilinear_upsample(head, gh, gw, config_.input_height, config_.input_width);
    return g.val(logits);
}

ParameterAccounting MfptNetwork::accounting() const {
    ParameterAccounting a;
    a.total = store_.total_elements();
    a.trainable = store_.trainable_elements();
    a.ratio = a.total == 0 ? 0.0 : static_cast<double>(a.trainable) / a.total;
    return a;
}

void MfptNetwork::save_checkpoint(const std::string& path) const {
    nn::save_archive(path, config_.to_json(), store_);
}

MfptNetwork MfptNetwork::load_checkpoint(const std::string& path) {
    nn::LoadedArchive archive = nn::load_archive(path);
    MfptNetwork net(MfptConfig::from_json(archive.config_json));
    size_t applied = 0;
    for (auto& [name, tensor] : archive.arrays) {
        nn::Param* p = net.store_.find(name);
        if (!p) throw DataError("checkpoint: unknown parameter '" + name + "'");
        if (!p->value.same_shape(tensor)) {
            throw DataError("checkpoint: shape mismatch for '" + name + "'");
        }
        p->value = std::move(tensor);
        ++applied;
    }
    if (applied != net.store_.count()) {
        throw DataError("checkpoint: archive is missing parameters (" +
                        std::to_string(applied) + " of " +
                        std::to_string(net.store_.count()) + ")");
    }
    return net;
}

size_t MfptNetwork::import_weights(const std::string& path) {
    nn::LoadedArchive archive = nn::load_archive(path);
    size_t applied = 0;
    for (auto& [name, tensor] : archive.arrays) {
        nn::Param* p = store_.find(name);
        if (!p) continue;  // archives may carry extra arrays
        if (!p->value.same_shape(tensor)) {
            throw DataError("import: shape mismatch for '" + name + "'");
        }
        p->value = std::move(tensor);
        ++applied;
    }
    if (applied == 0) throw DataError("import: no matching parameter names in '" + path + "'");
    return applied;
}

}  // namespace mfpt::model
