#include "mfpt/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "mfpt/core/error.hpp"
#include "mfpt/eval/metrics.hpp"
#include "mfpt/train/optimizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mfpt::train {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw UsageError("train: learning_rate must be >= 0");
    if (batch_size < 1) throw UsageError("train: batch_size must be >= 1");
    if (max_iterations < 0) throw UsageError("train: max_iterations must be >= 0");
    if (eval_interval < 1) throw UsageError("train: eval_interval must be >= 1");
    if (!(eval_threshold >= 0.0 && eval_threshold <= 1.0)) {
        throw UsageError("train: eval_threshold must be in [0, 1]");
    }
    if (loss_weights.lambda_dice < 0.0 || loss_weights.lambda_ce < 0.0) {
        throw UsageError("train: loss weights must be nonnegative");
    }
}

std::string TrainConfig::to_json() const {
    json j;
    j["learning_rate"] = learning_rate;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["weight_decay"] = weight_decay;
    j["batch_size"] = batch_size;
    j["max_iterations"] = max_iterations;
    j["seed"] = seed;
    j["eval_interval"] = eval_interval;
    j["eval_threshold"] = eval_threshold;
    j["lambda_dice"] = loss_weights.lambda_dice;
    j["lambda_ce"] = loss_weights.lambda_ce;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("train config: JSON parse error: ") + e.what());
    }
    TrainConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("learning_rate", c.learning_rate);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("weight_decay", c.weight_decay);
    get("batch_size", c.batch_size);
    get("max_iterations", c.max_iterations);
    get("seed", c.seed);
    get("eval_interval", c.eval_interval);
    get("eval_threshold", c.eval_threshold);
    get("lambda_dice", c.loss_weights.lambda_dice);
    get("lambda_ce", c.loss_weights.lambda_ce);
    c.validate();
    return c;
}

int select_best_checkpoint(const std::vector<std::pair<int, double>>& history) {
    if (history.empty()) throw UsageError("select_best_checkpoint: empty trace");
    int best_iter = history[0].first;
    double best = history[0].second;
    for (const auto& [iter, pf1] : history) {
        if (pf1 > best) {
            best = pf1;
            best_iter = iter;
        }
    }
    return best_iter;
}

namespace {

struct CachedSample {
    Image image;           // resized to model input
    data::PixelMask mask;  // resized nearest-neighbor
};

CachedSample load_sample(const data::DatasetManifest& manifest, const data::ImageSample& s,
                         int width, int height) {
    CachedSample out;
    Image img = imageio::load(manifest.resolve(s.image_path));
    out.image = resize_image_bilinear(img, width, height);
    data::PixelMask native = manifest.ground_truth(s);
    if (native.width == width && native.height == height) {
        out.mask = std::move(native);
    } else {
        Tensor grid(native.height, native.width);
        for (size_t i = 0; i < native.values.size(); ++i) grid[i] = native.values[i];
        const Tensor resized = resize_nearest(grid, height, width);
        out.mask = data::PixelMask(width, height);
        for (size_t i = 0; i < out.mask.values.size(); ++i) {
            out.mask.values[i] = resized[i] >= 0.5 ? 1 : 0;
        }
    }
    return out;
}

}  // namespace

double mean_split_pf1(const model::MfptNetwork& net, const data::DatasetManifest& manifest,
                      data::Split split, double threshold) {
    const auto& cfg = net.config();
    double sum = 0.0;
    size_t n = 0;
    for (const auto& s : manifest.samples) {
        if (s.split != split) continue;
        const CachedSample cs = load_sample(manifest, s, cfg.input_width, cfg.input_height);
        const data::ProbabilityMap prob = net.predict(cs.image);
        const auto m = eval::metrics(eval::confusion(eval::binarize(prob, threshold), cs.mask));
        sum += m.pf1;
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

TrainResult train(model::MfptNetwork& net, const data::DatasetManifest& manifest,
                  const TrainConfig& config, const std::string& checkpoint_dir) {
    config.validate();
    const auto& mcfg = net.config();

    std::vector<const data::ImageSample*> train_samples;
    bool has_val = false;
    for (const auto& s : manifest.samples) {
        if (s.split == data::Split::Train) train_samples.push_back(&s);
        if (s.split == data::Split::Val) has_val = true;
    }
    if (train_samples.empty()) throw DataError("train: the manifest has no train split");
    if (!has_val) throw DataError("train: the manifest has no val split");

    // Desk-scale corpora fit in memory; cache the resized samples once.
    std::vector<CachedSample> cache;
    cache.reserve(train_samples.size());
    for (const auto* s : train_samples) {
        cache.push_back(load_sample(manifest, *s, mcfg.input_width, mcfg.input_height));
    }

    const bool write_checkpoints = !checkpoint_dir.empty();
    if (write_checkpoints) fs::create_directories(checkpoint_dir);
    const std::string best_path =
        write_checkpoints ? (fs::path(checkpoint_dir) / "best.ckpt").string() : "";
    const std::string final_path =
        write_checkpoints ? (fs::path(checkpoint_dir) / "final.ckpt").string() : "";
    if (write_checkpoints) net.save_checkpoint(best_path);  // initial state fallback

    TrainResult result;
    AdamW optimizer(config.learning_rate, config.beta1, config.beta2, config.weight_decay);

    std::mt19937_64 shuffle_rng(config.seed);
    // Explicit Fisher-Yates keeps the batch order independent of the standard
    // library's shuffle implementation.
    auto reshuffle = [&shuffle_rng](std::vector<size_t>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng() % i);
            std::swap(v[i - 1], v[j]);
        }
    };
    std::vector<size_t> order(cache.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // forces a shuffle before the first batch

    const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
    Tensor seed_grad(1, 1);
    seed_grad(0, 0) = inv_batch;

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        net.params().zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor >= order.size()) {
                reshuffle(order);
                cursor = 0;
            }
            const CachedSample& sample = cache[order[cursor++]];

            nn::Graph g;
            const model::ForwardBuild fb = net.build(g, sample.image, true);
            const int loss = build_total_loss(g, fb.logits, sample.mask,
                                              config.loss_weights);
            const double loss_value = g.val(loss)(0, 0);
            if (!std::isfinite(loss_value)) {
                throw NumericError("train: non-finite loss at iteration " +
                                   std::to_string(iter));
            }
            batch_loss += loss_value * inv_batch;
            g.backward(loss, seed_grad);
            for (const auto& [param_idx, node] : fb.bound) {
                nn::Param& p = net.params().at(param_idx);
                if (!p.trainable || !g.needs_grad(node)) continue;
                const Tensor& gn = g.grad(node);
                for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += gn[i];
            }
        }
        optimizer.step(net.params());

        TraceRow row;
        row.iteration = iter;
        row.train_loss = batch_loss;
        if (iter % config.eval_interval == 0) {
            const double pf1 = mean_split_pf1(net, manifest, data::Split::Val,
                                              config.eval_threshold);
            row.val_pf1 = pf1;
            result.val_history.emplace_back(iter, pf1);
            if (pf1 > result.best_val_pf1) {
                result.best_val_pf1 = pf1;
                result.best_iteration = iter;
                if (write_checkpoints) net.save_checkpoint(best_path);
            }
        }
        result.trace.push_back(row);
    }

    if (write_checkpoints) net.save_checkpoint(final_path);
    return result;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::string out = "iteration,train_loss,val_pf1\n";
    char buf[128];
    for (const auto& row : trace) {
        if (row.val_pf1) {
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", row.iteration, row.train_loss,
                          *row.val_pf1);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,%.9g,\n", row.iteration, row.train_loss);
        }
        out += buf;
    }
    return out;
}

}  // namespace mfpt::train
