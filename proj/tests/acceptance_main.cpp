// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero when any fail.
//
// Usage: mfpt_acceptance <path-to-mfpt-cli> [scratch-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfpt/core/error.hpp"
#include "mfpt/core/image.hpp"
#include "mfpt/data/manifest.hpp"
#include "mfpt/eval/degrade.hpp"
#include "mfpt/eval/metrics.hpp"
#include "mfpt/model/frequency.hpp"
#include "mfpt/model/network.hpp"
#include "mfpt/synth/synth.hpp"
#include "mfpt/train/loss.hpp"
#include "mfpt/train/trainer.hpp"
#include "mfpt/triage/triage.hpp"

namespace fs = std::filesystem;
using namespace mfpt;

namespace {

std::string g_cli;
fs::path g_scratch;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

Image random_image(std::mt19937_64& rng, int w, int h) {
    Image img(w, h, 3);
    for (auto& v : img.data) v = static_cast<uint8_t>(rng() % 256);
    return img;
}

data::PixelMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
    data::PixelMask m(w, h);
    for (auto& v : m.values) v = (double(rng() % 1000) / 1000.0) < density ? 1 : 0;
    return m;
}

// --------------------------------------------------------------------------
// Criteria
// --------------------------------------------------------------------------

void metric_oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    for (int trial = 0; trial < 500; ++trial) {
        const data::PixelMask pred = random_mask(rng, 32, 32, double(rng() % 100) / 100.0);
        const data::PixelMask gt = random_mask(rng, 32, 32, double(rng() % 100) / 100.0);

        // Brute-force confusion-count oracle, separate code path.
        uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (size_t i = 0; i < pred.values.size(); ++i) {
            if (pred.values[i] && gt.values[i]) ++tp;
            else if (pred.values[i]) ++fp;
            else if (gt.values[i]) ++fn;
            else ++tn;
        }
        double opf1, oiou;
        if (tp + fp + fn == 0) {
            opf1 = oiou = 1.0;
        } else {
            opf1 = 2.0 * double(tp) / double(2 * tp + fp + fn);
            oiou = double(tp) / double(tp + fp + fn);
        }
        const double opacc = double(tp + tn) / double(pred.values.size());

        const auto got = eval::metrics(eval::confusion(pred, gt));
        require(std::fabs(got.pf1 - opf1) <= 1e-12, "pF1 deviates from the oracle");
        require(std::fabs(got.iou - oiou) <= 1e-12, "IoU deviates from the oracle");
        require(std::fabs(got.pacc - opacc) <= 1e-12, "pACC deviates from the oracle");
        require(std::fabs(got.pf1 - 2.0 * got.iou / (1.0 + got.iou)) <= 1e-12,
                "pF1 != 2*IoU/(1+IoU)");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require(secs < 10.0, "metric oracle run exceeded 10 s");
}

void metric_hand_fixture() {
    eval::ConfusionCounts c;
    c.tp = 2;
    c.fp = 1;
    c.fn = 1;
    c.tn = 12;
    const auto m = eval::metrics(c);
    require(std::fabs(m.pf1 - 2.0 / 3.0) < 1e-12, "pF1 != 0.6667");
    require(m.iou == 0.5, "IoU != 0.5");
    require(m.pacc == 0.875, "pACC != 0.875");
}

void highpass_invariant() {
    std::mt19937_64 rng(1002);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 24 + int(rng() % 3) * 8;
        const int h = 24 + int(rng() % 3) * 8;
        Tensor grid(h, w);
        for (size_t i = 0; i < grid.size(); ++i) grid[i] = double(rng() % 256);
        const Tensor prompt = model::highpass_prompt(grid, 0.25);
        const auto energy = model::spectral_energy(prompt, 0.25);
        require(energy.total() > 0.0, "degenerate random image");
        require(energy.inside < 1e-9 * energy.total(),
                "spectral energy inside the cutoff disk");
    }
    Tensor constant(32, 32);
    constant.fill(201.0);
    require(model::highpass_prompt(constant, 0.25).abs_max() < 1e-6,
            "constant image prompt not ~0");
}

void frozen_gradient_contract() {
    const fs::path dir = g_scratch / "frozen";
    fs::remove_all(dir);
    synth::SynthOptions opts;
    opts.count = 6;
    opts.width = 64;
    opts.height = 64;
    opts.seed = 5;
    opts.authentic_frac = 0.0;
    const auto manifest = synth::generate_dataset(dir.string(), opts);

    model::MfptConfig cfg;  // desk-scale defaults
    model::MfptNetwork net(cfg, 3);
    std::vector<Tensor> backbone_before;
    for (const auto& p : net.params().all()) {
        if (p.group == nn::ParamGroup::Backbone) backbone_before.push_back(p.value);
    }

    train::TrainConfig tc;
    tc.max_iterations = 1;
    tc.batch_size = 2;
    tc.eval_interval = 10;
    mfpt::train::train(net, manifest, tc);

    size_t idx = 0;
    for (const auto& p : net.params().all()) {
        if (p.group != nn::ParamGroup::Backbone) continue;
        const Tensor& before = backbone_before[idx++];
        for (size_t k = 0; k < p.value.size(); ++k) {
            require(p.value[k] == before[k], "backbone parameter changed: " + p.name);
        }
        require(p.grad.abs_max() == 0.0, "backbone parameter has gradient: " + p.name);
    }

    // Trainable sets checked separately: prompt MLPs, patch embeds, branch
    // projections, frequency tokens, adapters, decoder.
    std::map<std::string, double> set_max;
    for (const auto& p : net.params().all()) {
        if (!p.trainable) continue;
        const double g = p.grad.abs_max();
        auto bump = [&](const char* key) {
            set_max[key] = std::max(set_max[key], g);
        };
        if (p.name.find(".embed.") != std::string::npos) bump("patch embeds");
        else if (p.name.rfind("finp.", 0) == 0) bump("prompt MLPs");
        if (p.name.find(".high.") != std::string::npos ||
            p.name.find(".low.") != std::string::npos) {
            bump("branch projections");
        }
        if (p.group == nn::ParamGroup::Tokens) bump("frequency tokens");
        if (p.group == nn::ParamGroup::Adapter) bump("adapters");
        if (p.group == nn::ParamGroup::Decoder) bump("decoder");
    }
    for (const char* key : {"prompt MLPs", "patch embeds", "branch projections",
                            "frequency tokens", "adapters", "decoder"}) {
        require(set_max[key] > 0.0, std::string("no gradient signal in ") + key);
    }
}

void ffrp_gradient_check() {
    const int channels = 4, length = 6, group_length = 2;
    const auto split = model::split_heads_channels(4, channels, 0.75);
    std::mt19937_64 rng(1003);
    auto rand_t = [&](int r, int c) {
        Tensor t(r, c);
        for (size_t i = 0; i < t.size(); ++i) t[i] = (double(rng() % 2000) / 1000.0) - 1.0;
        return t;
    };
    std::vector<Tensor> inputs;
    inputs.push_back(rand_t(channels, length));
    inputs.push_back(rand_t(split.channels_high, channels));
    inputs.push_back(rand_t(split.channels_high, channels));
    inputs.push_back(rand_t(split.channels_high, channels));
    inputs.push_back(rand_t(split.channels_low, channels));
    inputs.push_back(rand_t(split.channels_low, channels));
    inputs.push_back(rand_t(split.channels_low, channels));
    inputs.push_back(rand_t(channels, 1));
    inputs.push_back(rand_t(channels, channels));
    const Tensor weighting = rand_t(channels, length);

    auto objective = [&](const std::vector<Tensor>& in, std::vector<double>* grads) {
        nn::Graph g;
        std::vector<int> ids;
        for (const auto& t : in) ids.push_back(g.leaf(t, grads != nullptr));
        model::FfrpNodes nodes;
        nodes.wq_high = ids[1];
        nodes.wk_high = ids[2];
        nodes.wv_high = ids[3];
        nodes.wq_low = ids[4];
        nodes.wk_low = ids[5];
        nodes.wv_low = ids[6];
        nodes.filter_token = ids[7];
        nodes.matching_token = ids[8];
        const int out = model::build_ffrp(g, ids[0], nodes, split, group_length);
        const int loss = g.sum_all(g.mul(out, g.constant(weighting)));
        const double value = g.val(loss)(0, 0);
        if (grads) {
            g.backward(loss);
            for (int id : ids) {
                const Tensor& gt = g.grad(id);
                for (size_t i = 0; i < gt.size(); ++i) grads->push_back(gt[i]);
            }
        }
        return value;
    };

    std::vector<double> analytic;
    objective(inputs, &analytic);

    const double step = 1e-6;
    double worst = 0.0;
    size_t flat = 0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        for (size_t i = 0; i < inputs[k].size(); ++i, ++flat) {
            std::vector<Tensor> plus = inputs, minus = inputs;
            plus[k][i] += step;
            minus[k][i] -= step;
            const double numeric =
                (objective(plus, nullptr) - objective(minus, nullptr)) / (2.0 * step);
            const double denom =
                std::max({std::fabs(numeric), std::fabs(analytic[flat]), 1e-8});
            worst = std::max(worst, std::fabs(numeric - analytic[flat]) / denom);
        }
    }
    require(worst <= 1e-4,
            "max relative gradient error " + std::to_string(worst) + " > 1e-4");
}

void head_channel_split() {
    const auto a = model::split_heads_channels(8, 64, 0.75);
    require(a.heads_high == 6 && a.heads_low == 2, "(8, r=0.75) != (6, 2)");
    const auto b = model::split_heads_channels(8, 64, 1.0);
    require(b.heads_high == 8 && b.heads_low == 0, "(8, r=1.0) != (8, 0)");
    require(b.channels_low == 0, "r=1.0 left channels in the low branch");
    bool threw = false;
    try {
        model::split_heads_channels(8, 63, 0.75);  // 15 channels over 2 heads
    } catch (const UsageError&) {
        threw = true;
    }
    require(threw, "invalid channel split did not raise a construction error");
}

void overfit_sanity() {
    const fs::path dir = g_scratch / "overfit";
    fs::remove_all(dir);
    synth::SynthOptions opts;
    opts.count = 24;  // round-robin -> exactly 8 train samples
    opts.width = 64;
    opts.height = 64;
    opts.seed = 7;
    opts.area = 0.16;
    opts.authentic_frac = 0.0;
    const auto manifest = synth::generate_dataset(dir.string(), opts);
    size_t train_count = 0;
    for (const auto& s : manifest.samples) {
        if (s.split == data::Split::Train) ++train_count;
    }
    require(train_count == 8, "expected 8 training samples");

    model::MfptConfig cfg;  // desk scale: N=8, 64 channels, 64x64 inputs
    model::MfptNetwork net(cfg, 1);
    train::TrainConfig tc;  // defaults: AdamW, lr 1e-4, batch 8
    tc.max_iterations = 200;
    tc.eval_interval = 100;

    const auto start = std::chrono::steady_clock::now();
    const auto result = mfpt::train::train(net, manifest, tc);
    const double pf1 =
        train::mean_split_pf1(net, manifest, data::Split::Train, 0.5);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require(secs < 600.0, "training exceeded 10 minutes");
    require(pf1 >= 0.95, "train pF1 " + std::to_string(pf1) + " < 0.95");

    const std::string trace = train::trace_csv(result.trace);
    require(std::count(trace.begin(), trace.end(), '\n') == 201,
            "trace does not carry one loss row per iteration");
}

void gate_identity() {
    // Identity matching token and gated tokens parallel to the filter token
    // must reproduce the input features exactly.
    std::mt19937_64 rng(1004);
    const int channels = 6, length = 5;
    Tensor t(channels, 1);
    for (int r = 0; r < channels; ++r) t(r, 0) = 0.4 + 0.1 * r;
    Tensor x_hlr(channels, length);
    for (int c = 0; c < length; ++c) {
        const double scale = 0.5 + 0.5 * c;  // positive multiples of the token
        for (int r = 0; r < channels; ++r) x_hlr(r, c) = scale * t(r, 0);
    }
    Tensor eye(channels, channels);
    for (int i = 0; i < channels; ++i) eye(i, i) = 1.0;
    Tensor x_r(channels, length);
    for (size_t i = 0; i < x_r.size(); ++i) x_r[i] = (double(rng() % 2000) / 500.0) - 2.0;

    nn::Graph g;
    const int sim = g.cos_sim_cols(g.constant(x_hlr), g.constant(t));
    const int out = g.matmul(g.constant(eye), g.scale_cols(g.constant(x_r), sim));
    for (int c = 0; c < length; ++c) {
        require(std::fabs(g.val(sim)(0, c) - 1.0) <= 1e-12, "cosine of parallel tokens != 1");
        for (int r = 0; r < channels; ++r) {
            require(std::fabs(g.val(out)(r, c) - x_r(r, c)) <= 1e-9,
                    "gated output deviates from the input features");
        }
    }
}

void triage_conformance() {
    const triage::TriagePolicy policy;
    using triage::TriageOutcome;
    const std::pair<double, TriageOutcome> cases[] = {
        {0.6, TriageOutcome::Accept},
        {0.5, TriageOutcome::Review},
        {0.4, TriageOutcome::Review},
        {0.3, TriageOutcome::Review},
        {0.2, TriageOutcome::Discard},
    };
    for (const auto& [mean, want] : cases) {
        require(triage::triage_decide(mean, policy) == want,
                "mean " + std::to_string(mean) + " routed incorrectly");
    }

    auto ratio_mask = [](double ratio) {
        data::PixelMask m(100, 10);
        const size_t ones = static_cast<size_t>(ratio * 1000.0 + 0.5);
        for (size_t i = 0; i < ones; ++i) m.values[i] = 1;
        return m;
    };
    const auto big = triage::area_gate(ratio_mask(0.995), policy);
    require(!big.keep && big.failure == triage::FailureClass::UncontrolledGeneration,
            "0.995 not dropped as uncontrolled generation");
    const auto tiny = triage::area_gate(ratio_mask(0.005), policy);
    require(!tiny.keep && tiny.failure == triage::FailureClass::NoChange,
            "0.005 not dropped as no-change");
    const auto mid = triage::area_gate(ratio_mask(0.12), policy);
    require(mid.keep && mid.failure == triage::FailureClass::None, "0.12 not kept");
}

void leakage_gate() {
    data::DatasetManifest manifest;
    auto add = [&](const std::string& id, const std::string& src, data::Split split) {
        data::ImageSample s;
        s.id = id;
        s.source_id = src;
        s.role = data::Role::Authentic;
        s.width = 8;
        s.height = 8;
        s.image_path = id + ".png";
        s.split = split;
        manifest.samples.push_back(s);
    };
    add("clean_a", "steady", data::Split::Train);
    add("clean_b", "steady", data::Split::Train);
    add("leak_orig", "leaky", data::Split::Train);
    add("leak_edit", "leaky", data::Split::Val);
    const auto violations = data::check_split_leakage(manifest);
    require(violations.size() == 1, "expected exactly one violation");
    require(violations[0].source_id == "leaky", "wrong violating source");

    for (unsigned long seed : {0ul, 3ul, 9ul, 17ul, 40ul}) {
        const fs::path dir = g_scratch / ("leak" + std::to_string(seed));
        fs::remove_all(dir);
        synth::SynthOptions opts;
        opts.count = 10 + int(seed % 5);
        opts.width = 32;
        opts.height = 32;
        opts.seed = seed;
        opts.authentic_frac = (seed % 2 == 0) ? 0.5 : 0.3;
        const auto m = synth::generate_dataset(dir.string(), opts);
        require(data::check_split_leakage(m).empty(),
                "synthetic manifest leaked at seed " + std::to_string(seed));
    }
}

void degradation_harness() {
    std::mt19937_64 rng(1005);
    const Image img = random_image(rng, 48, 48);
    const Image same = eval::degrade(img, eval::DegradationKind::GaussianBlur, 0);
    require(same.data == img.data, "blur kernel 0 is not the identity");

    double prev = 1e300;
    for (int k : {3, 7, 11, 15, 19}) {
        const Image blurred = eval::gaussian_blur(img, k);
        const auto energy = model::spectral_energy(model::to_grayscale(blurred), 0.25);
        require(energy.outside < prev, "high-band energy not strictly decreasing at k=" +
                                           std::to_string(k));
        prev = energy.outside;
    }

    const fs::path dir = g_scratch / "sweep";
    fs::remove_all(dir);
    synth::SynthOptions opts;
    opts.count = 6;
    opts.width = 64;
    opts.height = 64;
    opts.seed = 11;
    opts.authentic_frac = 0.0;
    const auto manifest = synth::generate_dataset(dir.string(), opts);
    model::MfptConfig cfg;
    model::MfptNetwork net(cfg, 2);
    eval::DegradationSpec spec{eval::DegradationKind::Jpeg, {100, 90, 80, 70, 60, 50}};
    const auto rows = eval::robustness_sweep(net, manifest, "all", spec, 0.5);
    require(rows.size() == 6, "expected 6 rows");
    const std::string csv = eval::robustness_csv(rows);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    require(line == "level,IoU,pF1", "csv header mismatch");
    const int order[6] = {100, 90, 80, 70, 60, 50};
    for (int i = 0; i < 6; ++i) {
        require(static_cast<bool>(std::getline(lines, line)), "missing csv row");
        require(line.rfind(std::to_string(order[i]) + ",", 0) == 0,
                "row " + std::to_string(i) + " out of order");
    }
    require(!std::getline(lines, line), "extra csv row");
}

void loss_identities() {
    std::mt19937_64 rng(1006);
    data::PixelMask mask(64, 64);
    for (int i = 0; i < 160; ++i) mask.values[i] = 1;
    Tensor logits(2, 64 * 64);
    for (size_t i = 0; i < logits.size(); ++i) {
        logits[i] = (double(rng() % 2000) / 500.0) - 2.0;
    }

    const double dice = train::dice_loss(logits, mask);
    const double bce = train::bce_loss(logits, mask);
    require(std::fabs(train::total_loss(logits, mask, {1.0, 0.0}) - dice) <= 1e-12,
            "weights (1,0) do not recover dice");
    require(std::fabs(train::total_loss(logits, mask, {0.0, 1.0}) - bce) <= 1e-12,
            "weights (0,1) do not recover bce");

    const Tensor uniform(2, 64 * 64);  // both logits zero -> p = 0.5
    require(std::fabs(train::bce_loss(uniform, mask) - std::log(2.0)) <= 1e-9,
            "uniform-0.5 BCE != ln 2");

    Tensor hard(2, 64 * 64);
    for (size_t i = 0; i < mask.pixel_count(); ++i) {
        const double z = mask.values[i] ? 40.0 : -40.0;
        hard(0, i) = -z / 2;
        hard(1, i) = z / 2;
    }
    require(train::dice_loss(hard, mask) < 1e-3, "hard-perfect dice >= 1e-3");
    require(train::bce_loss(hard, mask) < 1e-6, "hard-perfect BCE >= 1e-6");
}

void cli_determinism() {
    const fs::path base = g_scratch / "determinism";
    fs::remove_all(base);
    fs::create_directories(base);

    // synth twice.
    const fs::path a = base / "a", b = base / "b";
    require(run_cli("synth --out " + a.string() + " --n 6 --size 32x32 --seed 21") == 0,
            "synth run 1 failed");
    require(run_cli("synth --out " + b.string() + " --n 6 --size 32x32 --seed 21") == 0,
            "synth run 2 failed");
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        require(read_file(entry.path()) == read_file(b / rel),
                "synth output differs: " + rel.string());
    }

    // train twice on the same data and seed.
    const std::string tiny =
        "--set model.n_blocks=2 --set model.tap_stages=[1,2] --set model.input_width=32 "
        "--set model.input_height=32 --set model.backbone_channels=16 "
        "--set model.backbone_heads=2 --set model.embed_channels=16 "
        "--set model.head_count=4 --set model.group_length=4 --set model.adapter_rank=2 "
        "--set model.decoder_channels=4 --set train.max_iterations=3 "
        "--set train.eval_interval=2";
    const std::string manifest = (a / "manifest.jsonl").string();
    const fs::path r1 = base / "r1", r2 = base / "r2";
    require(run_cli("train --manifest " + manifest + " --out " + r1.string() + " " + tiny +
                    " --seed 4") == 0,
            "train run 1 failed");
    require(run_cli("train --manifest " + manifest + " --out " + r2.string() + " " + tiny +
                    " --seed 4") == 0,
            "train run 2 failed");
    for (const char* name : {"best.ckpt", "final.ckpt", "trace.csv"}) {
        require(read_file(r1 / name) == read_file(r2 / name),
                std::string("train output differs: ") + name);
    }

    // eval twice.
    const fs::path e1 = base / "e1.json", e2 = base / "e2.json";
    const std::string ckpt = (r1 / "final.ckpt").string();
    require(run_cli("eval --checkpoint " + ckpt + " --manifest " + manifest +
                    " --subset test --out " + e1.string()) == 0,
            "eval run 1 failed");
    require(run_cli("eval --checkpoint " + ckpt + " --manifest " + manifest +
                    " --subset test --out " + e2.string()) == 0,
            "eval run 2 failed");
    require(read_file(e1) == read_file(e2), "eval output differs");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: mfpt_acceptance <mfpt-cli-path> [scratch-dir]\n";
        return 2;
    }
    g_cli = argv[1];
    g_scratch = argc > 2 ? fs::path(argv[2])
                         : fs::temp_directory_path() / "mfpt_acceptance";
    fs::create_directories(g_scratch);

    const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
        {"metric oracle equivalence (500 pairs, 1e-12)", metric_oracle_equivalence},
        {"hand-derived metric fixture (tp=2 fp=1 fn=1 tn=12)", metric_hand_fixture},
        {"high-pass spectral invariant (100 images + constant)", highpass_invariant},
        {"frozen-gradient contract (backbone fixed, groups live)",
         frozen_gradient_contract},
        {"feature-prompter gradient check (<= 1e-4)", ffrp_gradient_check},
        {"head/channel split rules", head_channel_split},
        {"overfit sanity (8 samples, 200 iters, pF1 >= 0.95)", overfit_sanity},
        {"cosine-gate identity (parallel tokens, 1e-9)", gate_identity},
        {"triage conformance (decision and area rules)", triage_conformance},
        {"leakage gate (planted violation + clean generator)", leakage_gate},
        {"degradation harness (blur identity, spectra, 6-row sweep)",
         degradation_harness},
        {"loss identities (weights, ln 2, hard-perfect)", loss_identities},
        {"CLI determinism (synth/train/eval reruns)", cli_determinism},
    };

    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        try {
            fn();
            std::cout << "PASS  " << name << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "FAIL  " << name << " -- " << e.what() << "\n";
        }
        std::cout.flush();
    }
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all " << criteria.size() << " criteria passed\n";
    return 0;
}
