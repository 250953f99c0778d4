// Command-line front end: dataset synthesis, training, evaluation,
// degradation sweeps, label triage, and manifest statistics.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mfpt/core/error.hpp"
#include "mfpt/core/parallel.hpp"
#include "mfpt/data/manifest.hpp"
#include "mfpt/eval/degrade.hpp"
#include "mfpt/eval/metrics.hpp"
#include "mfpt/model/network.hpp"
#include "mfpt/synth/synth.hpp"
#include "mfpt/train/trainer.hpp"
#include "mfpt/triage/triage.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mfpt;

namespace {

// ---------------------------------------------------------------------------
// Run configuration: one JSON file with model/train/triage/paths sections,
// plus repeatable dotted-key overrides (--set train.learning_rate=0.001).
// ---------------------------------------------------------------------------

const std::set<std::string> kModelKeys = {
    "n_blocks", "tap_stages", "patch_size", "backbone_channels", "backbone_heads",
    "backbone_mlp_ratio", "backbone_seed", "embed_channels", "head_count", "freq_ratio",
    "group_length", "highpass_cutoff", "adapter_rank", "decoder_channels", "input_width",
    "input_height", "enable_finp", "enable_ffrp", "enable_adapter"};

const std::set<std::string> kTrainKeys = {
    "learning_rate", "beta1", "beta2", "weight_decay", "batch_size", "max_iterations",
    "seed", "eval_interval", "eval_threshold", "lambda_dice", "lambda_ce"};

const std::set<std::string> kTriageKeys = {"accept_above", "review_low", "label_threshold",
                                           "area_min", "area_max"};

const std::set<std::string> kPathKeys = {"manifest", "out", "probmaps", "checkpoint",
                                         "backbone_weights"};

struct RunConfig {
    model::MfptConfig model;
    train::TrainConfig train;
    triage::TriagePolicy triage;
    std::map<std::string, std::string> paths;
};

json parse_override_value(const std::string& text) {
    // Numbers, booleans, arrays and quoted strings parse as JSON; anything
    // else is taken as a plain string.
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

void validate_section(const json& section, const std::set<std::string>& known,
                      const std::string& name) {
    if (!section.is_object()) {
        throw UsageError("config: section '" + name + "' must be an object");
    }
    for (auto it = section.begin(); it != section.end(); ++it) {
        if (!known.count(it.key())) {
            throw UsageError("config: unknown key '" + name + "." + it.key() + "'");
        }
    }
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw UsageError("config: cannot open '" + config_path + "'");
        try {
            in >> doc;
        } catch (const json::parse_error& e) {
            throw UsageError("config: JSON parse error in '" + config_path +
                             "': " + e.what());
        }
    }
    if (!doc.is_object()) throw UsageError("config: top level must be a JSON object");

    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--set expects section.key=value, got '" + kv + "'");
        }
        const std::string key = kv.substr(0, eq);
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            throw UsageError("--set key must be dotted (section.key), got '" + key + "'");
        }
        doc[key.substr(0, dot)][key.substr(dot + 1)] = parse_override_value(kv.substr(eq + 1));
    }

    static const std::set<std::string> kSections = {"model", "train", "triage", "paths"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!kSections.count(it.key())) {
            throw UsageError("config: unknown section '" + it.key() + "'");
        }
    }

    RunConfig rc;
    if (doc.contains("model")) {
        validate_section(doc["model"], kModelKeys, "model");
        rc.model = model::MfptConfig::from_json(doc["model"].dump());
    }
    if (doc.contains("train")) {
        validate_section(doc["train"], kTrainKeys, "train");
        rc.train = train::TrainConfig::from_json(doc["train"].dump());
    }
    if (doc.contains("triage")) {
        validate_section(doc["triage"], kTriageKeys, "triage");
        const json& t = doc["triage"];
        auto get = [&](const char* key, double& field) {
            if (t.contains(key)) field = t[key].get<double>();
        };
        get("accept_above", rc.triage.accept_above);
        get("review_low", rc.triage.review_low);
        get("label_threshold", rc.triage.label_threshold);
        get("area_min", rc.triage.area_min);
        get("area_max", rc.triage.area_max);
        rc.triage.validate();
    }
    if (doc.contains("paths")) {
        validate_section(doc["paths"], kPathKeys, "paths");
        for (auto it = doc["paths"].begin(); it != doc["paths"].end(); ++it) {
            rc.paths[it.key()] = it.value().get<std::string>();
        }
    }
    return rc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

std::string pick_path(const std::string& flag_value, const RunConfig& rc,
                      const std::string& key) {
    if (!flag_value.empty()) return flag_value;
    auto it = rc.paths.find(key);
    return it == rc.paths.end() ? std::string() : it->second;
}

// ---------------------------------------------------------------------------
// Subcommand state
// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string manifest_path;
    std::string out_path;
    std::string checkpoint_path;
    int workers = 1;
    double threshold = 0.5;
    std::string subset = "all";
    unsigned long seed = 0;
    bool seed_given = false;
};

data::DatasetManifest load_manifest_checked(const std::string& path,
                                            const data::LoadOptions& options) {
    if (path.empty()) throw UsageError("no manifest path given (--manifest or paths.manifest)");
    if (!fs::exists(path)) throw UsageError("manifest path '" + path + "' does not exist");
    return data::load_manifest(path, options);
}

int cmd_synth(const std::string& out_dir, int count, const std::string& size,
              unsigned long seed, double area, double authentic_frac) {
    synth::SynthOptions opts;
    opts.count = count;
    opts.seed = seed;
    opts.area = area;
    opts.authentic_frac = authentic_frac;
    const auto sep = size.find('x');
    if (sep == std::string::npos) throw UsageError("synth: --size must look like 64x64");
    try {
        opts.width = std::stoi(size.substr(0, sep));
        opts.height = std::stoi(size.substr(sep + 1));
    } catch (const std::exception&) {
        throw UsageError("synth: cannot parse --size '" + size + "'");
    }
    const auto manifest = synth::generate_dataset(out_dir, opts);
    std::cout << "wrote " << manifest.samples.size() << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& backbone_weights) {
    RunConfig rc = load_run_config(args.config_path, args.overrides);
    if (args.seed_given) rc.train.seed = args.seed;

    const std::string manifest_path = pick_path(args.manifest_path, rc, "manifest");
    const auto manifest = load_manifest_checked(manifest_path, {});

    std::string out_dir = pick_path(args.out_path, rc, "out");
    if (out_dir.empty()) out_dir = "train_out";
    fs::create_directories(out_dir);

    model::MfptNetwork net(rc.model, rc.train.seed);
    const std::string bw = backbone_weights.empty()
                               ? pick_path("", rc, "backbone_weights")
                               : backbone_weights;
    if (!bw.empty()) {
        const size_t applied = net.import_weights(bw);
        std::cout << "imported " << applied << " parameter arrays from " << bw << "\n";
    }

    const auto result = train::train(net, manifest, rc.train, out_dir);
    write_text((fs::path(out_dir) / "trace.csv").string(), train::trace_csv(result.trace));

    const auto acc = net.accounting();
    std::cout << "trained " << result.trace.size() << " iterations; trainable "
              << acc.trainable << "/" << acc.total << " parameters\n";
    if (!result.val_history.empty()) {
        std::cout << "best checkpoint at iteration "
                  << train::select_best_checkpoint(result.val_history) << " (val pF1 "
                  << result.best_val_pf1 << ")\n";
    }
    std::cout << "checkpoints in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    RunConfig rc = load_run_config(args.config_path, args.overrides);
    const std::string ckpt = pick_path(args.checkpoint_path, rc, "checkpoint");
    if (ckpt.empty()) throw UsageError("eval: --checkpoint is required");
    const auto net = model::MfptNetwork::load_checkpoint(ckpt);

    const std::string manifest_path = pick_path(args.manifest_path, rc, "manifest");
    const auto manifest = load_manifest_checked(manifest_path, {});

    const auto samples = eval::select_subset(manifest, args.subset);
    std::vector<data::ProbabilityMap> maps(samples.size());
    parallel_for(samples.size(), args.workers, [&](size_t i) {
        const Image img = imageio::load(manifest.resolve(samples[i]->image_path));
        maps[i] = eval::predict_native(net, img);
    });
    std::map<std::string, data::ProbabilityMap> predictions;
    for (size_t i = 0; i < samples.size(); ++i) {
        predictions.emplace(samples[i]->id, std::move(maps[i]));
    }

    const auto report =
        eval::evaluate_subset(predictions, manifest, args.subset, args.threshold);
    const std::string text = report.to_json();
    std::cout << text << "\n";
    if (!args.out_path.empty()) write_text(args.out_path, text);
    return 0;
}

int cmd_robustness(const CommonArgs& args, const std::string& kind,
                   const std::string& levels_csv) {
    RunConfig rc = load_run_config(args.config_path, args.overrides);
    const std::string ckpt = pick_path(args.checkpoint_path, rc, "checkpoint");
    if (ckpt.empty()) throw UsageError("robustness: --checkpoint is required");
    const auto net = model::MfptNetwork::load_checkpoint(ckpt);

    const std::string manifest_path = pick_path(args.manifest_path, rc, "manifest");
    const auto manifest = load_manifest_checked(manifest_path, {});

    eval::DegradationSpec spec;
    spec.kind = eval::parse_degradation_kind(kind);
    std::stringstream ss(levels_csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        try {
            size_t used = 0;
            const int level = std::stoi(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            spec.levels.push_back(level);
        } catch (const std::exception&) {
            throw UsageError("robustness: invalid level '" + token + "'");
        }
    }
    spec.validate();

    const auto rows =
        eval::robustness_sweep(net, manifest, args.subset, spec, args.threshold,
                               args.workers);
    const std::string csv = eval::robustness_csv(rows);
    std::cout << csv;
    if (!args.out_path.empty()) write_text(args.out_path, csv);
    return 0;
}

int cmd_triage(const CommonArgs& args, const std::string& probmaps) {
    RunConfig rc = load_run_config(args.config_path, args.overrides);
    const std::string probmap_dir = probmaps.empty() ? pick_path("", rc, "probmaps")
                                                     : probmaps;
    if (probmap_dir.empty()) throw UsageError("triage: --probmaps is required");
    std::string out_dir = pick_path(args.out_path, rc, "out");
    if (out_dir.empty()) throw UsageError("triage: --out is required");

    data::LoadOptions lo;
    lo.allow_unlabeled_edited = true;
    const std::string manifest_path = pick_path(args.manifest_path, rc, "manifest");
    const auto manifest = load_manifest_checked(manifest_path, lo);

    const auto result = triage::run_triage(probmap_dir, manifest, rc.triage, out_dir);
    std::cout << "accept=" << result.accept_manifest.samples.size()
              << " review=" << result.review_manifest.samples.size()
              << " discard=" << result.discarded << "\n";
    return 0;
}

int cmd_stats(const CommonArgs& args, int bins) {
    RunConfig rc = load_run_config(args.config_path, args.overrides);
    const std::string manifest_path = pick_path(args.manifest_path, rc, "manifest");
    data::LoadOptions lo;
    lo.verify = data::VerifyFiles::Metadata;
    lo.allow_unlabeled_edited = true;
    const auto manifest = load_manifest_checked(manifest_path, lo);

    json j;
    j["n"] = manifest.samples.size();
    std::map<std::string, size_t> by_split, by_role, by_subset;
    for (const auto& s : manifest.samples) {
        by_split[data::split_name(s.split)] += 1;
        by_role[data::role_name(s.role)] += 1;
        if (s.subset) by_subset[*s.subset] += 1;
    }
    j["by_split"] = by_split;
    j["by_role"] = by_role;
    j["by_subset"] = by_subset;
    const auto violations = data::check_split_leakage(manifest);
    j["leakage_violations"] = violations.size();
    if (bins > 0) {
        json hist = json::array();
        for (const auto& b : data::area_histogram(manifest, bins)) {
            json row;
            row["lo"] = b.lo;
            row["hi"] = b.hi;
            row["count"] = b.count;
            hist.push_back(row);
        }
        j["area_histogram"] = std::move(hist);
    }
    const std::string text = j.dump(2);
    std::cout << text << "\n";
    if (!args.out_path.empty()) write_text(args.out_path, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-prompted localization toolkit for diffusion-edited images"};
    app.require_subcommand(1);

    CommonArgs args;

    auto add_common = [&](CLI::App* cmd, bool with_threshold = false) {
        cmd->add_option("--config", args.config_path, "JSON run configuration");
        cmd->add_option("--set", args.overrides,
                        "Override a config key (section.key=value, repeatable)");
        cmd->add_option("--manifest", args.manifest_path, "Dataset manifest (JSONL)");
        cmd->add_option("--out", args.out_path, "Output file or directory");
        cmd->add_option("--workers", args.workers, "Worker threads for per-image loops")
            ->check(CLI::PositiveNumber);
        if (with_threshold) {
            cmd->add_option("--threshold", args.threshold, "Binarization threshold");
            cmd->add_option("--subset", args.subset, "Subset tag, split name, or 'all'");
        }
    };

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic desk-scale dataset");
    int synth_n = 8;
    std::string synth_size = "64x64";
    double synth_area = 0.12;
    double synth_auth = 0.5;
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--n", synth_n, "Total sample count");
    synth_cmd->add_option("--size", synth_size, "Image size WxH");
    synth_cmd->add_option("--seed", args.seed, "RNG seed (default 0)");
    synth_cmd->add_option("--area", synth_area, "Target edited-area fraction");
    synth_cmd->add_option("--authentic-frac", synth_auth, "Fraction of authentic samples");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the localization model");
    std::string backbone_weights;
    add_common(train_cmd);
    train_cmd->add_option("--backbone-weights", backbone_weights,
                          "Archive of externally supplied encoder weights");
    train_cmd
        ->add_option("--seed", args.seed, "Training seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_given = true; });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a subset");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--checkpoint", args.checkpoint_path, "Model checkpoint");

    // robustness
    auto* robust_cmd =
        app.add_subcommand("robustness", "Sweep JPEG or blur degradation levels");
    std::string kind = "jpeg";
    std::string levels = "100,90,80,70,60,50";
    add_common(robust_cmd, true);
    robust_cmd->add_option("--checkpoint", args.checkpoint_path, "Model checkpoint");
    robust_cmd->add_option("--kind", kind, "jpeg or blur");
    robust_cmd->add_option("--levels", levels, "Comma-separated level list");

    // triage
    auto* triage_cmd =
        app.add_subcommand("triage", "Apply labeling decision rules to probability maps");
    std::string probmaps;
    add_common(triage_cmd);
    triage_cmd->add_option("--probmaps", probmaps, "Directory of per-sample maps");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Manifest statistics");
    int bins = 10;
    add_common(stats_cmd);
    stats_cmd->add_option("--bins", bins, "Area-histogram bin count (0 skips)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) {
            return cmd_synth(synth_out, synth_n, synth_size, args.seed, synth_area,
                             synth_auth);
        }
        if (train_cmd->parsed()) return cmd_train(args, backbone_weights);
        if (eval_cmd->parsed()) return cmd_eval(args);
        if (robust_cmd->parsed()) return cmd_robustness(args, kind, levels);
        if (triage_cmd->parsed()) return cmd_triage(args, probmaps);
        if (stats_cmd->parsed()) return cmd_stats(args, bins);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
