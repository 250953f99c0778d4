#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#ifndef MFPT_BIN_PATH
#error "MFPT_BIN_PATH must point at the CLI binary"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mfpt_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, const fs::path& stdout_file = {}) {
    std::string cmd = std::string(MFPT_BIN_PATH) + " " + args;
    if (!stdout_file.empty()) {
        cmd += " > " + stdout_file.string() + " 2>/dev/null";
    } else {
        cmd += " >/dev/null 2>&1";
    }
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Tiny-model override string shared by the training commands.
const char* kTinyModel =
    "--set model.n_blocks=2 --set model.tap_stages=[1,2] --set model.input_width=32 "
    "--set model.input_height=32 --set model.backbone_channels=16 "
    "--set model.backbone_heads=2 --set model.embed_channels=16 --set model.head_count=4 "
    "--set model.group_length=4 --set model.adapter_rank=2 --set model.decoder_channels=4";

}  // namespace

TEST_CASE("synth writes a loadable leakage-free dataset and honors --n and --seed") {
    TempDir tmp;
    const fs::path out = tmp.path / "data";
    REQUIRE(run("synth --out " + out.string() + " --n 4 --size 32x32 --seed 7") == 0);
    REQUIRE(fs::exists(out / "manifest.jsonl"));

    // 2 authentic + 2 edited by default fractions.
    fs::path stats_out = tmp.path / "stats.json";
    REQUIRE(run("stats --manifest " + (out / "manifest.jsonl").string() + " --bins 0",
                stats_out) == 0);
    const json j = json::parse(read_file(stats_out));
    CHECK(j["n"] == 4);
    CHECK(j["by_role"]["edited"] == 2);
    CHECK(j["by_role"]["authentic"] == 2);
    CHECK(j["leakage_violations"] == 0);
}

TEST_CASE("synth is byte-identical across reruns with the same seed") {
    TempDir tmp;
    const fs::path a = tmp.path / "a";
    const fs::path b = tmp.path / "b";
    REQUIRE(run("synth --out " + a.string() + " --n 4 --size 32x32 --seed 11") == 0);
    REQUIRE(run("synth --out " + b.string() + " --n 4 --size 32x32 --seed 11") == 0);
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        CHECK(read_file(entry.path()) == read_file(b / rel));
    }
    // A different seed must change the images.
    const fs::path c = tmp.path / "c";
    REQUIRE(run("synth --out " + c.string() + " --n 4 --size 32x32 --seed 12") == 0);
    CHECK(read_file(a / "images" / "src0_orig.png") !=
          read_file(c / "images" / "src0_orig.png"));
}

TEST_CASE("train then eval work end to end with deterministic outputs") {
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(run("synth --out " + data.string() + " --n 6 --size 32x32 --seed 3") == 0);
    const std::string manifest = (data / "manifest.jsonl").string();

    auto train_into = [&](const std::string& dir) {
        return run("train --manifest " + manifest + " --out " + (tmp.path / dir).string() +
                   " " + kTinyModel +
                   " --set train.max_iterations=3 --set train.eval_interval=2 --seed 5");
    };
    REQUIRE(train_into("r1") == 0);
    REQUIRE(train_into("r2") == 0);
    CHECK(read_file(tmp.path / "r1" / "trace.csv") ==
          read_file(tmp.path / "r2" / "trace.csv"));
    CHECK(read_file(tmp.path / "r1" / "final.ckpt") ==
          read_file(tmp.path / "r2" / "final.ckpt"));
    CHECK(read_file(tmp.path / "r1" / "best.ckpt") ==
          read_file(tmp.path / "r2" / "best.ckpt"));

    // Trace has header + 3 rows.
    const std::string trace = read_file(tmp.path / "r1" / "trace.csv");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);

    const std::string ckpt = (tmp.path / "r1" / "final.ckpt").string();
    const fs::path ej1 = tmp.path / "eval1.json";
    const fs::path ej2 = tmp.path / "eval2.json";
    REQUIRE(run("eval --checkpoint " + ckpt + " --manifest " + manifest +
                " --subset test --out " + ej1.string(), ej1) == 0);
    REQUIRE(run("eval --checkpoint " + ckpt + " --manifest " + manifest +
                " --subset test --out " + ej2.string(), ej2) == 0);
    CHECK(read_file(ej1) == read_file(ej2));
    const json report = json::parse(read_file(ej1));
    CHECK(report["subset"] == "test");
    CHECK(report["n"].get<int>() == 2);
    CHECK(report.contains("pF1"));
}

TEST_CASE("train with zero iterations emits the initial checkpoint and empty trace") {
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(run("synth --out " + data.string() + " --n 6 --size 32x32 --seed 4") == 0);
    REQUIRE(run("train --manifest " + (data / "manifest.jsonl").string() + " --out " +
                (tmp.path / "r0").string() + " " + kTinyModel +
                " --set train.max_iterations=0") == 0);
    CHECK(fs::exists(tmp.path / "r0" / "best.ckpt"));
    CHECK(fs::exists(tmp.path / "r0" / "final.ckpt"));
    const std::string trace = read_file(tmp.path / "r0" / "trace.csv");
    CHECK(trace == "iteration,train_loss,val_pf1\n");
    // Initial best and final are the same untouched state.
    CHECK(read_file(tmp.path / "r0" / "best.ckpt") ==
          read_file(tmp.path / "r0" / "final.ckpt"));
}

TEST_CASE("eval on an authentic-only subset omits pF1 and IoU aggregates") {
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(run("synth --out " + data.string() + " --n 6 --size 32x32 --seed 5") == 0);
    const std::string manifest = (data / "manifest.jsonl").string();
    REQUIRE(run("train --manifest " + manifest + " --out " + (tmp.path / "r").string() +
                " " + kTinyModel + " --set train.max_iterations=1") == 0);

    // Rewrite the manifest subset tags: authentic samples only.
    std::ifstream in(manifest);
    std::ostringstream filtered;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("\"authentic\"") != std::string::npos) filtered << line << "\n";
    }
    const fs::path auth_manifest = data / "auth.jsonl";
    std::ofstream(auth_manifest) << filtered.str();

    const fs::path out = tmp.path / "auth.json";
    REQUIRE(run("eval --checkpoint " + (tmp.path / "r" / "final.ckpt").string() +
                " --manifest " + auth_manifest.string() + " --subset all --out " +
                out.string(), out) == 0);
    const json j = json::parse(read_file(out));
    CHECK(j["authentic_only"].get<bool>());
    CHECK_FALSE(j.contains("pF1"));
    CHECK_FALSE(j.contains("IoU"));
    CHECK(j.contains("pACC"));
}

TEST_CASE("robustness emits one ordered row per level including duplicates") {
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(run("synth --out " + data.string() + " --n 4 --size 32x32 --seed 6") == 0);
    const std::string manifest = (data / "manifest.jsonl").string();
    REQUIRE(run("train --manifest " + manifest + " --out " + (tmp.path / "r").string() +
                " " + kTinyModel + " --set train.max_iterations=1") == 0);
    const std::string ckpt = (tmp.path / "r" / "final.ckpt").string();

    const fs::path csv = tmp.path / "rob.csv";
    REQUIRE(run("robustness --checkpoint " + ckpt + " --manifest " + manifest +
                " --kind jpeg --levels 90,90 --out " + csv.string(), csv) == 0);
    std::istringstream lines(read_file(csv));
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    CHECK(header == "level,IoU,pF1");
    CHECK(row1 == row2);
    CHECK(row1.rfind("90,", 0) == 0);

    CHECK(run("robustness --checkpoint " + ckpt + " --manifest " + manifest +
              " --kind jpeg --levels 90,nope") == 2);
    CHECK(run("robustness --checkpoint " + ckpt + " --manifest " + manifest +
              " --kind blur --levels 4") == 2);
}

TEST_CASE("triage command routes engineered fixtures and is idempotent") {
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(run("synth --out " + data.string() +
                " --n 3 --size 32x32 --seed 8 --authentic-frac 0") == 0);
    const std::string manifest = (data / "manifest.jsonl").string();

    // Probability maps engineered per positive-region mean: accept (0.9),
    // review (0.4), discard (0.2).
    const fs::path probs = tmp.path / "probs";
    fs::create_directories(probs);
    const double levels[3] = {0.9, 0.4, 0.2};
    const char* ids[3] = {"src0_edit", "src1_edit", "src2_edit"};
    for (int i = 0; i < 3; ++i) {
        std::ofstream out(probs / (std::string(ids[i]) + ".f32"), std::ios::binary);
        const uint32_t wh[2] = {32, 32};
        out.write(reinterpret_cast<const char*>(wh), 8);
        std::vector<float> vals(32 * 32, 0.0f);
        for (int k = 0; k < 150; ++k) vals[k] = static_cast<float>(levels[i]);
        out.write(reinterpret_cast<const char*>(vals.data()),
                  static_cast<std::streamsize>(vals.size() * sizeof(float)));
    }

    const fs::path out1 = tmp.path / "t1";
    REQUIRE(run("triage --probmaps " + probs.string() + " --manifest " + manifest +
                " --out " + out1.string()) == 0);
    const std::string accept = read_file(out1 / "accept.jsonl");
    const std::string review = read_file(out1 / "review.jsonl");
    const std::string discard = read_file(out1 / "discard.csv");
    CHECK(accept.find("src0_edit") != std::string::npos);
    CHECK(review.find("src1_edit") != std::string::npos);
    CHECK(discard.find("src2_edit") != std::string::npos);
    CHECK(fs::exists(out1 / "masks" / "src0_edit.png"));

    const fs::path out2 = tmp.path / "t2";
    REQUIRE(run("triage --probmaps " + probs.string() + " --manifest " + manifest +
                " --out " + out2.string()) == 0);
    CHECK(read_file(out2 / "accept.jsonl") == accept);
    CHECK(read_file(out2 / "discard.csv") == discard);
}

TEST_CASE("triage with empty inputs succeeds with empty outputs") {
    TempDir tmp;
    const fs::path probs = tmp.path / "probs";
    fs::create_directories(probs);
    const fs::path manifest = tmp.path / "empty.jsonl";
    std::ofstream(manifest).close();
    const fs::path out = tmp.path / "out";
    REQUIRE(run("triage --probmaps " + probs.string() + " --manifest " +
                manifest.string() + " --out " + out.string()) == 0);
    CHECK(read_file(out / "accept.jsonl").empty());
    CHECK(read_file(out / "review.jsonl").empty());
    CHECK(read_file(out / "discard.csv") == "id,mean_prob,area_ratio,failure_class\n");
}

TEST_CASE("stats on a metadata-only stub reports declared split sizes") {
    TempDir tmp;
    const fs::path manifest = tmp.path / "stub.jsonl";
    // Full corpus shape: declared sizes only, no files behind the records.
    const int train_n = 330979, val_n = 3989, test_n = 5500;
    {
        std::ofstream out(manifest);
        int id = 0;
        auto emit = [&](const char* split, int count) {
            for (int i = 0; i < count; ++i, ++id) {
                out << "{\"id\":\"s" << id << "\",\"source_id\":\"src" << id
                    << "\",\"role\":\"authentic\",\"width\":64,\"height\":64,"
                    << "\"image_path\":\"img/" << id << ".png\",\"split\":\"" << split
                    << "\"}\n";
            }
        };
        emit("train", train_n);
        emit("val", val_n);
        emit("test", test_n);
    }
    const fs::path out = tmp.path / "stats.json";
    REQUIRE(run("stats --manifest " + manifest.string() + " --bins 0", out) == 0);
    const json j = json::parse(read_file(out));
    CHECK(j["by_split"]["train"].get<int>() == train_n);
    CHECK(j["by_split"]["val"].get<int>() == val_n);
    CHECK(j["by_split"]["test"].get<int>() == test_n);
    CHECK(j["n"].get<int>() == train_n + val_n + test_n);
}

TEST_CASE("config file drives training and unknown keys are rejected before work") {
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(run("synth --out " + data.string() + " --n 4 --size 32x32 --seed 9") == 0);

    json cfg;
    cfg["model"]["n_blocks"] = 2;
    cfg["model"]["tap_stages"] = {1, 2};
    cfg["model"]["input_width"] = 32;
    cfg["model"]["input_height"] = 32;
    cfg["model"]["backbone_channels"] = 16;
    cfg["model"]["backbone_heads"] = 2;
    cfg["model"]["embed_channels"] = 16;
    cfg["model"]["head_count"] = 4;
    cfg["model"]["group_length"] = 4;
    cfg["model"]["adapter_rank"] = 2;
    cfg["model"]["decoder_channels"] = 4;
    cfg["train"]["max_iterations"] = 1;
    cfg["paths"]["manifest"] = (data / "manifest.jsonl").string();
    cfg["paths"]["out"] = (tmp.path / "run").string();
    const fs::path cfg_path = tmp.path / "run.json";
    std::ofstream(cfg_path) << cfg.dump(2);

    REQUIRE(run("train --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(tmp.path / "run" / "final.ckpt"));

    // An unknown key must be rejected with exit 2 and no side effects.
    cfg["train"]["warmup_iterations"] = 5;
    std::ofstream(cfg_path) << cfg.dump(2);
    const fs::path out2 = tmp.path / "run2";
    CHECK(run("train --config " + cfg_path.string() + " --out " + out2.string()) == 2);
    CHECK_FALSE(fs::exists(out2));
}
