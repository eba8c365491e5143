#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "radarseg4d/config.hpp"

using namespace radarseg4d;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string output;
};

CliRun run(const oracle::TempDir& dir, const std::string& args) {
    const fs::path log = dir / "cli_output.txt";
    const std::string cmd = std::string(RADARSEG4D_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = oracle::slurp(log);
    return r;
}

json small_config() {
    return {{"bins", fixture::small_bins()},
            {"dataset", {{"split_ratios", {{"train", 0.5}, {"val", 0.25}, {"test", 0.25}}}}},
            {"synth", {{"frames_per_sequence", 10}, {"person_count_weights", {0.1, 0.6, 0.3}}}},
            {"network", fixture::small_network()},
            {"train", {{"frames", 3}, {"batch_size", 2}, {"epochs", 1}, {"learning_rate", 1e-3}}}};
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new oracle::TempDir("cli");
        std::ofstream(*dir_ / "cfg.json") << small_config().dump(2);
        const CliRun s = run(*dir_, "synth --frames 40 --seed 3 --config " + cfg() + " --out " + ds());
        ASSERT_EQ(s.code, 0) << s.output;
        const CliRun t = run(*dir_, "train --dataset " + ds() + " --config " + cfg() + " --seed 1 --out " + path("run"));
        ASSERT_EQ(t.code, 0) << t.output;
    }
    static void TearDownTestSuite() { delete dir_; }
    static std::string path(const std::string& name) { return (*dir_ / name).string(); }
    static std::string cfg() { return path("cfg.json"); }
    static std::string ds() { return path("ds"); }
    static std::string ckpt() { return path("run/best.ckpt"); }
    static oracle::TempDir* dir_;
};

oracle::TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrors) {
    oracle::TempDir dir("cli_usage");
    EXPECT_EQ(run(dir, "").code, 2);
    EXPECT_EQ(run(dir, "--help").code, 0);
    EXPECT_EQ(run(dir, "frobnicate").code, 2);
    EXPECT_EQ(run(dir, "synth --out x").code, 2);
    const CliRun zero = run(dir, "synth --frames 0 --out " + (dir / "ds").string());
    EXPECT_EQ(zero.code, 2);
    EXPECT_NE(zero.output.find("positive"), std::string::npos) << zero.output;
    EXPECT_EQ(run(dir, "stats --dataset " + (dir / "absent").string()).code, 2);
    EXPECT_EQ(run(dir, "compile --raw " + (dir / "absent").string() + " --out " + (dir / "o").string()).code, 2);
    std::ofstream(dir / "bad.json") << R"({"train": {"epochz": 1}})";
    const CliRun bad = run(dir, "synth --frames 5 --config " + (dir / "bad.json").string() + " --out " +
                                 (dir / "o").string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.output.find("epochz"), std::string::npos) << bad.output;
}

TEST(Cli, SynthIsDeterministic) {
    oracle::TempDir dir("cli_det");
    std::ofstream(dir / "cfg.json") << small_config().dump();
    const std::string base = "synth --frames 30 --seed 7 --config " + (dir / "cfg.json").string();
    ASSERT_EQ(run(dir, base + " --out " + (dir / "a").string() + " --raw " + (dir / "raw").string()).code, 0);
    ASSERT_EQ(run(dir, base + " --out " + (dir / "b").string()).code, 0);
    std::string diff;
    EXPECT_TRUE(oracle::same_tree(dir / "a", dir / "b", &diff)) << diff;
    // Compiling the written raw corpus gives the same dataset, apart from the synth record.
    ASSERT_EQ(run(dir, "compile --raw " + (dir / "raw").string() + " --seed 7 --config " +
                           (dir / "cfg.json").string() + " --out " + (dir / "c").string())
                  .code,
              0);
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file() || e.path().extension() == ".json") continue;
        const auto rel = fs::relative(e.path(), dir / "a");
        ASSERT_EQ(oracle::slurp(e.path()), oracle::slurp(dir / "c" / rel)) << rel;
    }
}

TEST_F(CliTest, StatsPrintsJson) {
    const CliRun r = run(*dir_, "stats --dataset " + ds());
    ASSERT_EQ(r.code, 0) << r.output;
    const json j = json::parse(r.output);
    EXPECT_EQ(j["masks"], 40);
    EXPECT_TRUE(j["normalization"].contains("da"));
    EXPECT_EQ(j["splits"]["train"]["sequences"], 2);
}

TEST_F(CliTest, TrainWritesRun) {
    EXPECT_TRUE(fs::exists(ckpt()));
    EXPECT_TRUE(fs::exists(path("run/last.ckpt")));
    EXPECT_TRUE(fs::exists(path("run/train_log.jsonl")));
}

TEST_F(CliTest, EvalAndPredictAgree) {
    const CliRun e = run(*dir_, "eval --dataset " + ds() + " --checkpoint " + ckpt() + " --out " + path("eval.json"));
    ASSERT_EQ(e.code, 0) << e.output;
    const json report = json::parse(std::ifstream(path("eval.json")));
    EXPECT_TRUE(report.contains("mean_iou"));
    EXPECT_TRUE(report.contains("per_frame_mean"));
    const CliRun p = run(*dir_, "predict --dataset " + ds() + " --checkpoint " + ckpt() + " --out " + path("pred"));
    ASSERT_EQ(p.code, 0) << p.output;
    const CliRun ep = run(*dir_, "eval --dataset " + ds() + " --predictions " + path("pred") + " --frames 3 --out " +
                                  path("eval_png.json"));
    ASSERT_EQ(ep.code, 0) << ep.output;
    const json from_png = json::parse(std::ifstream(path("eval_png.json")));
    EXPECT_EQ(from_png["counts"], report["counts"]);
}

TEST_F(CliTest, CheckpointErrorsExitTwo) {
    json other = small_config();
    other["network"]["aspp_out_channels"] = 5;
    std::ofstream(*dir_ / "other.json") << other.dump();
    const CliRun r = run(*dir_, "eval --dataset " + ds() + " --config " + path("other.json") + " --checkpoint " + ckpt());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("does not match"), std::string::npos) << r.output;
    std::ofstream(*dir_ / "junk.ckpt") << "not a checkpoint";
    EXPECT_EQ(run(*dir_, "eval --dataset " + ds() + " --checkpoint " + path("junk.ckpt")).code, 2);
    EXPECT_EQ(run(*dir_, "eval --dataset " + ds() + " --checkpoint " + path("absent.ckpt")).code, 2);
    EXPECT_EQ(run(*dir_, "eval --dataset " + ds() + " --checkpoint " + ckpt() + " --split dev").code, 2);
}

TEST_F(CliTest, RenderWritesImages) {
    const auto dataset = CompiledDataset::open(ds());
    const auto& seq = dataset.sequences()[0];
    const std::string frame = seq.name + "/" + seq.frames[4].frame_id;
    const CliRun r = run(*dir_, "render --dataset " + ds() + " --frame " + frame + " --checkpoint " + ckpt() +
                                 " --out " + path("render"));
    ASSERT_EQ(r.code, 0) << r.output;
    const std::string stem = seq.name + "_" + seq.frames[4].frame_id;
    for (const char* s : {"_ea", "_er", "_ed", "_ra", "_da", "_gt", "_pred"}) {
        EXPECT_TRUE(fs::exists(*dir_ / "render" / (stem + s + ".png"))) << s;
    }
    EXPECT_EQ(run(*dir_, "render --dataset " + ds() + " --frame nope/1 --out " + path("render")).code, 2);
}
