#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "cosmic/checkpoint.hpp"
#include "support/test_util.hpp"

using cosmic::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CliRun cosmic_cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "stdout.txt";
  const std::string cmd = std::string("\"") + COSMIC_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>\"" +
                          (scratch / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

const char* kSmallSynth =
    "synth --train-dialogues 8 --val-dialogues 3 --test-dialogues 3 --utterance-dim 6 --commonsense-dim 5";
const char* kSmallModel = "--hidden 5 --lr 1e-3";

class CliTest : public ::testing::Test {
 protected:
  std::string path(const std::string& name) const { return "\"" + (dir / name).string() + "\""; }
  CliRun run(const std::string& args) const { return cosmic_cli(args, dir.path()); }
  void make_data(const std::string& name = "data", const std::string& extra = "") const {
    ASSERT_EQ(run(std::string(kSmallSynth) + " --out " + path(name) + " " + extra).code, 0);
  }

  TempDir dir{"cli"};
};

}  // namespace

TEST_F(CliTest, TrainThenEvalReproducesValidationReport) {
  make_data();
  const auto t = run("train --manifest " + path("data/manifest.json") + " --out " + path("run") + " --epochs 3 " +
                     kSmallModel);
  ASSERT_EQ(t.code, 0) << slurp(dir / "stderr.txt");
  EXPECT_NE(t.out.find("best epoch"), std::string::npos);
  for (const char* f : {"checkpoint.bin", "history.json", "val_report.json", "effective_config.toml"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }
  const auto e = run("eval --manifest " + path("data/manifest.json") + " --checkpoint " + path("run/checkpoint.bin") +
                     " --split val --out " + path("eval"));
  ASSERT_EQ(e.code, 0) << slurp(dir / "stderr.txt");
  EXPECT_EQ(slurp(dir / "eval/eval_report.json"), slurp(dir / "run/val_report.json"));
  EXPECT_EQ(e.out, slurp(dir / "run/val_report.json"));
}

TEST_F(CliTest, ZeroEpochsWritesSeededInitialization) {
  make_data();
  ASSERT_EQ(run("train --manifest " + path("data/manifest.json") + " --out " + path("run") +
                " --epochs 0 --hidden 5 --seed 42 --mode bi")
                .code,
            0);
  const auto p = cosmic::load_checkpoint(dir / "run/checkpoint.bin");
  const auto init = cosmic::CosmicParams::initialized(p.dims(), cosmic::Mode::bidirectional, 42);
  EXPECT_EQ(cosmic::encode_checkpoint(p), cosmic::encode_checkpoint(init));
  EXPECT_EQ(p.dims().hidden, 5u);
}

TEST_F(CliTest, PackedFormatTrains) {
  make_data("packed", "--format packed");
  EXPECT_TRUE(fs::exists(dir / "packed/train.bin"));
  EXPECT_EQ(run("train --manifest " + path("packed/manifest.json") + " --out " + path("run") + " --epochs 1 " +
                kSmallModel)
                .code,
            0);
}

TEST_F(CliTest, ConfigFileSuppliesDefaults) {
  make_data();
  std::ofstream(dir / "cfg.toml") << "[train]\nepochs = 0\nhidden = 4\nseed = 9\n";
  ASSERT_EQ(run("train --config " + path("cfg.toml") + " --manifest " + path("data/manifest.json") + " --out " +
                path("run"))
                .code,
            0);
  EXPECT_EQ(cosmic::load_checkpoint(dir / "run/checkpoint.bin").dims().hidden, 4u);
  const auto effective = slurp(dir / "run/effective_config.toml");
  EXPECT_NE(effective.find("train.hidden=4"), std::string::npos);
  EXPECT_EQ(effective.find("eval."), std::string::npos);
  // The dump is itself a valid config file.
  ASSERT_EQ(run("train --config " + path("run/effective_config.toml") + " --out " + path("again")).code, 0);
  EXPECT_EQ(slurp(dir / "again/checkpoint.bin"), slurp(dir / "run/checkpoint.bin"));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("train --manifest " + path("missing.json") + " --out " + path("run")).code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --epochs many").code, 2);
  EXPECT_EQ(run("gradcheck --tolerance -1").code, 2);
  make_data();
  EXPECT_EQ(run("eval --manifest " + path("data/manifest.json") + " --checkpoint " + path("nope.bin")).code, 2);
  EXPECT_EQ(run("train --manifest " + path("data/manifest.json") + " --out " + path("run") + " --mode sideways").code,
            2);
  std::ofstream(dir / "junk.bin") << "garbage";
  EXPECT_EQ(run("eval --manifest " + path("data/manifest.json") + " --checkpoint " + path("junk.bin")).code, 2);
}

TEST_F(CliTest, GradcheckPassesAndCatchesFaults) {
  const auto ok = run("gradcheck");
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  EXPECT_EQ(run("gradcheck --mode bi").code, 0);
  const auto fault = run("gradcheck --inject-backward-fault");
  EXPECT_EQ(fault.code, 1);
  EXPECT_NE(fault.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(run("gradcheck --tolerance 0").code, 1);
}

TEST_F(CliTest, AblationTableIsDeterministic) {
  make_data();
  const std::string args =
      "ablate --manifest " + path("data/manifest.json") + " --epochs 1 --seeds 2 " + kSmallModel + " --out ";
  const auto a = run(args + path("a"));
  ASSERT_EQ(a.code, 0) << slurp(dir / "stderr.txt");
  const auto b = run(args + path("b"));
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(dir / "a/ablation.json"), slurp(dir / "b/ablation.json"));
  for (const char* row : {"full", "w/o speaker CSK", "w/o listener CSK", "w/o speaker+listener CSK"}) {
    EXPECT_NE(a.out.find(row), std::string::npos) << row;
  }
}

TEST_F(CliTest, SynthIsReproducible) {
  make_data("one", "--seed 5");
  make_data("two", "--seed 5");
  make_data("three", "--seed 6");
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    EXPECT_EQ(slurp(dir / "one" / f), slurp(dir / "two" / f));
    EXPECT_NE(slurp(dir / "one" / f), slurp(dir / "three" / f));
  }
}
