// Copyright 2026 The promptse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"
#include "promptse/cli/commands.h"
#include "promptse/cli/run_config.h"
#include "promptse/dsp/wav.h"
#include "promptse/error.h"
#include "promptse/io.h"
#include "promptse/scenesim/corpus.h"

namespace promptse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "promptse");
  std::ostringstream out, err;
  CliResult r;
  r.code = RunCli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> Lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Tiny 1 kHz setup so that synthesis and training take well under a second.
const std::vector<std::string> kTinyConfig = {
    "scene.sample_rate=1000",   "scene.duration_s=1",       "scene.enroll_duration_s=1",
    "corpus.train_speakers=6",  "corpus.val_speakers=3",    "corpus.test_speakers=3",
    "model.embed_dim=4",        "model.hidden=4",           "model.speaker_dim=8",
    "model.embedder_hidden=8",  "model.fusion=film",        "model.enroll_blocks=1",
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::path(::testing::TempDir()) /
            (std::string("promptse_cli_") + info->name() + "_" + std::to_string(getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    config_ = Path("tiny.cfg");
    std::string text;
    for (const auto& line : kTinyConfig) text += line + "\n";
    WriteFileAtomic(config_, text);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string Path(const std::string& name) const { return (root_ / name).string(); }

  CliResult Synth(const std::string& dir, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"synth",     "--config",  config_,  "--out",  Path(dir),
                                     "--n-train", "4",         "--n-val", "2",     "--n-test",
                                     "4",         "--seed",    "3"};
    args.insert(args.end(), extra.begin(), extra.end());
    return Cli(args);
  }

  CliResult Train(const std::string& corpus, const std::string& out,
                  std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"train", "--config", config_, "--corpus", Path(corpus),
                                     "--out", Path(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    return Cli(args);
  }

  // Corpus with negatives plus a checkpoint trained for two steps.
  void MakeCheckpoint() {
    ASSERT_EQ(Synth("corpus", {"--neg-fraction", "0.5"}).code, kExitOk);
    const CliResult r = Train("corpus", "run", {"--loss", "log_mse", "--max-steps", "2"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }

  fs::path root_;
  std::string config_;
};

TEST(RunConfigTest, DispatchesKeysByPrefix) {
  RunConfig c;
  c.Set("model.embed_dim", "8");
  c.Set("train.lr0", "0.001");
  c.Set("loss.kind", "log_mse");
  c.Set("scene.duration_s", "2");
  c.Set("corpus.n_train", "10");
  c.Set("synth.seed", "42");
  EXPECT_EQ(c.model.embed_dim, 8);
  EXPECT_DOUBLE_EQ(c.train.lr0, 1e-3);
  EXPECT_EQ(c.train.loss.kind, LossKind::kLogMse);
  EXPECT_DOUBLE_EQ(c.scene.duration_s, 2.0);
  EXPECT_EQ(c.corpus.n_train, 10);
  EXPECT_EQ(c.synth_seed, 42u);
  EXPECT_THROW(c.Set("nonsense", "1"), ConfigError);
  EXPECT_THROW(c.Set("model.nonsense", "1"), ConfigError);
  EXPECT_THROW(c.Set("synth.seed", "-1"), ConfigError);
  EXPECT_THROW(c.Set("model.embed_dim", "eight"), ConfigError);
}

TEST(RunConfigTest, StftFollowsSceneRateUnlessSet) {
  RunConfig c;
  c.Set("scene.sample_rate", "16000");
  c.Finalize();
  EXPECT_EQ(c.stft, StftConfig::ForSampleRate(16000));

  RunConfig d;
  d.Set("scene.sample_rate", "16000");
  d.Set("stft.sample_rate", "8000");
  EXPECT_THROW(d.Finalize(), ConfigError);
}

TEST(RunConfigTest, ChannelsMustMatchMicrophones) {
  RunConfig c;
  c.Set("model.channels", "4");
  EXPECT_THROW(c.Finalize(), ConfigError);
  c.Set("scene.mic_count", "4");
  EXPECT_NO_THROW(c.Finalize());
}

TEST(RunConfigTest, ItemsRoundTrip) {
  RunConfig c;
  for (const auto& line : kTinyConfig) {
    const auto [k, v] = SplitAssignment(line);
    c.Set(k, v);
  }
  c.Finalize();
  RunConfig d;
  d.SetAll(c.Items());
  d.Finalize();
  EXPECT_EQ(d.Items(), c.Items());
}

TEST(RunConfigTest, AssignmentsAndFiles) {
  EXPECT_EQ(SplitAssignment("a.b=1=2"), std::make_pair(std::string("a.b"), std::string("1=2")));
  EXPECT_THROW(SplitAssignment("novalue"), ConfigError);
  EXPECT_THROW(SplitAssignment("=3"), ConfigError);
  EXPECT_THROW(ReadConfigFile("/nonexistent/promptse.cfg"), ConfigError);
}

TEST(ExitCodeTest, MapsErrorKinds) {
  EXPECT_EQ(ExitCodeFor(ConfigError("x")), kExitConfig);
  EXPECT_EQ(ExitCodeFor(DataError("x")), kExitData);
  EXPECT_EQ(ExitCodeFor(NumericalError("x")), kExitNumerical);
  EXPECT_EQ(ExitCodeFor(std::runtime_error("x")), kExitInternal);
}

TEST(CliParseTest, HelpAndUsageErrors) {
  EXPECT_EQ(Cli({"--help"}).code, kExitOk);
  EXPECT_EQ(Cli({}).code, kExitConfig);
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(Cli({"eval", "--checkpoint", "x"}).code, kExitConfig);
  EXPECT_EQ(Cli({"gradcheck", "--loss", "l1"}).code, kExitConfig);
}

TEST_F(CliTest, ConfigCommandPrintsReloadableConfig) {
  const CliResult a = Cli({"config", "--config", config_, "--set", "train.seed=9"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_NE(a.out.find("train.seed=9\n"), std::string::npos);
  EXPECT_NE(a.out.find("stft.sample_rate=1000\n"), std::string::npos);
  WriteFileAtomic(Path("dump.cfg"), a.out);
  const CliResult b = Cli({"config", "--config", Path("dump.cfg")});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(b.out, a.out);
}

TEST_F(CliTest, LaterSettingsWin) {
  const CliResult r = Cli({"config", "--config", config_, "--set", "model.hidden=7", "--set",
                           "model.hidden=5"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("model.hidden=5\n"), std::string::npos);
}

TEST_F(CliTest, SynthWritesRequestedCounts) {
  const std::vector<std::string> args = {
      "synth", "--set", "scene.duration_s=1", "--set", "scene.enroll_duration_s=1",
      "--n-train", "200", "--n-val", "40", "--n-test", "40", "--seed", "7",
      "--neg-fraction", "0.1", "--out", Path("big")};
  const CliResult r = Cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  int64_t records = 0;
  const int64_t expect[] = {200, 40, 40};
  for (int split = 0; split < 3; ++split) {
    const auto m = ReadManifest(Path("big") + "/" + kSplitNames[split] + ".jsonl");
    ASSERT_EQ(static_cast<int64_t>(m.size()), expect[split]);
    records += m.size();
    int64_t neg = 0;
    for (const auto& rec : m) neg += rec.polarity == Polarity::kNegative;
    EXPECT_EQ(neg, expect[split] / 10) << kSplitNames[split];
  }
  EXPECT_EQ(records, 280);
}

TEST_F(CliTest, SynthIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(Synth("a").code, kExitOk);
  ASSERT_EQ(Synth("b").code, kExitOk);
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(Path("a"))) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), Path("a")).string());
  }
  ASSERT_EQ(files.size(), 33u);
  for (const auto& f : files) {
    EXPECT_EQ(ReadFile(Path("a") + "/" + f), ReadFile(Path("b") + "/" + f)) << f;
  }
}

TEST_F(CliTest, SynthRejectsBadConfigWithoutTouchingDisk) {
  EXPECT_EQ(Synth("c", {"--set", "bogus.key=1"}).code, kExitConfig);
  EXPECT_EQ(Synth("c", {"--neg-fraction", "1.5"}).code, kExitConfig);
  EXPECT_EQ(Synth("c", {"--set", "scene.duration_s=1.0005"}).code, kExitConfig);
  EXPECT_FALSE(fs::exists(Path("c")));
}

TEST_F(CliTest, SynthRefusesExistingCorpus) {
  ASSERT_EQ(Synth("a").code, kExitOk);
  const CliResult r = Synth("a");
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(Synth("a", {"--overwrite"}).code, kExitOk);
}

TEST_F(CliTest, TrainMissingManifestIsDataError) {
  const CliResult r = Train("nowhere", "run");
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("train.jsonl"), std::string::npos);
  EXPECT_FALSE(fs::exists(Path("run")));
}

TEST_F(CliTest, TrainSiSdrWithNegativesIsConfigError) {
  ASSERT_EQ(Synth("corpus", {"--neg-fraction", "0.5"}).code, kExitOk);
  EXPECT_EQ(Train("corpus", "run", {"--loss", "si_sdr", "--neg-fraction", "0.1"}).code,
            kExitConfig);
  EXPECT_FALSE(fs::exists(Path("run")));
}

TEST_F(CliTest, TrainLogMseNeedsNegativesInCorpus) {
  ASSERT_EQ(Synth("corpus").code, kExitOk);
  EXPECT_EQ(Train("corpus", "run", {"--loss", "log_mse", "--max-steps", "1"}).code,
            kExitData);
  EXPECT_EQ(Train("corpus", "run2", {"--loss", "log_mse", "--neg-fraction", "0",
                                     "--max-steps", "1"})
                .code,
            kExitOk);
}

TEST_F(CliTest, TrainWritesOutputsAndRefusesToClobber) {
  MakeCheckpoint();
  for (const char* f : {"last.ckpt", "best.ckpt", "train_log.jsonl"}) {
    EXPECT_TRUE(fs::exists(Path("run") + "/" + f)) << f;
  }
  EXPECT_EQ(Train("corpus", "run", {"--loss", "log_mse", "--max-steps", "1"}).code,
            kExitConfig);
  EXPECT_EQ(Train("corpus", "run", {"--loss", "log_mse", "--max-steps", "1", "--overwrite"})
                .code,
            kExitOk);
  // One validation record and one step record per step.
  EXPECT_EQ(Lines(Path("run") + "/train_log.jsonl").size(), 3u);
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(Synth("corpus", {"--neg-fraction", "0.5"}).code, kExitOk);
  const std::vector<std::string> common = {"--loss", "log_mse", "--seed", "5"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> v = common;
    v.insert(v.end(), extra.begin(), extra.end());
    return v;
  };
  ASSERT_EQ(Train("corpus", "full", with({"--max-steps", "4"})).code, kExitOk);
  ASSERT_EQ(Train("corpus", "part", with({"--max-steps", "2"})).code, kExitOk);
  const CliResult r = Train("corpus", "part", with({"--max-steps", "4", "--resume"}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(Lines(Path("part") + "/train_log.jsonl"), Lines(Path("full") + "/train_log.jsonl"));
  EXPECT_EQ(ReadFile(Path("part") + "/last.ckpt"), ReadFile(Path("full") + "/last.ckpt"));
}

TEST_F(CliTest, ResumeRejectsChangedConfig) {
  MakeCheckpoint();
  const CliResult r = Train("corpus", "run", {"--resume", "--loss", "si_sdr"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("loss.kind"), std::string::npos);
  EXPECT_EQ(Train("corpus", "fresh", {"--resume"}).code, kExitData);
}

TEST_F(CliTest, EvalReportHasOneRecordPerPairPlusSummary) {
  MakeCheckpoint();
  const std::string manifest = Path("corpus") + "/test.jsonl";
  const CliResult r = Cli({"eval", "--checkpoint", Path("run") + "/best.ckpt", "--manifest",
                           manifest, "--report", Path("report.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(Path("report.jsonl"));
  ASSERT_EQ(lines.size(), Lines(manifest).size() + 1);
  const json summary = json::parse(lines.back())["summary"];
  EXPECT_EQ(summary["positive"]["count"], 2);
  EXPECT_EQ(summary["negative"]["count"], 2);
}

TEST_F(CliTest, EvalOracleReachesMetricCap) {
  MakeCheckpoint();
  const CliResult r = Cli({"eval", "--checkpoint", Path("run") + "/best.ckpt", "--manifest",
                           Path("corpus") + "/test.jsonl", "--report", Path("oracle.jsonl"),
                           "--oracle"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const auto& line : Lines(Path("oracle.jsonl"))) {
    const json j = json::parse(line);
    if (j.contains("summary") || j["polarity"] != "positive") continue;
    EXPECT_NEAR(j["si_sdr"].get<double>(), 80.0, 1e-3);
  }
}

TEST_F(CliTest, EvalNegativeOnlyManifestMarksSiSdriAbsent) {
  MakeCheckpoint();
  std::vector<ManifestRecord> neg;
  for (const auto& rec : ReadManifest(Path("corpus") + "/test.jsonl")) {
    if (rec.polarity == Polarity::kNegative) neg.push_back(rec);
  }
  ASSERT_FALSE(neg.empty());
  WriteManifest(Path("corpus") + "/negatives.jsonl", neg);
  const CliResult r =
      Cli({"eval", "--checkpoint", Path("run") + "/best.ckpt", "--manifest",
           Path("corpus") + "/negatives.jsonl", "--report", Path("neg.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json summary = json::parse(Lines(Path("neg.jsonl")).back())["summary"];
  EXPECT_TRUE(summary["negative"]["esr"].is_number());
  EXPECT_TRUE(summary["positive"]["si_sdri"].is_null());
}

TEST_F(CliTest, EvalMissingCheckpointIsDataError) {
  ASSERT_EQ(Synth("corpus").code, kExitOk);
  EXPECT_EQ(Cli({"eval", "--checkpoint", Path("none.ckpt"), "--manifest",
                 Path("corpus") + "/test.jsonl", "--report", Path("r.jsonl")})
                .code,
            kExitData);
  EXPECT_FALSE(fs::exists(Path("r.jsonl")));
}

TEST_F(CliTest, ExtractKeepsMixtureLength) {
  MakeCheckpoint();
  const auto rec = ReadManifest(Path("corpus") + "/test.jsonl").at(1);
  const std::string dir = Path("corpus") + "/";
  const CliResult r = Cli({"extract", "--checkpoint", Path("run") + "/best.ckpt", "--mixture",
                           dir + rec.mixture_path, "--enrollment", dir + rec.enrollment_path,
                           "--out", Path("est.wav")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Waveform mix = ReadWav(dir + rec.mixture_path);
  const Waveform est = ReadWav(Path("est.wav"));
  EXPECT_EQ(est.channels(), 1);
  EXPECT_EQ(est.length(), mix.length());
  EXPECT_EQ(est.sample_rate, mix.sample_rate);
}

TEST_F(CliTest, ExtractRejectsChannelAndRateMismatch) {
  MakeCheckpoint();
  const auto rec = ReadManifest(Path("corpus") + "/test.jsonl").at(1);
  const std::string dir = Path("corpus") + "/";
  const std::string ckpt = Path("run") + "/best.ckpt";
  // A mono file where the model expects two channels.
  CliResult r = Cli({"extract", "--checkpoint", ckpt, "--mixture", dir + rec.enrollment_path,
                     "--enrollment", dir + rec.enrollment_path, "--out", Path("x.wav")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("C=2"), std::string::npos) << r.err;

  Waveform mix = ReadWav(dir + rec.mixture_path);
  mix.sample_rate = 2000;
  WriteWav(Path("fast.wav"), mix);
  r = Cli({"extract", "--checkpoint", ckpt, "--mixture", Path("fast.wav"), "--enrollment",
           dir + rec.enrollment_path, "--out", Path("x.wav")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("2000"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(Path("x.wav")));
}

struct FlopRow {
  int64_t l, g, enroll_frames;
  double gmac;
};

std::vector<FlopRow> ParseFlops(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  std::vector<FlopRow> rows;
  FlopRow r;
  double per_second;
  while (in >> r.l >> r.g >> r.enroll_frames >> r.gmac >> per_second) rows.push_back(r);
  return rows;
}

TEST(CliFlopsTest, TableIsAffineInLAndShrinksWithDownsampling) {
  std::vector<std::string> args = {"promptse", "flops", "--preset", "v1", "--set",
                                   "model.downsample_depth=1"};
  std::ostringstream out, err;
  ASSERT_EQ(RunCli(args, out, err), kExitOk) << err.str();
  const auto rows = ParseFlops(out.str());
  ASSERT_EQ(rows.size(), 8u);
  // 4 s at 8 kHz with an 8 ms hop.
  EXPECT_EQ(rows[0].enroll_frames, 500);
  EXPECT_EQ(rows[4].enroll_frames, 250);
  for (int g = 0; g < 2; ++g) {
    const double step = rows[4 * g + 1].gmac - rows[4 * g].gmac;
    EXPECT_GT(step, 0);
    for (int l = 1; l < 3; ++l) {
      EXPECT_NEAR(rows[4 * g + l + 1].gmac - rows[4 * g + l].gmac, step, 2e-4);
    }
  }
  for (int l = 0; l < 4; ++l) EXPECT_LT(rows[4 + l].gmac, rows[l].gmac);
}

TEST(CliFlopsTest, DeskTableWithoutDownsamplerHasOneGroup) {
  std::vector<std::string> args = {"promptse", "flops", "--mix-seconds", "2",
                                   "--enroll-seconds", "2"};
  std::ostringstream out, err;
  ASSERT_EQ(RunCli(args, out, err), kExitOk) << err.str();
  const auto rows = ParseFlops(out.str());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].enroll_frames, 250);
  args = {"promptse", "flops", "--preset", "v9"};
  EXPECT_EQ(RunCli(args, out, err), kExitConfig);
}

TEST(CliGradcheckTest, PassesAndFailsUnderFault) {
  std::vector<std::string> args = {"promptse", "gradcheck", "--loss", "si_sdr"};
  std::ostringstream out, err;
  EXPECT_EQ(RunCli(args, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("gradcheck suite: PASS"), std::string::npos);
  args.insert(args.end(), {"--fault-op", "layer_norm"});
  std::ostringstream out2, err2;
  EXPECT_EQ(RunCli(args, out2, err2), kExitNumerical);
  EXPECT_NE(err2.str().find("block.0.inter.norm.beta"), std::string::npos) << err2.str();
}

}  // namespace
}  // namespace promptse
