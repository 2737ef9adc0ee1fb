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

#include <deque>
#include <sstream>

#include "CLI11.hpp"
#include "promptse/cli/commands.h"
#include "promptse/cli/run_config.h"
#include "promptse/error.h"

namespace promptse {
namespace {

// A flag that stands for one config key.
struct KeyFlag {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

// Config sources of one subcommand, merged as: file, then flags, then
// --set assignments.
struct ConfigSources {
  std::string file;
  std::deque<KeyFlag> flags;
  std::vector<std::string> sets;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "Config file of key=value lines");
    cmd->add_option("--set", sets, "Override one config key (key=value); repeatable")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  void Add(CLI::App* cmd, const std::string& name, const std::string& key,
           const std::string& help) {
    KeyFlag& f = flags.emplace_back();
    f.key = key;
    f.option = cmd->add_option(name, f.value, help + " (" + key + ")");
  }

  Settings Build() const {
    Settings out;
    if (!file.empty()) {
      for (const auto& kv : ReadConfigFile(file)) out.push_back(kv);
    }
    for (const auto& f : flags) {
      if (f.option->count() > 0) out.emplace_back(f.key, f.value);
    }
    for (const auto& s : sets) out.push_back(SplitAssignment(s));
    return out;
  }
};

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Onset-prompted multi-channel target speaker extraction", "promptse");
  app.require_subcommand(1);

  ConfigSources synth_cfg, train_cfg, flops_cfg, config_cfg;

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Synthesize a train/val/test corpus");
  synth_cmd->add_option("--out", synth.out_dir, "Corpus directory")->required();
  synth_cmd->add_flag("--overwrite", synth.overwrite, "Replace an existing corpus");
  synth_cfg.Attach(synth_cmd);
  synth_cfg.Add(synth_cmd, "--n-train", "corpus.n_train", "Training pairs");
  synth_cfg.Add(synth_cmd, "--n-val", "corpus.n_val", "Validation pairs");
  synth_cfg.Add(synth_cmd, "--n-test", "corpus.n_test", "Test pairs");
  synth_cfg.Add(synth_cmd, "--neg-fraction", "corpus.neg_fraction",
                "Share of negative pairs per split");
  synth_cfg.Add(synth_cmd, "--seed", "synth.seed", "Master seed");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train on a synthesized corpus");
  train_cmd->add_option("--corpus", train.corpus_dir, "Corpus directory")->required();
  train_cmd->add_option("--out", train.out_dir, "Checkpoint directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/last.ckpt");
  train_cmd->add_flag("--overwrite", train.overwrite, "Discard earlier outputs in <out>");
  train_cfg.Attach(train_cmd);
  train_cfg.Add(train_cmd, "--loss", "loss.kind", "si_sdr or log_mse");
  train_cfg.Add(train_cmd, "--neg-fraction", "train.neg_fraction",
                "Share of negative pairs per epoch, or auto");
  train_cfg.Add(train_cmd, "--seed", "train.seed", "Initialization and shuffling seed");
  train_cfg.Add(train_cmd, "--max-epochs", "train.max_epochs", "Epoch limit");
  train_cfg.Add(train_cmd, "--max-steps", "train.max_steps", "Step limit, 0 for none");
  train_cfg.Add(train_cmd, "--batch-size", "train.batch_size", "Pairs per step");
  train_cfg.Add(train_cmd, "--lr", "train.lr0", "Initial learning rate");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a manifest");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest (.jsonl)")->required();
  eval_cmd->add_option("--report", eval.report, "Report output (.jsonl)")->required();
  eval_cmd->add_flag("--oracle", eval.oracle, "Score the targets themselves");

  ExtractArgs extract;
  CLI::App* extract_cmd = app.add_subcommand("extract", "Extract the enrolled speaker");
  extract_cmd->add_option("--checkpoint", extract.checkpoint, "Model checkpoint")->required();
  extract_cmd->add_option("--mixture", extract.mixture, "Multi-channel mixture WAV")
      ->required();
  extract_cmd->add_option("--enrollment", extract.enrollment, "Mono enrollment WAV")
      ->required();
  extract_cmd->add_option("--out", extract.out, "Output WAV")->required();

  FlopsArgs flops;
  CLI::App* flops_cmd = app.add_subcommand("flops", "Tabulate MACs over L and G");
  flops_cmd->add_option("--preset", flops.preset, "Base model: desk, v1 or v2")
      ->capture_default_str();
  flops_cmd->add_option("--mix-seconds", flops.mix_seconds, "Mixture duration")
      ->capture_default_str();
  flops_cmd->add_option("--enroll-seconds", flops.enroll_seconds, "Enrollment duration")
      ->capture_default_str();
  flops_cfg.Attach(flops_cmd);

  GradcheckArgs gradcheck;
  std::string gradcheck_loss = "both";
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference check of the tiny pipeline");
  gradcheck_cmd->add_option("--loss", gradcheck_loss, "si_sdr, log_mse or both")
      ->capture_default_str();
  gradcheck_cmd->add_option("--seed", gradcheck.seed, "Input and parameter seed")
      ->capture_default_str();
  gradcheck_cmd->add_option("--tolerance", gradcheck.tolerance, "Relative error bound")
      ->capture_default_str();
  gradcheck_cmd->add_option("--fault-op", gradcheck.fault_op,
                            "Corrupt the backward pass of this op (negative control)");

  CLI::App* config_cmd = app.add_subcommand("config", "Print the merged configuration");
  config_cfg.Attach(config_cmd);

  // CLI11 consumes arguments from the back, without the program name.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream usage_out, usage_err;
    const int code = app.exit(e, usage_out, usage_err);
    out << usage_out.str();
    err << usage_err.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth_cmd) {
      synth.settings = synth_cfg.Build();
      CmdSynth(synth, out);
    } else if (*train_cmd) {
      train.settings = train_cfg.Build();
      CmdTrain(train, out);
    } else if (*eval_cmd) {
      CmdEval(eval, out);
    } else if (*extract_cmd) {
      CmdExtract(extract, out);
    } else if (*flops_cmd) {
      flops.settings = flops_cfg.Build();
      CmdFlops(flops, out);
    } else if (*gradcheck_cmd) {
      if (gradcheck_loss == "both") {
        gradcheck.losses = {LossKind::kSiSdr, LossKind::kLogMse};
      } else {
        gradcheck.losses = {ParseLossKind(gradcheck_loss)};
      }
      CmdGradcheck(gradcheck, out);
    } else if (*config_cmd) {
      CmdConfig(config_cfg.Build(), out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e);
  }
  return kExitOk;
}

}  // namespace promptse
