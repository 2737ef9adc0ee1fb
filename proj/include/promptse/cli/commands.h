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

// The `promptse` command-line tool. Each command validates its whole
// configuration before touching the filesystem and writes its outputs
// through temporary files renamed into place.
//
// Exit codes: 0 success, 1 internal error, 2 configuration error, 3 data
// error, 4 numerical failure.

#ifndef PROMPTSE_CLI_COMMANDS_H_
#define PROMPTSE_CLI_COMMANDS_H_

#include <exception>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "promptse/objectives/objectives.h"

namespace promptse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int ExitCodeFor(const std::exception& e);

// Ordered key/value assignments; later entries win.
using Settings = std::vector<std::pair<std::string, std::string>>;

struct SynthArgs {
  Settings settings;
  std::string out_dir;
  bool overwrite = false;
};
void CmdSynth(const SynthArgs& args, std::ostream& out);

struct TrainArgs {
  Settings settings;
  std::string corpus_dir;
  std::string out_dir;
  // Continue from <out_dir>/last.ckpt. Only train.max_epochs and
  // train.max_steps may then differ from the checkpoint.
  bool resume = false;
  bool overwrite = false;
};
void CmdTrain(const TrainArgs& args, std::ostream& out);

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string report;
  bool oracle = false;
};
void CmdEval(const EvalArgs& args, std::ostream& out);

struct ExtractArgs {
  std::string checkpoint;
  std::string mixture;
  std::string enrollment;
  std::string out;
};
void CmdExtract(const ExtractArgs& args, std::ostream& out);

struct FlopsArgs {
  Settings settings;
  std::string preset = "desk";  // desk | v1 | v2
  double mix_seconds = 4.0;
  double enroll_seconds = 4.0;
};
void CmdFlops(const FlopsArgs& args, std::ostream& out);

struct GradcheckArgs {
  std::vector<LossKind> losses = {LossKind::kSiSdr, LossKind::kLogMse};
  uint64_t seed = 1;
  double tolerance = 1e-3;
  std::string fault_op;
};
void CmdGradcheck(const GradcheckArgs& args, std::ostream& out);

// Prints the merged configuration as a config file.
void CmdConfig(const Settings& settings, std::ostream& out);

// Parses `args` (program name first), runs the command and returns the
// exit code. Errors are reported on `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace promptse

#endif  // PROMPTSE_CLI_COMMANDS_H_
