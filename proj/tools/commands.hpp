#pragma once

// Subcommand implementations shared by the dvlr binary and the acceptance
// suite. Every command reads and writes inside a run directory:
//   data/train.tsv, data/heldout.tsv, data/rl.tsv, data/manifest.json
//   interpreter.sft.ckpt, reasoner.sft.ckpt       (sft)
//   interpreter.s2.ckpt                           (rl-stage2)
//   reasoner.s3.ckpt, reasoner.s2s3.ckpt          (rl-stage3 --from sft|s2)
//   eval_<sft|s2|s3|s2s3>.csv                     (eval --stage ...)
//   logs/*.log, summary.csv                       (full-run)

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dvlr/common.hpp"
#include "dvlr/config.hpp"
#include "dvlr/gradcheck.hpp"
#include "dvlr/pipeline.hpp"

namespace dvlr::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kMissingPrerequisite = 3,
  kNumericalError = 4,
  kIoError = 5,
};

int exit_code_for(ErrorKind kind);

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;  // key=value
  std::string out = "run";
  bool quiet = false;
};

// Preset, then config file, then --set overrides, then --seed.
RunConfig resolve_config(const CommonOptions& options);

// Pairing of checkpoints evaluated by each eval stage name.
struct StagePair {
  std::string name;
  std::string interpreter;  // checkpoint file name inside the run directory
  std::string reasoner;
};
const std::vector<StagePair>& eval_stages();

void cmd_gen_data(const CommonOptions& options);
void cmd_sft(const CommonOptions& options);
void cmd_rl_stage2(const CommonOptions& options);
// from: "sft" or "s2"
void cmd_rl_stage3(const CommonOptions& options, const std::string& from);
EvalReport cmd_eval(const CommonOptions& options, const std::string& stage);
// Returns the report; the caller decides the exit code from passed().
GradcheckReport cmd_gradcheck(const GradcheckOptions& options);
// gen-data, sft, rl-stage2, rl-stage3 from sft and from s2, eval of all four
// configurations and summary.csv.
std::vector<EvalReport> cmd_full_run(const CommonOptions& options);

}  // namespace dvlr::cli
