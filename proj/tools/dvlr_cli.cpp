#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dvlr/common.hpp"

namespace {

void add_common(CLI::App* cmd, dvlr::cli::CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.preset, "toy or paper");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--set", o.overrides, "configuration override key=value (repeatable)");
  cmd->add_option("--out", o.out, "run directory")->capture_default_str();
  cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dvlr::cli;
  CLI::App app{"Decoupled interpreter/reasoner training on procedural geometry problems"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string from = "sft";
  std::string stage = "sft";
  dvlr::GradcheckOptions grad;

  auto* gen = app.add_subcommand("gen-data", "generate train and held-out corpora");
  auto* sft = app.add_subcommand("sft", "stage 1: supervised fine-tuning of both policies");
  auto* s2 = app.add_subcommand("rl-stage2", "stage 2: GRPO of the interpreter against the frozen reasoner");
  auto* s3 = app.add_subcommand("rl-stage3", "stage 3: GRPO of the reasoner with the frozen interpreter");
  auto* ev = app.add_subcommand("eval", "five-variant evaluation of a checkpoint pair");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the SFT and GRPO gradients");
  auto* full = app.add_subcommand("full-run", "gen-data, all three stages and evaluation of four configurations");
  auto* cfg = app.add_subcommand("config", "print the resolved configuration");
  for (auto* cmd : {gen, sft, s2, s3, ev, full, cfg}) add_common(cmd, common);
  s3->add_option("--from", from, "interpreter checkpoint to pair with: sft or s2")->capture_default_str();
  ev->add_option("--stage", stage, "sft, s2, s3 or s2s3")->capture_default_str();
  gc->add_option("--instances", grad.instances, "random instances per suite")->capture_default_str();
  gc->add_option("--seed", grad.seed, "instance seed")->capture_default_str();
  gc->add_option("--sabotage", grad.sabotage, "offset added to the analytic gradient (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) cmd_gen_data(common);
    if (*sft) cmd_sft(common);
    if (*s2) cmd_rl_stage2(common);
    if (*s3) cmd_rl_stage3(common, from);
    if (*ev) cmd_eval(common, stage);
    if (*full) cmd_full_run(common);
    if (*cfg) std::cout << dvlr::serialize(resolve_config(common));
    if (*gc) {
      const auto report = cmd_gradcheck(grad);
      std::cout << dvlr::format_gradcheck(report);
      return report.passed() ? kOk : kNumericalError;
    }
  } catch (const dvlr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
