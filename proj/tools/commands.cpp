#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "dvlr/checkpoint.hpp"
#include "dvlr/common.hpp"
#include "dvlr/corpus.hpp"
#include "dvlr/sft.hpp"

namespace fs = std::filesystem;

namespace dvlr::cli {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kConfigError;
    case ErrorKind::missing_prerequisite: return kMissingPrerequisite;
    case ErrorKind::numerical: return kNumericalError;
    case ErrorKind::io: return kIoError;
    default: return kFailure;
  }
}

RunConfig resolve_config(const CommonOptions& options) {
  RunConfig config = preset_config(options.preset.value_or("toy"));
  if (!options.config_path.empty()) {
    for (const auto& [key, value] : read_config_file(options.config_path)) {
      if (key == "preset" && options.preset) continue;
      set_option(config, key, value);
    }
  }
  for (const auto& kv : options.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, "override '" + kv + "' is not key=value");
    set_option(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (options.seed) config.seed = *options.seed;
  finalize(config);
  return config;
}

const std::vector<StagePair>& eval_stages() {
  static const std::vector<StagePair> stages = {
      {"sft", "interpreter.sft.ckpt", "reasoner.sft.ckpt"},
      {"s2", "interpreter.s2.ckpt", "reasoner.sft.ckpt"},
      {"s3", "interpreter.sft.ckpt", "reasoner.s3.ckpt"},
      {"s2s3", "interpreter.s2.ckpt", "reasoner.s2s3.ckpt"},
  };
  return stages;
}

namespace {

struct Paths {
  fs::path root;
  fs::path data() const { return root / "data"; }
  fs::path logs() const { return root / "logs"; }
  fs::path file(const std::string& name) const { return root / name; }
};

void say(const CommonOptions& options, const std::string& line) {
  if (!options.quiet) std::cout << line << std::endl;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

// Missing inputs name the stage that produces them.
void require(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    fail(ErrorKind::missing_prerequisite,
         path.string() + " not found; run the '" + stage + "' stage first");
  }
}

std::string stage_producing(const std::string& checkpoint) {
  if (checkpoint.find(".sft.") != std::string::npos) return "sft";
  if (checkpoint.find(".s2.") != std::string::npos) return "rl-stage2";
  if (checkpoint.find(".s2s3.") != std::string::npos) return "rl-stage3 --from s2";
  return "rl-stage3 --from sft";
}

Checkpoint load_required(const Paths& paths, const std::string& name, const Vocabulary& vocab) {
  const fs::path p = paths.file(name);
  require(p, stage_producing(name));
  return load_checkpoint(p.string(), vocab);
}

std::vector<CorpusProblem> load_split(const Paths& paths, const std::string& split) {
  const fs::path p = paths.data() / (split + ".tsv");
  require(p, "gen-data");
  return group_problems(read_corpus(p.string()));
}

class LogFile {
 public:
  explicit LogFile(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) fail(ErrorKind::io, "cannot write " + path.string());
  }
  void line(const std::string& text) {
    out_ << text << '\n';
    if (!out_) fail(ErrorKind::io, "write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

std::string provenance(const RunConfig& config, const std::string& stage) {
  return "stage = " + stage + "\n" + serialize(config);
}

// Verifies a record against the solver: the description's facts must
// determine the value of the labelled answer.
void verify_record(const CorpusRecord& record) {
  const auto scene = geo::scene_from_statements(geo::tokens_to_statements(record.description));
  const int value = geo::solve_ground_truth(scene);
  if (value != record.choices[static_cast<std::size_t>(record.gt - 'A')]) {
    fail(ErrorKind::contract, "corpus record answer disagrees with the solver");
  }
}

}  // namespace

void cmd_gen_data(const CommonOptions& options) {
  const RunConfig config = resolve_config(options);
  const Paths paths{options.out};
  ensure_dir(paths.data());
  const auto train = generate_records(config.seed, 0, static_cast<std::uint64_t>(config.n_train));
  const auto heldout = generate_records(config.seed, static_cast<std::uint64_t>(config.n_train),
                                        static_cast<std::uint64_t>(config.n_heldout));
  const auto rl = generate_records(config.seed, static_cast<std::uint64_t>(config.n_train + config.n_heldout),
                                   static_cast<std::uint64_t>(config.n_rl));
  std::size_t verified = 0;
  for (const auto* records : {&train, &heldout, &rl}) {
    for (std::size_t i = 0; i < records->size(); i += 100) {
      verify_record((*records)[i]);
      ++verified;
    }
  }
  write_corpus((paths.data() / "train.tsv").string(), train);
  write_corpus((paths.data() / "heldout.tsv").string(), heldout);
  write_corpus((paths.data() / "rl.tsv").string(), rl);

  nlohmann::ordered_json manifest;
  manifest["seed"] = config.seed;
  manifest["train_problems"] = config.n_train;
  manifest["heldout_problems"] = config.n_heldout;
  manifest["rl_problems"] = config.n_rl;
  manifest["train_records"] = train.size();
  manifest["heldout_records"] = heldout.size();
  manifest["rl_records"] = rl.size();
  manifest["variants"] = geo::kAllVariants.size();
  const auto& hash = Vocabulary::geometry().content_hash();
  manifest["vocabulary_sha256"] = to_hex(std::vector<std::uint8_t>(hash.begin(), hash.end()));
  manifest["solver_verified_records"] = verified;
  write_file((paths.data() / "manifest.json").string(), manifest.dump(2) + "\n");
  say(options, "gen-data: " + std::to_string(train.size()) + " train, " + std::to_string(heldout.size()) +
                   " held-out and " + std::to_string(rl.size()) + " rl records in " + paths.data().string());
}

void cmd_sft(const CommonOptions& options) {
  const RunConfig config = resolve_config(options);
  const Paths paths{options.out};
  const auto problems = load_split(paths, "train");
  ensure_dir(paths.logs());
  const Vocabulary vocab = Vocabulary::geometry();
  const std::uint64_t data_seed = mix_seed(config.sft.seed, 300);

  const struct {
    Role role;
    const ModelConfig* model;
    std::vector<SftExample> SftDatasets::*examples;
    std::uint64_t stream;
  } jobs[] = {{Role::interpreter, &config.interpreter, &SftDatasets::interpreter, 1},
              {Role::reasoner, &config.reasoner, &SftDatasets::reasoner, 2}};
  for (const auto& job : jobs) {
    const std::string name(to_string(job.role));
    Checkpoint ckpt;
    ckpt.params = init_policy(vocab, job.model->K, job.model->d, job.model->H, mix_seed(config.seed, 200 + job.stream),
                              job.role);
    ckpt.optimizer = init_optimizer(ckpt.params, config.sft.learning_rate);
    TrainingConfig tc = config.sft;
    tc.seed = mix_seed(config.sft.seed, job.stream);
    LogFile log(paths.logs() / ("sft_" + name + ".log"));
    int last_epoch = -1;
    double epoch_loss = 0.0;
    int epoch_batches = 0;
    const EpochData epoch_data = [&](int epoch) {
      return std::move(build_sft_epoch(problems, vocab, data_seed, epoch).*job.examples);
    };
    sft_train(ckpt.params, ckpt.optimizer, epoch_data, tc, [&](const SftBatchLog& e) {
      log.line(format_log(e));
      if (e.epoch != last_epoch && epoch_batches > 0) {
        say(options, "sft " + name + " epoch " + std::to_string(last_epoch) +
                         " mean loss " + std::to_string(epoch_loss / epoch_batches));
        epoch_loss = 0.0;
        epoch_batches = 0;
      }
      last_epoch = e.epoch;
      epoch_loss += e.mean_loss;
      ++epoch_batches;
    });
    say(options, "sft " + name + " epoch " + std::to_string(last_epoch) + " mean loss " +
                     std::to_string(epoch_loss / std::max(1, epoch_batches)));
    ckpt.provenance = provenance(config, "sft");
    save_checkpoint(paths.file(name + ".sft.ckpt").string(), ckpt, vocab);
  }
}

void cmd_rl_stage2(const CommonOptions& options) {
  const RunConfig config = resolve_config(options);
  const Paths paths{options.out};
  const Vocabulary vocab = Vocabulary::geometry();
  Checkpoint interpreter = load_required(paths, "interpreter.sft.ckpt", vocab);
  const Checkpoint reasoner = load_required(paths, "reasoner.sft.ckpt", vocab);
  const auto problems = load_split(paths, "rl");
  ensure_dir(paths.logs());
  LogFile log(paths.logs() / "stage2.log");
  interpreter.optimizer = init_optimizer(interpreter.params, config.stage2.learning_rate);
  const auto logs = stage2_train(interpreter.params, interpreter.optimizer, reasoner.params, problems, config.stage2,
                                 config.reasoner.max_len, vocab, [&](const RlBatchLog& e) { log.line(format_log(e)); });
  double reward = 0.0;
  for (const auto& e : logs) reward += e.mean_reward;
  say(options, "rl-stage2: " + std::to_string(logs.size()) + " batches, mean rollout reward " +
                   std::to_string(logs.empty() ? 0.0 : reward / static_cast<double>(logs.size())));
  interpreter.provenance = provenance(config, "rl-stage2");
  save_checkpoint(paths.file("interpreter.s2.ckpt").string(), interpreter, vocab);
}

void cmd_rl_stage3(const CommonOptions& options, const std::string& from) {
  if (from != "sft" && from != "s2") fail(ErrorKind::config, "--from must be sft or s2, got '" + from + "'");
  const RunConfig config = resolve_config(options);
  const Paths paths{options.out};
  const Vocabulary vocab = Vocabulary::geometry();
  const Checkpoint interpreter = load_required(paths, "interpreter." + from + ".ckpt", vocab);
  Checkpoint reasoner = load_required(paths, "reasoner.sft.ckpt", vocab);
  const auto problems = load_split(paths, "rl");
  ensure_dir(paths.logs());
  const std::string tag = from == "sft" ? "s3" : "s2s3";
  LogFile log(paths.logs() / ("stage3_" + tag + ".log"));
  reasoner.optimizer = init_optimizer(reasoner.params, config.stage3.learning_rate);
  const auto logs =
      stage3_train(interpreter.params, reasoner.params, reasoner.optimizer, problems, config.stage3,
                   config.interpreter.max_len, vocab, [&](const RlBatchLog& e) { log.line(format_log(e)); });
  double reward = 0.0;
  for (const auto& e : logs) reward += e.mean_reward;
  say(options, "rl-stage3 (" + tag + "): " + std::to_string(logs.size()) + " batches, mean rollout reward " +
                   std::to_string(logs.empty() ? 0.0 : reward / static_cast<double>(logs.size())));
  reasoner.provenance = provenance(config, "rl-stage3 from " + from);
  save_checkpoint(paths.file("reasoner." + tag + ".ckpt").string(), reasoner, vocab);
}

EvalReport cmd_eval(const CommonOptions& options, const std::string& stage) {
  const auto& stages = eval_stages();
  const auto it = std::find_if(stages.begin(), stages.end(), [&](const StagePair& s) { return s.name == stage; });
  if (it == stages.end()) fail(ErrorKind::config, "--stage must be one of sft, s2, s3, s2s3; got '" + stage + "'");
  const RunConfig config = resolve_config(options);
  const Paths paths{options.out};
  const Vocabulary vocab = Vocabulary::geometry();
  const Checkpoint interpreter = load_required(paths, it->interpreter, vocab);
  const Checkpoint reasoner = load_required(paths, it->reasoner, vocab);
  const auto testset = load_split(paths, "heldout");
  const PolicyModel imodel(interpreter.params);
  const PolicyModel rmodel(reasoner.params);
  EvalReport report = evaluate(policy_generator(imodel, vocab), policy_generator(rmodel, vocab), testset,
                               greedy_decoding(config));
  report.seed = config.seed;
  report.interpreter_id = parameter_hash(interpreter.params);
  report.reasoner_id = parameter_hash(reasoner.params);
  emit_report(report, paths.file("eval_" + stage + ".csv").string());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", report.accuracy());
  say(options, "eval " + stage + ": overall " + buf + "%");
  for (const auto& s : report.variants) {
    std::snprintf(buf, sizeof buf, "%.1f", s.accuracy());
    say(options, "  " + std::string(geo::to_string(s.variant)) + " " + buf + "%");
  }
  return report;
}

GradcheckReport cmd_gradcheck(const GradcheckOptions& options) { return run_gradcheck(options); }

std::vector<EvalReport> cmd_full_run(const CommonOptions& options) {
  cmd_gen_data(options);
  cmd_sft(options);
  cmd_rl_stage2(options);
  cmd_rl_stage3(options, "sft");
  cmd_rl_stage3(options, "s2");
  std::vector<EvalReport> reports;
  std::string summary = "configuration";
  for (const auto v : geo::kAllVariants) summary += "," + std::string(geo::to_string(v));
  summary += ",overall\n";
  for (const auto& stage : eval_stages()) {
    reports.push_back(cmd_eval(options, stage.name));
    summary += stage.name;
    char buf[32];
    for (const auto& s : reports.back().variants) {
      std::snprintf(buf, sizeof buf, ",%.1f", s.accuracy());
      summary += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.1f\n", reports.back().accuracy());
    summary += buf;
  }
  write_file(Paths{options.out}.file("summary.csv").string(), summary);
  return reports;
}

}  // namespace dvlr::cli
