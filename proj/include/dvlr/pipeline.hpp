#pragma once

// Interpreter -> reasoner composition, the two RL stage drivers and the
// five-variant evaluation harness.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dvlr/config.hpp"
#include "dvlr/corpus.hpp"
#include "dvlr/grpo.hpp"
#include "dvlr/policy.hpp"
#include "dvlr/reward.hpp"

namespace dvlr {

// ---------------------------------------------------------------------------
// Prompt and target layout

TokenSequence interpreter_prompt(const TokenSequence& scene_channel);
// Tokens between TEXT_BEGIN and TEXT_END, or empty.
TokenSequence embedded_text(const TokenSequence& scene_channel);
// embedded text, <sep>, description, <eos>
TokenSequence interpreter_target(const TokenSequence& scene_channel, const TokenSequence& description);
// description, <sep>, question, choices
TokenSequence reasoner_prompt(const TokenSequence& description, const TokenSequence& question,
                              const TokenSequence& choices);
// solution, ANSWER, (label), <eos>
TokenSequence reasoner_target(const TokenSequence& solution, char gt);

struct InterpreterReading {
  TokenSequence readout;      // text read from the scene channel
  TokenSequence description;  // relational description
};

// Splits interpreter output at its first <sep>; a trailing <eos> is dropped.
InterpreterReading parse_interpreter_output(const TokenSequence& output);

// Reasoner prompt for a rendition: the description comes from the text
// channel when it carries one, otherwise from the interpreter; question and
// choices come from the text channel when present, otherwise from the
// interpreter's readout.
TokenSequence assemble_reasoner_prompt(const geo::PipelineInput& input, const TokenSequence& interpreter_output);

// ---------------------------------------------------------------------------
// Running the pair

struct Generation {
  TokenSequence tokens;  // includes the final <eos>
  std::vector<double> logp;
  bool truncated = false;
};

using Generator = std::function<Generation(const TokenSequence& prompt, const Decoding& decoding)>;

// The model must outlive the generator.
Generator policy_generator(const PolicyModel& model, const Vocabulary& vocab);

struct PipelineDecoding {
  Decoding interpreter;
  Decoding reasoner;
};

PipelineDecoding greedy_decoding(const RunConfig& config);

struct PipelineOutput {
  TokenSequence interpreter_output;
  TokenSequence description;
  TokenSequence reasoner_input;
  TokenSequence response;
  std::optional<char> extracted;
  OutcomeReward reward;
  bool interpreter_truncated = false;
  bool reasoner_truncated = false;
};

PipelineOutput run_pipeline(const Generator& interpreter, const Generator& reasoner, const geo::PipelineInput& input,
                            const PipelineDecoding& decoding, std::optional<char> gt = std::nullopt);

// ---------------------------------------------------------------------------
// RL stages

struct RlBatchLog {
  int step = 0;
  int epoch = 0;
  double mean_reward = 0.0;
  int groups = 0;
  int skipped = 0;
  double objective = 0.0;      // mean over non-skipped groups
  double mean_kl = 0.0;        // mean over non-skipped groups
  double clip_fraction = 0.0;  // mean over non-skipped groups
  double grad_norm = 0.0;
};

std::string format_log(const RlBatchLog& entry);

using RlLogSink = std::function<void(const RlBatchLog&)>;

// Variants the interpreter is trained on in stage 2, cycled per problem.
inline constexpr std::array<geo::Variant, 4> kStage2Variants = {
    geo::Variant::vision_only, geo::Variant::vision_dominant, geo::Variant::text_lite,
    geo::Variant::vision_intensive};

// Trains the interpreter against the frozen reasoner (greedy). The reference
// policy is the interpreter as passed in.
std::vector<RlBatchLog> stage2_train(PolicyParameters& interpreter, OptimizerState& state,
                                     const PolicyParameters& reasoner, const std::vector<CorpusProblem>& problems,
                                     const TrainingConfig& config, int reasoner_max_len, const Vocabulary& vocab,
                                     const RlLogSink& sink = {});

// Trains the reasoner on greedy descriptions from the frozen interpreter.
std::vector<RlBatchLog> stage3_train(const PolicyParameters& interpreter, PolicyParameters& reasoner,
                                     OptimizerState& state, const std::vector<CorpusProblem>& problems,
                                     const TrainingConfig& config, int interpreter_max_len, const Vocabulary& vocab,
                                     const RlLogSink& sink = {});

// ---------------------------------------------------------------------------
// Evaluation

struct VariantScore {
  geo::Variant variant;
  int correct = 0;
  int total = 0;
  double accuracy() const { return total == 0 ? 0.0 : 100.0 * correct / total; }
};

struct EvalReport {
  std::vector<VariantScore> variants;
  int correct = 0;
  int total = 0;
  std::uint64_t seed = 0;
  std::string interpreter_id;
  std::string reasoner_id;

  double accuracy() const { return total == 0 ? 0.0 : 100.0 * correct / total; }
  const VariantScore& score(geo::Variant variant) const;
};

EvalReport evaluate(const Generator& interpreter, const Generator& reasoner, const std::vector<CorpusProblem>& testset,
                    const PipelineDecoding& decoding,
                    const std::vector<geo::Variant>& variants = {geo::kAllVariants.begin(), geo::kAllVariants.end()});

// CSV with header "variant,correct,total,accuracy", one row per variant.
std::string format_report(const EvalReport& report);
void emit_report(const EvalReport& report, const std::string& path);

}  // namespace dvlr
