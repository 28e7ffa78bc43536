#include "dvlr/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "dvlr/checkpoint.hpp"
#include "dvlr/common.hpp"

namespace dvlr {

TokenSequence interpreter_prompt(const TokenSequence& scene_channel) { return scene_channel; }

TokenSequence embedded_text(const TokenSequence& scene) {
  const auto b = std::find(scene.begin(), scene.end(), tok::text_begin);
  if (b == scene.end()) return {};
  const auto e = std::find(b, scene.end(), tok::text_end);
  return TokenSequence(b + 1, e);
}

TokenSequence interpreter_target(const TokenSequence& scene_channel, const TokenSequence& description) {
  TokenSequence out = embedded_text(scene_channel);
  out.emplace_back(tok::sep);
  out.insert(out.end(), description.begin(), description.end());
  out.emplace_back(tok::eos);
  return out;
}

TokenSequence reasoner_prompt(const TokenSequence& description, const TokenSequence& question,
                              const TokenSequence& choices) {
  TokenSequence out = description;
  out.emplace_back(tok::sep);
  out.insert(out.end(), question.begin(), question.end());
  out.insert(out.end(), choices.begin(), choices.end());
  return out;
}

TokenSequence reasoner_target(const TokenSequence& solution, char gt) {
  TokenSequence out = solution;
  out.emplace_back(tok::answer);
  out.push_back(choice_token(gt));
  out.emplace_back(tok::eos);
  return out;
}

InterpreterReading parse_interpreter_output(const TokenSequence& output) {
  auto end = output.end();
  if (end != output.begin() && *(end - 1) == tok::eos) --end;
  const auto sep = std::find(output.begin(), end, tok::sep);
  if (sep == end) return {{}, TokenSequence(output.begin(), end)};
  return {TokenSequence(output.begin(), sep), TokenSequence(sep + 1, end)};
}

namespace {

// Splits question tokens from choice tokens at the first choice label.
std::pair<TokenSequence, TokenSequence> split_question(const TokenSequence& tokens) {
  const auto it = std::find_if(tokens.begin(), tokens.end(), [](const std::string& t) { return choice_label(t); });
  return {TokenSequence(tokens.begin(), it), TokenSequence(it, tokens.end())};
}

}  // namespace

TokenSequence assemble_reasoner_prompt(const geo::PipelineInput& input, const TokenSequence& interpreter_output) {
  const auto reading = parse_interpreter_output(interpreter_output);
  const auto& text = input.text_channel;
  const auto sep = std::find(text.begin(), text.end(), tok::sep);
  const TokenSequence text_head(text.begin(), sep);
  const TokenSequence description = sep == text.end() ? reading.description : TokenSequence(sep + 1, text.end());

  auto [question, choices] = split_question(text_head);
  auto [read_question, read_choices] = split_question(reading.readout);
  if (question.empty()) question = read_question;
  if (choices.empty()) choices = read_choices;
  return reasoner_prompt(description, question, choices);
}

Generator policy_generator(const PolicyModel& model, const Vocabulary& vocab) {
  return [&model, &vocab](const TokenSequence& prompt, const Decoding& decoding) {
    const Sample s = model.sample(vocab.encode(prompt), decoding);
    return Generation{vocab.decode(s.output), s.per_token_logprob, s.truncated};
  };
}

PipelineDecoding greedy_decoding(const RunConfig& config) {
  PipelineDecoding d;
  d.interpreter.greedy = true;
  d.interpreter.max_len = config.interpreter.max_len;
  d.reasoner.greedy = true;
  d.reasoner.max_len = config.reasoner.max_len;
  return d;
}

PipelineOutput run_pipeline(const Generator& interpreter, const Generator& reasoner, const geo::PipelineInput& input,
                            const PipelineDecoding& decoding, std::optional<char> gt) {
  PipelineOutput out;
  const Generation reading = interpreter(interpreter_prompt(input.scene_channel), decoding.interpreter);
  out.interpreter_output = reading.tokens;
  out.interpreter_truncated = reading.truncated;
  out.reasoner_input = assemble_reasoner_prompt(input, reading.tokens);
  out.description = TokenSequence(out.reasoner_input.begin(),
                                  std::find(out.reasoner_input.begin(), out.reasoner_input.end(), tok::sep));
  const Generation response = reasoner(out.reasoner_input, decoding.reasoner);
  out.response = response.tokens;
  out.reasoner_truncated = response.truncated;
  out.extracted = extract_answer(out.response);
  if (gt) out.reward = outcome_reward(out.response, *gt);
  return out;
}

// ---------------------------------------------------------------------------

std::string format_log(const RlBatchLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "step=%d epoch=%d reward=%.6f groups=%d skipped=%d objective=%.9f kl=%.9f clip=%.6f grad_norm=%.9f",
                e.step, e.epoch, e.mean_reward, e.groups, e.skipped, e.objective, e.mean_kl, e.clip_fraction,
                e.grad_norm);
  return buf;
}

namespace {

RlBatchLog summarize(int step, int epoch, const std::vector<GrpoStepReport>& reports) {
  RlBatchLog log;
  log.step = step;
  log.epoch = epoch;
  log.groups = static_cast<int>(reports.size());
  int active = 0;
  for (const auto& r : reports) {
    log.mean_reward += r.mean_reward;
    if (r.skipped) {
      ++log.skipped;
      continue;
    }
    ++active;
    log.objective += r.objective;
    log.mean_kl += r.mean_kl;
    log.clip_fraction += r.clip_fraction;
    log.grad_norm = r.grad_norm;
  }
  if (!reports.empty()) log.mean_reward /= static_cast<double>(reports.size());
  if (active > 0) {
    log.objective /= active;
    log.mean_kl /= active;
    log.clip_fraction /= active;
  }
  return log;
}

std::vector<double> logprob_under(const PolicyModel& model, const TokenIds& prompt, const TokenIds& output) {
  return model.logprob(prompt, output).per_token;
}

// Calls body(batch of problem indices, epoch) for every batch of every epoch.
template <class Body>
void for_each_batch(std::size_t n, const TrainingConfig& config, Body body) {
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      body(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(end)),
           epoch);
    }
  }
}

geo::PipelineInput input_of(const CorpusRecord& r) { return {r.text, r.scene}; }

}  // namespace

std::vector<RlBatchLog> stage2_train(PolicyParameters& interpreter, OptimizerState& state,
                                     const PolicyParameters& reasoner, const std::vector<CorpusProblem>& problems,
                                     const TrainingConfig& config, int reasoner_max_len, const Vocabulary& vocab,
                                     const RlLogSink& sink) {
  validate(config);
  if (problems.empty()) fail(ErrorKind::argument, "stage 2 needs at least one problem");
  state.learning_rate = config.learning_rate;
  const PolicyParameters reference = interpreter;
  const PolicyModel ref_model(reference);
  const PolicyModel reasoner_model(reasoner);
  const Generator reason = policy_generator(reasoner_model, vocab);
  Decoding reasoner_decoding;  // greedy
  reasoner_decoding.max_len = reasoner_max_len;

  std::vector<RlBatchLog> logs;
  int step = 0;
  for_each_batch(problems.size(), config, [&](const std::vector<std::size_t>& batch, int epoch) {
    const PolicyModel model(interpreter);
    std::vector<RolloutGroup> groups;
    for (const std::size_t p : batch) {
      const auto variant = kStage2Variants[(p + static_cast<std::size_t>(epoch)) % kStage2Variants.size()];
      const CorpusRecord& record = problems[p].rendition(variant);
      const auto input = input_of(record);
      RolloutGroup g;
      g.problem_id = p;
      g.prompt = vocab.encode(interpreter_prompt(record.scene));
      for (int i = 0; i < config.G; ++i) {
        Decoding dec;
        dec.greedy = false;
        dec.temperature = config.temperature;
        dec.max_len = config.max_len;
        dec.seed = mix_seed(mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)),
                            p * static_cast<std::uint64_t>(config.G) + static_cast<std::uint64_t>(i));
        const Sample s = model.sample(g.prompt, dec);
        const auto reasoner_input = assemble_reasoner_prompt(input, vocab.decode(s.output));
        const auto response = reason(reasoner_input, reasoner_decoding);
        g.rewards.push_back(outcome_reward(response.tokens, problems[p].gt).value);
        g.logp_old.push_back(s.per_token_logprob);
        g.logp_ref.push_back(logprob_under(ref_model, g.prompt, s.output));
        g.outputs.push_back(s.output);
      }
      groups.push_back(std::move(g));
    }
    const auto reports = grpo_step(interpreter, groups, config, state);
    logs.push_back(summarize(++step, epoch, reports));
    if (sink) sink(logs.back());
  });
  return logs;
}

std::vector<RlBatchLog> stage3_train(const PolicyParameters& interpreter, PolicyParameters& reasoner,
                                     OptimizerState& state, const std::vector<CorpusProblem>& problems,
                                     const TrainingConfig& config, int interpreter_max_len, const Vocabulary& vocab,
                                     const RlLogSink& sink) {
  validate(config);
  if (problems.empty()) fail(ErrorKind::argument, "stage 3 needs at least one problem");
  state.learning_rate = config.learning_rate;
  const PolicyParameters reference = reasoner;
  const PolicyModel ref_model(reference);
  const PolicyModel interpreter_model(interpreter);
  const Generator interpret = policy_generator(interpreter_model, vocab);
  Decoding interpreter_decoding;  // greedy
  interpreter_decoding.max_len = interpreter_max_len;

  // The interpreter is frozen and greedy, so each rendition's reasoner prompt
  // is fixed for the whole stage.
  std::vector<std::array<TokenIds, geo::kAllVariants.size()>> prompts(problems.size());
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (std::size_t v = 0; v < geo::kAllVariants.size(); ++v) {
      const auto input = input_of(problems[p].rendition(geo::kAllVariants[v]));
      const auto reading = interpret(interpreter_prompt(input.scene_channel), interpreter_decoding);
      prompts[p][v] = vocab.encode(assemble_reasoner_prompt(input, reading.tokens));
    }
  }

  std::vector<RlBatchLog> logs;
  int step = 0;
  for_each_batch(problems.size(), config, [&](const std::vector<std::size_t>& batch, int epoch) {
    const PolicyModel model(reasoner);
    std::vector<RolloutGroup> groups;
    for (const std::size_t p : batch) {
      const std::size_t v = (p + static_cast<std::size_t>(epoch)) % geo::kAllVariants.size();
      RolloutGroup g;
      g.problem_id = p;
      g.prompt = prompts[p][v];
      for (int i = 0; i < config.G; ++i) {
        Decoding dec;
        dec.greedy = false;
        dec.temperature = config.temperature;
        dec.max_len = config.max_len;
        dec.seed = mix_seed(mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)),
                            p * static_cast<std::uint64_t>(config.G) + static_cast<std::uint64_t>(i));
        const Sample s = model.sample(g.prompt, dec);
        g.rewards.push_back(outcome_reward(vocab.decode(s.output), problems[p].gt).value);
        g.logp_old.push_back(s.per_token_logprob);
        g.logp_ref.push_back(logprob_under(ref_model, g.prompt, s.output));
        g.outputs.push_back(s.output);
      }
      groups.push_back(std::move(g));
    }
    const auto reports = grpo_step(reasoner, groups, config, state);
    logs.push_back(summarize(++step, epoch, reports));
    if (sink) sink(logs.back());
  });
  return logs;
}

// ---------------------------------------------------------------------------

const VariantScore& EvalReport::score(geo::Variant variant) const {
  for (const auto& s : variants) {
    if (s.variant == variant) return s;
  }
  fail(ErrorKind::contract, "report has no " + std::string(geo::to_string(variant)) + " row");
}

EvalReport evaluate(const Generator& interpreter, const Generator& reasoner, const std::vector<CorpusProblem>& testset,
                    const PipelineDecoding& decoding, const std::vector<geo::Variant>& variants) {
  EvalReport report;
  for (const auto variant : variants) {
    VariantScore score{variant};
    for (const auto& problem : testset) {
      const auto& record = problem.rendition(variant);
      const auto out = run_pipeline(interpreter, reasoner, input_of(record), decoding, problem.gt);
      score.correct += out.reward.value;
      ++score.total;
    }
    report.correct += score.correct;
    report.total += score.total;
    report.variants.push_back(score);
  }
  return report;
}

std::string format_report(const EvalReport& report) {
  std::string out = "variant,correct,total,accuracy\n";
  for (const auto& s : report.variants) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.1f\n", std::string(geo::to_string(s.variant)).c_str(), s.correct,
                  s.total, s.accuracy());
    out += buf;
  }
  return out;
}

void emit_report(const EvalReport& report, const std::string& path) { write_file(path, format_report(report)); }

}  // namespace dvlr
