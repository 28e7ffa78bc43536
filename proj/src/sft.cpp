#include "dvlr/sft.hpp"

#include <algorithm>
#include <cstdio>

#include "dvlr/common.hpp"
#include "dvlr/pipeline.hpp"

namespace dvlr {

SftDatasets build_sft_datasets(const std::vector<CorpusProblem>& problems, const Vocabulary& vocab) {
  return build_sft_epoch(problems, vocab, 0, 0);
}

SftDatasets build_sft_epoch(const std::vector<CorpusProblem>& problems, const Vocabulary& vocab, std::uint64_t seed,
                            int epoch) {
  static constexpr geo::Variant kStyles[] = {geo::Variant::vision_only, geo::Variant::vision_dominant,
                                             geo::Variant::text_lite};
  SftDatasets out;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const auto& p = problems[i];
    const CorpusRecord& r = p.rendition(kStyles[(i + static_cast<std::size_t>(epoch)) % 3]);
    out.interpreter.push_back(
        {vocab.encode(interpreter_prompt(r.scene)), vocab.encode(interpreter_target(r.scene, p.description))});
    std::array<int, 4> choices = p.choices;
    char gt = p.gt;
    if (epoch > 0) {
      const int value = choices[static_cast<std::size_t>(gt - 'A')];
      rng.shuffle(choices);
      gt = static_cast<char>('A' + (std::find(choices.begin(), choices.end(), value) - choices.begin()));
    }
    out.reasoner.push_back({vocab.encode(reasoner_prompt(p.description, p.question, geo::choice_tokens(choices))),
                            vocab.encode(reasoner_target(p.solution, gt))});
  }
  return out;
}

SftDatasets build_sft_datasets(int n_problems, std::uint64_t seed, const Vocabulary& vocab) {
  if (n_problems < 1) fail(ErrorKind::argument, "n_problems must be >= 1");
  return build_sft_datasets(group_problems(generate_records(seed, 0, static_cast<std::uint64_t>(n_problems))), vocab);
}

Gradient sft_batch_gradient(const PolicyParameters& params, const std::vector<SftExample>& dataset,
                            const std::vector<std::size_t>& batch, double* mean_nll) {
  std::size_t tokens = 0;
  for (const std::size_t i : batch) tokens += dataset[i].target.size();
  if (tokens == 0) fail(ErrorKind::argument, "batch has no target tokens");
  const double w = 1.0 / static_cast<double>(tokens);
  const PolicyModel model(params);
  GradientAccumulator acc(model);
  double nll = 0.0;
  for (const std::size_t i : batch) {
    const auto& ex = dataset[i];
    const auto logps = acc.add(ex.prompt, ex.target, std::vector<double>(ex.target.size(), w));
    for (double lp : logps) nll -= lp;
  }
  if (mean_nll) *mean_nll = nll * w;
  return acc.finish();
}

SftResult sft_train(PolicyParameters& params, OptimizerState& state, const std::vector<SftExample>& dataset,
                    const TrainingConfig& config, const std::function<void(const SftBatchLog&)>& on_batch) {
  if (dataset.empty()) fail(ErrorKind::argument, "SFT dataset is empty");
  return sft_train(params, state, [&](int) { return dataset; }, config, on_batch);
}

SftResult sft_train(PolicyParameters& params, OptimizerState& state, const EpochData& epoch_data,
                    const TrainingConfig& config, const std::function<void(const SftBatchLog&)>& on_batch) {
  validate(config);
  state.learning_rate = config.learning_rate;
  SftResult result;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<SftExample> dataset = epoch_data(epoch);
    if (dataset.empty()) fail(ErrorKind::argument, "SFT dataset is empty");
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      double loss = 0.0;
      const Gradient grad = sft_batch_gradient(params, dataset, batch, &loss);
      apply_update(params, grad, state);
      result.loss_curve.push_back(loss);
      const SftBatchLog entry{++step, epoch, loss};
      result.log.push_back(entry);
      if (on_batch) on_batch(entry);
    }
  }
  return result;
}

std::string format_log(const SftBatchLog& e) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "step=%d epoch=%d loss=%.9f", e.step, e.epoch, e.mean_loss);
  return buf;
}

}  // namespace dvlr
