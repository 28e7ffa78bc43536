#pragma once

#include <functional>
#include <vector>

#include "dvlr/config.hpp"
#include "dvlr/corpus.hpp"
#include "dvlr/policy.hpp"

namespace dvlr {

struct SftExample {
  TokenIds prompt;
  TokenIds target;  // ends with EOS
};

struct SftDatasets {
  std::vector<SftExample> interpreter;
  std::vector<SftExample> reasoner;
};

// Interpreter: scene channel -> embedded-text readout, <sep>, refined
// description. Problems cycle through question+choices embedded, question
// embedded, and no embedded text. Reasoner: description, <sep>, question,
// choices -> solution steps, ANSWER, label.
SftDatasets build_sft_datasets(const std::vector<CorpusProblem>& problems, const Vocabulary& vocab);
SftDatasets build_sft_datasets(int n_problems, std::uint64_t seed, const Vocabulary& vocab);

// Per-epoch view of the same problems. Epoch 0 is build_sft_datasets(problems).
// Later epochs rotate each problem's interpreter style and present the
// reasoner with the choices in a seeded new order (label follows the value),
// so label selection has to be read from the prompt rather than memorized.
SftDatasets build_sft_epoch(const std::vector<CorpusProblem>& problems, const Vocabulary& vocab, std::uint64_t seed,
                            int epoch);

struct SftBatchLog {
  int step = 0;
  int epoch = 0;
  double mean_loss = 0.0;
};

struct SftResult {
  std::vector<double> loss_curve;  // per-batch mean token NLL
  std::vector<SftBatchLog> log;
};

// Gradient of the mean per-token log-likelihood of a batch: weights
// 1 / (batch token count). Also returns the batch mean NLL.
Gradient sft_batch_gradient(const PolicyParameters& params, const std::vector<SftExample>& dataset,
                            const std::vector<std::size_t>& batch, double* mean_nll = nullptr);

// Minibatch Adam on mean per-token NLL; batch order reshuffled per epoch
// from config.seed.
SftResult sft_train(PolicyParameters& params, OptimizerState& state, const std::vector<SftExample>& dataset,
                    const TrainingConfig& config, const std::function<void(const SftBatchLog&)>& on_batch = {});

// Same loop with the dataset supplied per epoch.
using EpochData = std::function<std::vector<SftExample>(int epoch)>;
SftResult sft_train(PolicyParameters& params, OptimizerState& state, const EpochData& dataset,
                    const TrainingConfig& config, const std::function<void(const SftBatchLog&)>& on_batch = {});

std::string format_log(const SftBatchLog& entry);

}  // namespace dvlr
