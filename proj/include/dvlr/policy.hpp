#pragma once

// Fixed-context autoregressive policy: the K most recent tokens are embedded,
// concatenated, passed through a tanh hidden layer and a softmax output layer.
// Gradients of per-token log-probabilities are computed by hand.

#include <cstdint>
#include <vector>

#include "dvlr/vocabulary.hpp"

namespace dvlr {

enum class Role : std::uint8_t { interpreter = 0, reasoner = 1 };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

// Parameter-shaped storage shared by parameters, gradients and moments.
struct ParamBlocks {
  std::vector<double> embedding;  // V x d
  std::vector<double> hidden_w;   // (K*d) x H, row k*d + i holds slot k, coordinate i
  std::vector<double> hidden_b;   // H
  std::vector<double> output_w;   // H x V
  std::vector<double> output_b;   // V

  static constexpr int kBlockCount = 5;
  static const char* block_name(int index);
  std::vector<double>& block(int index);
  const std::vector<double>& block(int index) const;

  std::size_t size() const;
  bool same_shape(const ParamBlocks& other) const;
  void set_zero();
  // this += scale * other
  void add_scaled(const ParamBlocks& other, double scale);
  void scale(double factor);
  double norm() const;
  bool all_finite() const;
  bool operator==(const ParamBlocks&) const = default;
};

struct PolicyDims {
  int K = 0;
  int d = 0;
  int H = 0;
  int V = 0;
  bool operator==(const PolicyDims&) const = default;
};

struct PolicyParameters {
  Role role = Role::interpreter;
  PolicyDims dims;
  ParamBlocks w;
  // Taken from the vocabulary; not part of the trainable state.
  int pad_id = 0;
  int eos_id = 0;

  bool operator==(const PolicyParameters&) const = default;
};

using Gradient = ParamBlocks;

Gradient zero_gradient(const PolicyParameters& params);

struct OptimizerState {
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ParamBlocks m;
  ParamBlocks v;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState init_optimizer(const PolicyParameters& params, double learning_rate);

PolicyParameters init_policy(const Vocabulary& vocab, int K, int d, int H, std::uint64_t seed,
                             Role role = Role::interpreter);

struct LogProb {
  double total = 0.0;
  std::vector<double> per_token;
};

struct Sample {
  TokenIds output;
  std::vector<double> per_token_logprob;
  bool truncated = false;
};

struct Decoding {
  bool greedy = true;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_len = 64;
};

// Evaluation view of a parameter set. Construction precomputes the
// per-slot hidden-layer contribution of every token, so it should be built
// once per parameter version and reused for many sequences.
class PolicyModel {
 public:
  explicit PolicyModel(const PolicyParameters& params);

  const PolicyParameters& params() const { return params_; }

  // Log-softmax of the next-token distribution after `context` (prompt plus
  // generated prefix); only the last K tokens are read.
  std::vector<double> next_logprobs(const TokenIds& context) const;

  LogProb logprob(const TokenIds& prompt, const TokenIds& output) const;
  // Stops at EOS or after max_len tokens, in which case EOS is appended.
  // Recorded log-probabilities are untempered.
  Sample sample(const TokenIds& prompt, const Decoding& decoding) const;

 private:
  friend class GradientAccumulator;

  void hidden(const int* context, double* h) const;
  void logits(const double* h, double* z) const;
  void context_at(const TokenIds& prompt, const TokenIds& output, std::size_t t, int* ctx) const;

  const PolicyParameters& params_;
  std::vector<double> slot_table_;  // K x V x H
};

// Sums sum_t weights[t] * grad log pi(output[t] | context_t) over many
// sequences. Embedding and hidden-weight gradients are formed once in
// finish() from per-slot accumulators.
class GradientAccumulator {
 public:
  explicit GradientAccumulator(const PolicyModel& model);

  // Returns the per-token log-probabilities evaluated on the way.
  std::vector<double> add(const TokenIds& prompt, const TokenIds& output, const std::vector<double>& weights);
  Gradient finish() const;

 private:
  const PolicyModel& model_;
  Gradient partial_;
  std::vector<double> slot_grad_;  // K x V x H
  std::vector<char> touched_;      // K x V
};

LogProb logprob(const PolicyParameters& params, const TokenIds& prompt, const TokenIds& output);
LogProb logprob(const PolicyParameters& params, const Vocabulary& vocab, const TokenSequence& prompt,
                const TokenSequence& output);

Sample sample(const PolicyParameters& params, const TokenIds& prompt, double temperature, int max_len,
              std::uint64_t rng_seed);

Gradient weighted_logprob_grad(const PolicyParameters& params, const TokenIds& prompt, const TokenIds& output,
                               const std::vector<double>& weights);

// Adam ascent step with bias correction. Throws a numerical error and leaves
// the inputs untouched if the gradient has a non-finite entry.
void apply_update(PolicyParameters& params, const Gradient& grad, OptimizerState& state);

}  // namespace dvlr
