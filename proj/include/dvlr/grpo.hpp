#pragma once

// Group-relative policy optimization: normalized group advantages, the
// u - log u - 1 KL estimator, the clipped surrogate objective and its exact
// gradient.

#include <optional>
#include <vector>

#include "dvlr/config.hpp"
#include "dvlr/policy.hpp"

namespace dvlr {

inline constexpr double kKlClamp = 50.0;

struct RolloutGroup {
  std::size_t problem_id = 0;
  TokenIds prompt;
  std::vector<TokenIds> outputs;
  std::vector<std::vector<double>> logp_old;      // sampling-time policy
  std::vector<std::vector<double>> logp_current;  // refreshed before each update
  std::vector<std::vector<double>> logp_ref;      // frozen reference policy
  std::vector<double> rewards;
  std::optional<std::vector<double>> advantages;

  std::size_t size() const { return outputs.size(); }
};

struct GrpoStepReport {
  double objective = 0.0;
  double mean_reward = 0.0;
  bool skipped = false;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // norm of the batch gradient
  std::size_t kl_clamped = 0;  // tokens whose log-ratio hit the clamp
};

// (r_i - mean) / std with the population std. Throws a contract error on a
// zero-variance group.
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// True iff every reward is equal.
bool should_skip(const std::vector<double>& rewards);

// u - log u - 1 with u = exp(logp_ref - logp_current); the log-ratio is
// clamped to [-50, 50] first.
double kl_estimate(double logp_current, double logp_ref);
bool kl_clamped(double logp_current, double logp_ref);

double grpo_objective(const RolloutGroup& group, const TrainingConfig& config, GrpoStepReport* report = nullptr);

// Per-token weights w such that sum_t w_t grad logp_current_t is the
// gradient of grpo_objective.
std::vector<std::vector<double>> grpo_token_weights(const RolloutGroup& group, const TrainingConfig& config);

// Exact gradient of grpo_objective with respect to the current policy, whose
// log-probabilities must already be in group.logp_current.
Gradient grpo_grad(const PolicyParameters& params, const RolloutGroup& group, const TrainingConfig& config);

// Recomputes group.logp_current under `params`.
void refresh_current(const PolicyModel& model, RolloutGroup& group);

// One batch: skipped groups are dropped, the rest get advantages and
// contribute inner_iterations averaged updates. Returns one report per group
// (from the last inner iteration).
std::vector<GrpoStepReport> grpo_step(PolicyParameters& params, std::vector<RolloutGroup>& groups,
                                      const TrainingConfig& config, OptimizerState& state);

}  // namespace dvlr
