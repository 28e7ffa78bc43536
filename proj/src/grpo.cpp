#include "dvlr/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "dvlr/common.hpp"

namespace dvlr {

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) fail(ErrorKind::argument, "advantages need a group of at least 2");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) fail(ErrorKind::contract, "degenerate group: all rewards equal");
  std::vector<double> a;
  a.reserve(rewards.size());
  for (double r : rewards) a.push_back((r - mean) / sd);
  return a;
}

bool should_skip(const std::vector<double>& rewards) {
  return std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) == rewards.end();
}

bool kl_clamped(double logp_current, double logp_ref) {
  const double diff = logp_ref - logp_current;
  return diff < -kKlClamp || diff > kKlClamp;
}

double kl_estimate(double logp_current, double logp_ref) {
  const double diff = std::clamp(logp_ref - logp_current, -kKlClamp, kKlClamp);
  // u - log u - 1 loses every digit to cancellation near u = 1; expm1 keeps them.
  return std::expm1(diff) - diff;
}

namespace {

void check_group(const RolloutGroup& g) {
  if (!g.advantages) fail(ErrorKind::contract, "group has no advantages (skipped or not normalized)");
  const std::size_t n = g.size();
  if (g.advantages->size() != n || g.logp_old.size() != n || g.logp_current.size() != n ||
      g.logp_ref.size() != n || g.rewards.size() != n) {
    fail(ErrorKind::contract, "rollout group fields are not aligned");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = g.outputs[i].size();
    if (len == 0 || g.logp_old[i].size() != len || g.logp_current[i].size() != len || g.logp_ref[i].size() != len) {
      fail(ErrorKind::contract, "log-probability lists are not aligned with output " + std::to_string(i));
    }
  }
}

// Clipped surrogate value and whether the clipped branch is strictly smaller.
struct Surrogate {
  double value;
  bool clip_active;
};

Surrogate surrogate(double ratio, double advantage, double eps) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  return clipped < unclipped ? Surrogate{clipped, true} : Surrogate{unclipped, false};
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double grpo_objective(const RolloutGroup& g, const TrainingConfig& config, GrpoStepReport* report) {
  check_group(g);
  const std::size_t G = g.size();
  const double eps = config.clip_epsilon;
  double objective = 0.0;
  double kl_total = 0.0;
  std::size_t tokens = 0, clipped = 0, clamped = 0;
  for (std::size_t i = 0; i < G; ++i) {
    const double A = (*g.advantages)[i];
    const std::size_t len = g.outputs[i].size();
    double surr = 0.0, kl = 0.0;
    if (config.ratio_mode == RatioMode::sequence) {
      const double ratio = std::exp(sum(g.logp_current[i]) - sum(g.logp_old[i]));
      const auto s = surrogate(ratio, A, eps);
      surr = s.value * static_cast<double>(len);
      if (s.clip_active) clipped += len;
    }
    for (std::size_t t = 0; t < len; ++t) {
      if (config.ratio_mode == RatioMode::token) {
        const auto s = surrogate(std::exp(g.logp_current[i][t] - g.logp_old[i][t]), A, eps);
        surr += s.value;
        if (s.clip_active) ++clipped;
      }
      kl += kl_estimate(g.logp_current[i][t], g.logp_ref[i][t]);
      if (kl_clamped(g.logp_current[i][t], g.logp_ref[i][t])) ++clamped;
    }
    const double n = static_cast<double>(len);
    objective += (surr - config.kl_beta * kl) / n;
    kl_total += kl / n;
    tokens += len;
  }
  objective /= static_cast<double>(G);
  if (report) {
    report->objective = objective;
    report->mean_reward = sum(g.rewards) / static_cast<double>(G);
    report->skipped = false;
    report->mean_kl = kl_total / static_cast<double>(G);
    report->clip_fraction = static_cast<double>(clipped) / static_cast<double>(tokens);
    report->kl_clamped = clamped;
  }
  return objective;
}

std::vector<std::vector<double>> grpo_token_weights(const RolloutGroup& g, const TrainingConfig& config) {
  check_group(g);
  const std::size_t G = g.size();
  const double eps = config.clip_epsilon;
  const double beta = config.kl_beta;
  std::vector<std::vector<double>> weights(G);
  for (std::size_t i = 0; i < G; ++i) {
    const double A = (*g.advantages)[i];
    const std::size_t len = g.outputs[i].size();
    const double n = static_cast<double>(len);
    const double scale = 1.0 / (static_cast<double>(G) * n);
    double seq_term = 0.0;
    if (config.ratio_mode == RatioMode::sequence) {
      const double ratio = std::exp(sum(g.logp_current[i]) - sum(g.logp_old[i]));
      // d(len * s)/d logp_t = len * ratio * A on the unclipped branch.
      if (!surrogate(ratio, A, eps).clip_active) seq_term = n * ratio * A;
    }
    auto& w = weights[i];
    w.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      double d = seq_term;
      if (config.ratio_mode == RatioMode::token) {
        const double ratio = std::exp(g.logp_current[i][t] - g.logp_old[i][t]);
        if (!surrogate(ratio, A, eps).clip_active) d = ratio * A;
      }
      const double cur = g.logp_current[i][t];
      const double ref = g.logp_ref[i][t];
      // d(-beta kl)/d cur = beta (u - 1), zero where the clamp is active.
      if (!kl_clamped(cur, ref)) d += beta * std::expm1(ref - cur);
      w[t] = scale * d;
    }
  }
  return weights;
}

Gradient grpo_grad(const PolicyParameters& params, const RolloutGroup& g, const TrainingConfig& config) {
  const auto weights = grpo_token_weights(g, config);
  const PolicyModel model(params);
  GradientAccumulator acc(model);
  for (std::size_t i = 0; i < g.size(); ++i) acc.add(g.prompt, g.outputs[i], weights[i]);
  return acc.finish();
}

void refresh_current(const PolicyModel& model, RolloutGroup& g) {
  g.logp_current.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) g.logp_current[i] = model.logprob(g.prompt, g.outputs[i]).per_token;
}

std::vector<GrpoStepReport> grpo_step(PolicyParameters& params, std::vector<RolloutGroup>& groups,
                                      const TrainingConfig& config, OptimizerState& state) {
  std::vector<GrpoStepReport> reports(groups.size());
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto& g = groups[k];
    reports[k].mean_reward = g.rewards.empty() ? 0.0 : sum(g.rewards) / static_cast<double>(g.rewards.size());
    if (should_skip(g.rewards)) {
      g.advantages.reset();
      reports[k].skipped = true;
      continue;
    }
    g.advantages = compute_advantages(g.rewards);
    active.push_back(k);
  }
  if (active.empty()) return reports;

  const double inv = 1.0 / static_cast<double>(active.size());
  for (int it = 0; it < config.inner_iterations; ++it) {
    const PolicyModel model(params);
    GradientAccumulator acc(model);
    for (const std::size_t k : active) {
      auto& g = groups[k];
      refresh_current(model, g);
      grpo_objective(g, config, &reports[k]);
      auto weights = grpo_token_weights(g, config);
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (auto& x : weights[i]) x *= inv;
        acc.add(g.prompt, g.outputs[i], weights[i]);
      }
    }
    const Gradient grad = acc.finish();
    const double norm = grad.norm();
    for (const std::size_t k : active) reports[k].grad_norm = norm;
    apply_update(params, grad, state);
  }
  return reports;
}

}  // namespace dvlr
