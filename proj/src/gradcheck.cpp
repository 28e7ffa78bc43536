#include "dvlr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dvlr/common.hpp"
#include "dvlr/grpo.hpp"
#include "dvlr/sft.hpp"

namespace dvlr {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

double GradcheckSuite::max_error() const { return *std::max_element(block_error.begin(), block_error.end()); }

double GradcheckReport::max_error() const {
  double m = 0.0;
  for (const auto& s : suites) m = std::max(m, s.max_error());
  return m;
}

namespace {

struct TinyPolicy {
  Vocabulary vocab;
  PolicyParameters params;
};

TinyPolicy tiny_policy(Rng& rng) {
  const int V = rng.range(5, 20);
  std::vector<std::string> tokens = {std::string(tok::pad), std::string(tok::eos)};
  for (int i = 2; i < V; ++i) tokens.push_back("t" + std::to_string(i));
  Vocabulary vocab(tokens);
  auto params = init_policy(vocab, rng.range(1, 4), rng.range(1, 4), rng.range(1, 8), rng.next());
  // Sharpen the fresh distributions so the check is not run near uniform.
  params.w.scale(2.0);
  for (auto& b : params.w.hidden_b) b = rng.uniform01() - 0.5;
  for (auto& b : params.w.output_b) b = rng.uniform01() - 0.5;
  return {std::move(vocab), std::move(params)};
}

TokenIds random_tokens(Rng& rng, int V, int n) {
  TokenIds out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(V))));
  return out;
}

TokenIds random_output(Rng& rng, int V, int eos) {
  TokenIds out = random_tokens(rng, V, rng.range(0, 5));
  out.push_back(eos);
  return out;
}

void sabotage(Gradient& g, double amount) {
  if (amount == 0.0) return;
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) g.block(b)[0] += amount;
}

void merge(GradcheckSuite& suite, const std::array<double, ParamBlocks::kBlockCount>& err) {
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) suite.block_error[b] = std::max(suite.block_error[b], err[b]);
  ++suite.instances;
}

GradcheckSuite check_sft(const GradcheckOptions& opt) {
  GradcheckSuite suite{"sft_loss"};
  Rng rng(mix_seed(opt.seed, 1));
  for (int n = 0; n < opt.instances; ++n) {
    const auto tiny = tiny_policy(rng);
    const int V = tiny.params.dims.V;
    std::vector<SftExample> data;
    const int count = rng.range(1, 4);
    for (int i = 0; i < count; ++i) {
      data.push_back({random_tokens(rng, V, rng.range(0, 4)), random_output(rng, V, tiny.params.eos_id)});
    }
    std::vector<std::size_t> batch(data.size());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    // The analytic gradient ascends the mean log-likelihood, i.e. descends
    // the loss; compare against -d(loss).
    Gradient g = sft_batch_gradient(tiny.params, data, batch);
    sabotage(g, opt.sabotage);
    const auto loss_neg = [&](const PolicyParameters& p) {
      double nll = 0.0;
      sft_batch_gradient(p, data, batch, &nll);
      return -nll;
    };
    merge(suite, compare_gradient(tiny.params, g, loss_neg, opt.step));
  }
  return suite;
}

bool near_kink(const RolloutGroup& g, const TrainingConfig& config) {
  auto near = [&](double ratio) {
    return std::abs(ratio - (1.0 + config.clip_epsilon)) < 1e-3 || std::abs(ratio - (1.0 - config.clip_epsilon)) < 1e-3;
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    double cur = 0.0, old = 0.0;
    for (std::size_t t = 0; t < g.outputs[i].size(); ++t) {
      if (near(std::exp(g.logp_current[i][t] - g.logp_old[i][t]))) return true;
      cur += g.logp_current[i][t];
      old += g.logp_old[i][t];
    }
    if (near(std::exp(cur - old))) return true;
  }
  return false;
}

GradcheckSuite check_grpo(const GradcheckOptions& opt, RatioMode mode) {
  GradcheckSuite suite{mode == RatioMode::token ? "grpo_token" : "grpo_sequence"};
  Rng rng(mix_seed(opt.seed, mode == RatioMode::token ? 2 : 3));
  TrainingConfig config;
  config.ratio_mode = mode;
  config.clip_epsilon = 0.2;
  config.kl_beta = 0.05;
  while (suite.instances < opt.instances) {
    const auto tiny = tiny_policy(rng);
    const int V = tiny.params.dims.V;
    const PolicyModel model(tiny.params);
    RolloutGroup g;
    g.prompt = random_tokens(rng, V, rng.range(0, 4));
    const int G = rng.range(2, 5);
    for (int i = 0; i < G; ++i) {
      g.outputs.push_back(random_output(rng, V, tiny.params.eos_id));
      g.rewards.push_back(static_cast<double>(rng.below(2)));
    }
    if (should_skip(g.rewards)) g.rewards[0] = 1.0 - g.rewards[0];
    g.advantages = compute_advantages(g.rewards);
    refresh_current(model, g);
    // Old and reference policies differ from the current one so that both
    // clip branches and the KL gradient are exercised.
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto old = g.logp_current[i];
      auto ref = g.logp_current[i];
      for (auto& x : old) x += 0.6 * (rng.uniform01() - 0.5);
      for (auto& x : ref) x += 2.0 * (rng.uniform01() - 0.5);
      g.logp_old.push_back(old);
      g.logp_ref.push_back(ref);
    }
    if (near_kink(g, config)) continue;
    Gradient grad = grpo_grad(tiny.params, g, config);
    sabotage(grad, opt.sabotage);
    const auto objective = [&](const PolicyParameters& p) {
      RolloutGroup probe = g;
      refresh_current(PolicyModel(p), probe);
      return grpo_objective(probe, config);
    };
    merge(suite, compare_gradient(tiny.params, grad, objective, opt.step));
  }
  return suite;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  report.tolerance = options.tolerance;
  report.suites.push_back(check_sft(options));
  report.suites.push_back(check_grpo(options, RatioMode::token));
  report.suites.push_back(check_grpo(options, RatioMode::sequence));
  return report;
}

std::string format_gradcheck(const GradcheckReport& report) {
  std::string out;
  char buf[160];
  for (const auto& s : report.suites) {
    for (int b = 0; b < ParamBlocks::kBlockCount; ++b) {
      std::snprintf(buf, sizeof buf, "%-14s %-10s instances=%d max_rel_error=%.3e\n", s.name.c_str(),
                    ParamBlocks::block_name(b), s.instances, s.block_error[b]);
      out += buf;
    }
  }
  std::snprintf(buf, sizeof buf, "max_rel_error=%.3e tolerance=%.1e %s\n", report.max_error(), report.tolerance,
                report.passed() ? "PASS" : "FAIL");
  out += buf;
  return out;
}

}  // namespace dvlr
