#include <cmath>
#include <limits>

#include <doctest.h>

#include "dvlr/common.hpp"
#include "dvlr/policy.hpp"
#include "support/oracles.hpp"

using namespace dvlr;
using dvlr::oracle::kind;

namespace {

Vocabulary small_vocab(int V) {
  std::vector<std::string> tokens = {std::string(tok::pad), std::string(tok::eos)};
  for (int i = 2; i < V; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary(tokens);
}

PolicyParameters random_policy(Rng& rng, int V) {
  auto p = init_policy(small_vocab(V), rng.range(1, 4), rng.range(1, 4), rng.range(1, 8), rng.next());
  p.w.scale(2.0);
  for (auto& b : p.w.output_b) b = rng.uniform01() - 0.5;
  for (auto& b : p.w.hidden_b) b = rng.uniform01() - 0.5;
  return p;
}

TokenIds random_ids(Rng& rng, int V, int n) {
  TokenIds out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(V))));
  return out;
}

double logsumexp(const std::vector<double>& z) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("init shapes, zero biases, determinism and dim checks") {
    const auto vocab = small_vocab(7);
    const auto p = init_policy(vocab, 3, 2, 5, 9);
    CHECK(p.dims == PolicyDims{3, 2, 5, 7});
    CHECK(p.w.embedding.size() == 14);
    CHECK(p.w.hidden_w.size() == 30);
    CHECK(p.w.hidden_b == std::vector<double>(5, 0.0));
    CHECK(p.w.output_w.size() == 35);
    CHECK(p.w.output_b == std::vector<double>(7, 0.0));
    CHECK(p == init_policy(vocab, 3, 2, 5, 9));
    CHECK(!(p == init_policy(vocab, 3, 2, 5, 10)));
    CHECK(p.eos_id == vocab.eos_id());
    CHECK(oracle::error_kind_of([&] { init_policy(vocab, 0, 2, 5, 1); }) == kind(ErrorKind::argument));
  }

  TEST_CASE("next-token distribution is normalized and matches a naive forward pass") {
    Rng rng(3);
    for (int n = 0; n < 200; ++n) {
      const int V = rng.range(3, 20);
      const auto p = random_policy(rng, V);
      const PolicyModel model(p);
      const auto ctx = random_ids(rng, V, rng.range(0, 7));
      const auto lp = model.next_logprobs(ctx);
      REQUIRE(lp.size() == static_cast<std::size_t>(V));
      CHECK(std::abs(logsumexp(lp)) < 1e-12);
      const auto naive = oracle::naive_next_logprobs(p, ctx);
      for (int v = 0; v < V; ++v) CHECK(lp[v] == doctest::Approx(naive[v]).epsilon(1e-12));
    }
  }

  TEST_CASE("sequence log-probability is the sum of naive next-token terms") {
    Rng rng(4);
    for (int n = 0; n < 100; ++n) {
      const int V = rng.range(3, 12);
      const auto p = random_policy(rng, V);
      const auto prompt = random_ids(rng, V, rng.range(0, 5));
      const auto output = random_ids(rng, V, rng.range(1, 6));
      const auto lp = logprob(p, prompt, output);
      double sum = 0.0;
      for (double t : lp.per_token) sum += t;
      CHECK(lp.total == doctest::Approx(sum).epsilon(1e-14));
      CHECK(lp.total == doctest::Approx(oracle::naive_sequence_logprob(p, prompt, output)).epsilon(1e-11));
    }
  }

  TEST_CASE("out-of-vocabulary ids are rejected") {
    Rng rng(5);
    const auto p = random_policy(rng, 5);
    CHECK(oracle::error_kind_of([&] { logprob(p, {0, 9}, {1}); }) == kind(ErrorKind::vocabulary));
  }

  TEST_CASE("weighted log-prob gradient matches finite differences") {
    Rng rng(6);
    for (int n = 0; n < 20; ++n) {
      const int V = rng.range(3, 10);
      const auto p = random_policy(rng, V);
      const auto prompt = random_ids(rng, V, rng.range(0, 4));
      const auto output = random_ids(rng, V, rng.range(1, 5));
      std::vector<double> w;
      for (std::size_t t = 0; t < output.size(); ++t) w.push_back(2.0 * rng.uniform01() - 1.0);
      const Gradient g = weighted_logprob_grad(p, prompt, output, w);
      const Gradient num = oracle::numeric_gradient(p, [&](const PolicyParameters& q) {
        const auto lp = logprob(q, prompt, output);
        double s = 0.0;
        for (std::size_t t = 0; t < w.size(); ++t) s += w[t] * lp.per_token[t];
        return s;
      });
      for (int b = 0; b < ParamBlocks::kBlockCount; ++b) {
        for (std::size_t i = 0; i < g.block(b).size(); ++i) {
          const double a = g.block(b)[i], e = num.block(b)[i];
          CHECK(std::abs(a - e) <= 1e-6 * std::max({std::abs(a), std::abs(e), 1e-3}));
        }
      }
    }
  }

  TEST_CASE("accumulator over several sequences equals the sum of single gradients") {
    Rng rng(7);
    const auto p = random_policy(rng, 8);
    const PolicyModel model(p);
    GradientAccumulator acc(model);
    Gradient expected = zero_gradient(p);
    for (int s = 0; s < 4; ++s) {
      const auto prompt = random_ids(rng, 8, 3);
      const auto output = random_ids(rng, 8, 4);
      const std::vector<double> w(output.size(), 0.5 + s);
      acc.add(prompt, output, w);
      expected.add_scaled(weighted_logprob_grad(p, prompt, output, w), 1.0);
    }
    const Gradient got = acc.finish();
    for (int b = 0; b < ParamBlocks::kBlockCount; ++b) {
      for (std::size_t i = 0; i < got.block(b).size(); ++i) {
        CHECK(got.block(b)[i] == doctest::Approx(expected.block(b)[i]).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("sampling frequencies match softmax probabilities") {
    Rng rng(8);
    const auto p = random_policy(rng, 10);
    const PolicyModel model(p);
    const TokenIds prompt = {2, 3};
    for (const double temperature : {1.0, 0.5}) {
      const auto lp = model.next_logprobs(prompt);
      std::vector<double> prob(10);
      double z = 0.0;
      for (int v = 0; v < 10; ++v) z += std::exp(lp[v] / temperature);
      for (int v = 0; v < 10; ++v) prob[v] = std::exp(lp[v] / temperature) / z;
      const int draws = 20000;
      std::vector<int> count(10, 0);
      for (int i = 0; i < draws; ++i) {
        const Sample s = model.sample(prompt, {false, temperature, mix_seed(99, static_cast<std::uint64_t>(i)), 1});
        ++count[s.output.at(0)];
        // recorded log-probabilities are untempered
        CHECK(s.per_token_logprob.at(0) == lp[s.output[0]]);
      }
      for (int v = 0; v < 10; ++v) {
        const double se = std::sqrt(prob[v] * (1 - prob[v]) / draws);
        CHECK(std::abs(count[v] / static_cast<double>(draws) - prob[v]) <= 4 * se + 1e-12);
      }
    }
  }

  TEST_CASE("sampled log-probabilities equal logprob of the sample") {
    Rng rng(9);
    const auto p = random_policy(rng, 9);
    const PolicyModel model(p);
    for (int i = 0; i < 50; ++i) {
      const TokenIds prompt = random_ids(rng, 9, 3);
      const Sample s = model.sample(prompt, {false, 0.7, static_cast<std::uint64_t>(i), 6});
      CHECK(model.logprob(prompt, s.output).per_token == s.per_token_logprob);
    }
  }

  TEST_CASE("greedy picks the argmax with ties to the lowest id") {
    auto p = init_policy(small_vocab(6), 2, 2, 3, 1);
    p.w.output_w.assign(p.w.output_w.size(), 0.0);
    p.w.output_b = {0.0, 0.0, 1.0, 3.0, 1.0, 3.0};
    const PolicyModel model(p);
    const Sample g = model.sample({2}, {true, 1.0, 0, 1});
    CHECK(g.output.front() == 3);
  }

  TEST_CASE("decoding stops at max_len with EOS appended") {
    auto p = init_policy(small_vocab(6), 2, 2, 3, 1);
    p.w.output_b[p.eos_id] = -60.0;
    const PolicyModel model(p);
    const Sample s = model.sample({2}, {false, 1.0, 4, 5});
    CHECK(s.truncated);
    CHECK(s.output.size() == 6);
    CHECK(s.output.back() == p.eos_id);

    p.w.output_b[p.eos_id] = 60.0;
    const PolicyModel stops(p);
    const Sample e = stops.sample({2}, {false, 1.0, 4, 5});
    CHECK(!e.truncated);
    CHECK(e.output == TokenIds{p.eos_id});
  }

  TEST_CASE("sampling is reproducible from its seed") {
    Rng rng(10);
    const auto p = random_policy(rng, 9);
    const PolicyModel model(p);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      CHECK(model.sample({3}, {false, 1.0, seed, 8}).output == model.sample({3}, {false, 1.0, seed, 8}).output);
    }
  }

  TEST_CASE("Adam ascent reaches the maximizer of a concave quadratic") {
    auto p = init_policy(small_vocab(3), 1, 1, 1, 2);
    auto state = init_optimizer(p, 0.05);
    const double target = 0.7;
    for (int step = 0; step < 200; ++step) {
      Gradient g = zero_gradient(p);
      g.output_b[0] = -2.0 * (p.w.output_b[0] - target);
      apply_update(p, g, state);
    }
    CHECK(std::abs(p.w.output_b[0] - target) < 1e-3);
    CHECK(state.step == 200);
  }

  TEST_CASE("first Adam step moves every coordinate by the learning rate") {
    Rng rng(11);
    auto p = random_policy(rng, 6);
    const auto before = p;
    auto state = init_optimizer(p, 0.01);
    Gradient g = zero_gradient(p);
    g.hidden_b[0] = 3.0;
    g.output_w[1] = -0.2;
    apply_update(p, g, state);
    CHECK(p.w.hidden_b[0] - before.w.hidden_b[0] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(p.w.output_w[1] - before.w.output_w[1] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p.w.embedding == before.w.embedding);
  }

  TEST_CASE("non-finite gradient is a numerical error and changes nothing") {
    Rng rng(12);
    auto p = random_policy(rng, 6);
    auto state = init_optimizer(p, 0.01);
    const auto p0 = p;
    const auto s0 = state;
    Gradient g = zero_gradient(p);
    g.embedding[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK(oracle::error_kind_of([&] { apply_update(p, g, state); }) == kind(ErrorKind::numerical));
    CHECK(p == p0);
    CHECK(state == s0);
  }
}
