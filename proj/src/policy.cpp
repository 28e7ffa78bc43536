#include "dvlr/policy.hpp"

#include <algorithm>
#include <cmath>

#include "dvlr/common.hpp"

namespace dvlr {

std::string_view to_string(Role role) { return role == Role::interpreter ? "interpreter" : "reasoner"; }

Role parse_role(std::string_view name) {
  if (name == "interpreter") return Role::interpreter;
  if (name == "reasoner") return Role::reasoner;
  fail(ErrorKind::argument, "unknown role '" + std::string(name) + "'");
}

const char* ParamBlocks::block_name(int index) {
  static const char* names[kBlockCount] = {"embedding", "hidden_w", "hidden_b", "output_w", "output_b"};
  return names[index];
}

std::vector<double>& ParamBlocks::block(int index) {
  return const_cast<std::vector<double>&>(static_cast<const ParamBlocks*>(this)->block(index));
}

const std::vector<double>& ParamBlocks::block(int index) const {
  switch (index) {
    case 0: return embedding;
    case 1: return hidden_w;
    case 2: return hidden_b;
    case 3: return output_w;
    default: return output_b;
  }
}

std::size_t ParamBlocks::size() const {
  std::size_t n = 0;
  for (int b = 0; b < kBlockCount; ++b) n += block(b).size();
  return n;
}

bool ParamBlocks::same_shape(const ParamBlocks& other) const {
  for (int b = 0; b < kBlockCount; ++b) {
    if (block(b).size() != other.block(b).size()) return false;
  }
  return true;
}

void ParamBlocks::set_zero() {
  for (int b = 0; b < kBlockCount; ++b) std::fill(block(b).begin(), block(b).end(), 0.0);
}

void ParamBlocks::add_scaled(const ParamBlocks& other, double s) {
  if (!same_shape(other)) fail(ErrorKind::argument, "parameter shape mismatch");
  for (int b = 0; b < kBlockCount; ++b) {
    auto& dst = block(b);
    const auto& src = other.block(b);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
  }
}

void ParamBlocks::scale(double factor) {
  for (int b = 0; b < kBlockCount; ++b) {
    for (auto& x : block(b)) x *= factor;
  }
}

double ParamBlocks::norm() const {
  double s = 0.0;
  for (int b = 0; b < kBlockCount; ++b) {
    for (double x : block(b)) s += x * x;
  }
  return std::sqrt(s);
}

bool ParamBlocks::all_finite() const {
  for (int b = 0; b < kBlockCount; ++b) {
    for (double x : block(b)) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

Gradient zero_gradient(const PolicyParameters& params) {
  Gradient g = params.w;
  g.set_zero();
  return g;
}

OptimizerState init_optimizer(const PolicyParameters& params, double learning_rate) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  s.m = zero_gradient(params);
  s.v = zero_gradient(params);
  return s;
}

PolicyParameters init_policy(const Vocabulary& vocab, int K, int d, int H, std::uint64_t seed, Role role) {
  if (K < 1 || d < 1 || H < 1) {
    fail(ErrorKind::argument, "policy dims must be positive (K=" + std::to_string(K) + ", d=" + std::to_string(d) +
                                  ", H=" + std::to_string(H) + ")");
  }
  PolicyParameters p;
  p.role = role;
  p.pad_id = vocab.pad_id();
  p.eos_id = vocab.eos_id();
  p.dims = {K, d, H, vocab.size()};
  const std::size_t V = static_cast<std::size_t>(vocab.size());
  Rng rng(seed);
  auto fill = [&](std::vector<double>& w, std::size_t n, double fan_in) {
    const double scale = 1.0 / std::sqrt(fan_in);
    w.resize(n);
    for (auto& x : w) x = scale * (2.0 * rng.uniform01() - 1.0);
  };
  // An embedding row is a lookup of a one-hot input, so its fan-in is 1.
  fill(p.w.embedding, V * d, 1.0);
  fill(p.w.hidden_w, static_cast<std::size_t>(K) * d * H, static_cast<double>(K) * d);
  p.w.hidden_b.assign(H, 0.0);
  fill(p.w.output_w, H * V, H);
  p.w.output_b.assign(V, 0.0);
  return p;
}

// ---------------------------------------------------------------------------

PolicyModel::PolicyModel(const PolicyParameters& params) : params_(params) {
  const auto [K, d, H, V] = params.dims;
  slot_table_.assign(static_cast<std::size_t>(K) * V * H, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int tok = 0; tok < V; ++tok) {
      double* row = &slot_table_[(static_cast<std::size_t>(k) * V + tok) * H];
      const double* e = &params.w.embedding[static_cast<std::size_t>(tok) * d];
      for (int i = 0; i < d; ++i) {
        const double* w = &params.w.hidden_w[(static_cast<std::size_t>(k) * d + i) * H];
        const double ei = e[i];
        for (int j = 0; j < H; ++j) row[j] += ei * w[j];
      }
    }
  }
}

void PolicyModel::context_at(const TokenIds& prompt, const TokenIds& output, std::size_t t, int* ctx) const {
  const int K = params_.dims.K;
  const int pad = params_.pad_id;
  // Slot K-1 holds the most recent token.
  const std::size_t avail = prompt.size() + t;
  for (int k = K - 1, back = 1; k >= 0; --k, ++back) {
    if (static_cast<std::size_t>(back) > avail) {
      ctx[k] = pad;
      continue;
    }
    const std::size_t pos = avail - static_cast<std::size_t>(back);
    ctx[k] = pos < prompt.size() ? prompt[pos] : output[pos - prompt.size()];
  }
}

void PolicyModel::hidden(const int* ctx, double* h) const {
  const auto [K, d, H, V] = params_.dims;
  (void)d;
  std::copy(params_.w.hidden_b.begin(), params_.w.hidden_b.end(), h);
  for (int k = 0; k < K; ++k) {
    const double* row = &slot_table_[(static_cast<std::size_t>(k) * V + ctx[k]) * H];
    for (int j = 0; j < H; ++j) h[j] += row[j];
  }
  for (int j = 0; j < H; ++j) h[j] = std::tanh(h[j]);
}

void PolicyModel::logits(const double* h, double* z) const {
  const int H = params_.dims.H;
  const int V = params_.dims.V;
  std::copy(params_.w.output_b.begin(), params_.w.output_b.end(), z);
  for (int j = 0; j < H; ++j) {
    const double hj = h[j];
    const double* w = &params_.w.output_w[static_cast<std::size_t>(j) * V];
    for (int v = 0; v < V; ++v) z[v] += hj * w[v];
  }
}

namespace {

// In-place log-softmax with max subtraction.
void log_softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  const double lse = m + std::log(s);
  for (auto& x : z) x -= lse;
}

void check_ids(const TokenIds& ids, int V) {
  for (int id : ids) {
    if (id < 0 || id >= V) fail(ErrorKind::vocabulary, "token id " + std::to_string(id) + " outside vocabulary");
  }
}

}  // namespace

std::vector<double> PolicyModel::next_logprobs(const TokenIds& context) const {
  const auto& dims = params_.dims;
  check_ids(context, dims.V);
  std::vector<int> ctx(dims.K);
  TokenIds none;
  context_at(context, none, 0, ctx.data());
  std::vector<double> h(dims.H), z(dims.V);
  hidden(ctx.data(), h.data());
  logits(h.data(), z.data());
  log_softmax(z);
  return z;
}

LogProb PolicyModel::logprob(const TokenIds& prompt, const TokenIds& output) const {
  const auto& dims = params_.dims;
  check_ids(prompt, dims.V);
  check_ids(output, dims.V);
  LogProb out;
  out.per_token.reserve(output.size());
  std::vector<int> ctx(dims.K);
  std::vector<double> h(dims.H), z(dims.V);
  for (std::size_t t = 0; t < output.size(); ++t) {
    context_at(prompt, output, t, ctx.data());
    hidden(ctx.data(), h.data());
    logits(h.data(), z.data());
    log_softmax(z);
    out.per_token.push_back(z[output[t]]);
  }
  for (double lp : out.per_token) out.total += lp;
  return out;
}


Sample PolicyModel::sample(const TokenIds& prompt, const Decoding& decoding) const {
  const auto& dims = params_.dims;
  check_ids(prompt, dims.V);
  if (!decoding.greedy && !(decoding.temperature > 0.0)) fail(ErrorKind::argument, "temperature must be positive");
  if (decoding.max_len < 0) fail(ErrorKind::argument, "max_len must be non-negative");
  Rng rng(decoding.seed);
  Sample out;
  std::vector<int> ctx(dims.K);
  std::vector<double> h(dims.H), z(dims.V), p(dims.V);
  for (;;) {
    const bool at_cap = static_cast<int>(out.output.size()) >= decoding.max_len;
    context_at(prompt, out.output, out.output.size(), ctx.data());
    hidden(ctx.data(), h.data());
    logits(h.data(), z.data());
    int choice;
    if (at_cap) {
      choice = params_.eos_id;
      out.truncated = true;
    } else if (decoding.greedy) {
      choice = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    } else {
      const double m = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (int v = 0; v < dims.V; ++v) s += p[v] = std::exp((z[v] - m) / decoding.temperature);
      const double u = rng.uniform01() * s;
      double acc = 0.0;
      choice = dims.V - 1;
      for (int v = 0; v < dims.V; ++v) {
        acc += p[v];
        if (u < acc) {
          choice = v;
          break;
        }
      }
    }
    log_softmax(z);
    out.output.push_back(choice);
    out.per_token_logprob.push_back(z[choice]);
    if (choice == params_.eos_id) break;
  }
  return out;
}

GradientAccumulator::GradientAccumulator(const PolicyModel& model)
    : model_(model), partial_(zero_gradient(model.params())) {
  const auto& dims = model.params().dims;
  slot_grad_.assign(static_cast<std::size_t>(dims.K) * dims.V * dims.H, 0.0);
  touched_.assign(static_cast<std::size_t>(dims.K) * dims.V, 0);
}

std::vector<double> GradientAccumulator::add(const TokenIds& prompt, const TokenIds& output,
                                             const std::vector<double>& weights) {
  if (weights.size() != output.size()) {
    fail(ErrorKind::argument, "weights length " + std::to_string(weights.size()) + " != output length " +
                                  std::to_string(output.size()));
  }
  const auto& params = model_.params();
  const auto [K, d, H, V] = params.dims;
  (void)d;
  check_ids(prompt, V);
  check_ids(output, V);
  std::vector<double> logps;
  logps.reserve(output.size());
  std::vector<int> ctx(K);
  std::vector<double> h(H), z(V), dh(H);
  for (std::size_t t = 0; t < output.size(); ++t) {
    model_.context_at(prompt, output, t, ctx.data());
    model_.hidden(ctx.data(), h.data());
    model_.logits(h.data(), z.data());
    log_softmax(z);
    logps.push_back(z[output[t]]);
    const double w = weights[t];
    if (w == 0.0) continue;
    // d(w log p_y)/dz = w (onehot(y) - p)
    for (int v = 0; v < V; ++v) z[v] = -w * std::exp(z[v]);
    z[output[t]] += w;
    for (int v = 0; v < V; ++v) partial_.output_b[v] += z[v];
    for (int j = 0; j < H; ++j) {
      const double hj = h[j];
      double* gw = &partial_.output_w[static_cast<std::size_t>(j) * V];
      const double* ow = &params.w.output_w[static_cast<std::size_t>(j) * V];
      double acc = 0.0;
      for (int v = 0; v < V; ++v) {
        gw[v] += hj * z[v];
        acc += ow[v] * z[v];
      }
      dh[j] = acc * (1.0 - hj * hj);
    }
    for (int j = 0; j < H; ++j) partial_.hidden_b[j] += dh[j];
    for (int k = 0; k < K; ++k) {
      const std::size_t cell = static_cast<std::size_t>(k) * V + ctx[k];
      touched_[cell] = 1;
      double* g = &slot_grad_[cell * H];
      for (int j = 0; j < H; ++j) g[j] += dh[j];
    }
  }
  return logps;
}

Gradient GradientAccumulator::finish() const {
  const auto& params = model_.params();
  const auto [K, d, H, V] = params.dims;
  Gradient g = partial_;
  for (int k = 0; k < K; ++k) {
    for (int tok = 0; tok < V; ++tok) {
      const std::size_t cell = static_cast<std::size_t>(k) * V + tok;
      if (!touched_[cell]) continue;
      const double* gs = &slot_grad_[cell * H];
      const double* e = &params.w.embedding[static_cast<std::size_t>(tok) * d];
      double* ge = &g.embedding[static_cast<std::size_t>(tok) * d];
      for (int i = 0; i < d; ++i) {
        const std::size_t row = (static_cast<std::size_t>(k) * d + i) * H;
        const double* w = &params.w.hidden_w[row];
        double* gw = &g.hidden_w[row];
        const double ei = e[i];
        double acc = 0.0;
        for (int j = 0; j < H; ++j) {
          gw[j] += ei * gs[j];
          acc += w[j] * gs[j];
        }
        ge[i] += acc;
      }
    }
  }
  return g;
}

LogProb logprob(const PolicyParameters& params, const TokenIds& prompt, const TokenIds& output) {
  return PolicyModel(params).logprob(prompt, output);
}

LogProb logprob(const PolicyParameters& params, const Vocabulary& vocab, const TokenSequence& prompt,
                const TokenSequence& output) {
  return logprob(params, vocab.encode(prompt), vocab.encode(output));
}

Sample sample(const PolicyParameters& params, const TokenIds& prompt, double temperature, int max_len,
              std::uint64_t rng_seed) {
  Decoding dec;
  dec.greedy = false;
  dec.temperature = temperature;
  dec.max_len = max_len;
  dec.seed = rng_seed;
  return PolicyModel(params).sample(prompt, dec);
}

Gradient weighted_logprob_grad(const PolicyParameters& params, const TokenIds& prompt, const TokenIds& output,
                               const std::vector<double>& weights) {
  const PolicyModel model(params);
  GradientAccumulator acc(model);
  acc.add(prompt, output, weights);
  return acc.finish();
}

void apply_update(PolicyParameters& params, const Gradient& grad, OptimizerState& state) {
  if (!params.w.same_shape(grad) || !params.w.same_shape(state.m) || !params.w.same_shape(state.v)) {
    fail(ErrorKind::argument, "gradient or optimizer state shape does not match parameters");
  }
  if (!grad.all_finite()) fail(ErrorKind::numerical, "non-finite gradient entry; update skipped");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) {
    auto& p = params.w.block(b);
    auto& m = state.m.block(b);
    auto& v = state.v.block(b);
    const auto& g = grad.block(b);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] += state.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

}  // namespace dvlr
