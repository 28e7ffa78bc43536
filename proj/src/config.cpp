#include "dvlr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dvlr/common.hpp"

namespace dvlr {

void validate(const TrainingConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorKind::config, what); };
  if (c.epochs < 1) bad("epochs must be >= 1");
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) bad("learning_rate must be positive");
  if (c.G < 2) bad("G must be >= 2");
  if (!(c.clip_epsilon > 0.0 && c.clip_epsilon < 1.0)) bad("clip_epsilon must be in (0, 1)");
  if (!(c.kl_beta >= 0.0)) bad("kl_beta must be >= 0");
  if (!(c.temperature > 0.0)) bad("temperature must be positive");
  if (c.max_len < 1) bad("max_len must be >= 1");
  if (c.inner_iterations < 1) bad("inner_iterations must be >= 1");
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.seed = 1;
  c.interpreter = {160, 16, 128, 72};
  c.reasoner = {96, 16, 128, 48};
  if (name == "toy") {
    c.n_train = 3000;
    c.n_heldout = 300;
    c.n_rl = 3000;
    c.sft = {.epochs = 30, .batch_size = 32, .learning_rate = 3e-3};
    c.stage2 = {.epochs = 2, .batch_size = 16, .learning_rate = 3e-4, .G = 5, .clip_epsilon = 0.2,
                .kl_beta = 0.01, .temperature = 1.0};
    c.stage3 = c.stage2;
  } else if (name == "paper") {
    c.n_train = 3000;
    c.n_heldout = 300;
    c.n_rl = 3000;
    c.sft = {.epochs = 1, .batch_size = 128, .learning_rate = 1e-4};
    c.stage2 = {.epochs = 5, .batch_size = 64, .learning_rate = 1e-6, .G = 5, .clip_epsilon = 0.2,
                .kl_beta = 0.01, .temperature = 1.0};
    c.stage3 = c.stage2;
  } else {
    fail(ErrorKind::config, "unknown preset '" + name + "' (expected toy or paper)");
  }
  return c;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    fail(ErrorKind::config, "invalid value '" + value + "' for " + key);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Field number_field(std::string key, std::function<T&(RunConfig&)> ref) {
  auto get = [ref](const RunConfig& c) {
    const T v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  };
  auto set = [ref, key](RunConfig& c, const std::string& value) { ref(c) = parse_number<T>(key, value); };
  return {std::move(key), get, set};
}

void add_model_fields(std::vector<Field>& fields, const std::string& prefix, ModelConfig RunConfig::*member) {
  fields.push_back(number_field<int>(prefix + ".K", [member](RunConfig& c) -> int& { return (c.*member).K; }));
  fields.push_back(number_field<int>(prefix + ".d", [member](RunConfig& c) -> int& { return (c.*member).d; }));
  fields.push_back(number_field<int>(prefix + ".H", [member](RunConfig& c) -> int& { return (c.*member).H; }));
  fields.push_back(
      number_field<int>(prefix + ".max_len", [member](RunConfig& c) -> int& { return (c.*member).max_len; }));
}

void add_training_fields(std::vector<Field>& fields, const std::string& prefix, TrainingConfig RunConfig::*member,
                         bool rl) {
  auto tc = [member](RunConfig& c) -> TrainingConfig& { return c.*member; };
  fields.push_back(number_field<int>(prefix + ".epochs", [tc](RunConfig& c) -> int& { return tc(c).epochs; }));
  fields.push_back(
      number_field<int>(prefix + ".batch_size", [tc](RunConfig& c) -> int& { return tc(c).batch_size; }));
  fields.push_back(number_field<double>(prefix + ".learning_rate",
                                        [tc](RunConfig& c) -> double& { return tc(c).learning_rate; }));
  if (!rl) return;
  fields.push_back(number_field<int>(prefix + ".G", [tc](RunConfig& c) -> int& { return tc(c).G; }));
  fields.push_back(
      number_field<double>(prefix + ".clip_epsilon", [tc](RunConfig& c) -> double& { return tc(c).clip_epsilon; }));
  fields.push_back(
      number_field<double>(prefix + ".kl_beta", [tc](RunConfig& c) -> double& { return tc(c).kl_beta; }));
  fields.push_back(
      number_field<double>(prefix + ".temperature", [tc](RunConfig& c) -> double& { return tc(c).temperature; }));
  fields.push_back(number_field<int>(prefix + ".inner_iterations",
                                     [tc](RunConfig& c) -> int& { return tc(c).inner_iterations; }));
  const std::string key = prefix + ".ratio";
  fields.push_back({key,
                    [tc](const RunConfig& c) -> std::string {
                      return tc(const_cast<RunConfig&>(c)).ratio_mode == RatioMode::token ? "token" : "sequence";
                    },
                    [tc, key](RunConfig& c, const std::string& v) {
                      if (v == "token") {
                        tc(c).ratio_mode = RatioMode::token;
                      } else if (v == "sequence") {
                        tc(c).ratio_mode = RatioMode::sequence;
                      } else {
                        fail(ErrorKind::config, "invalid value '" + v + "' for " + key + " (token or sequence)");
                      }
                    }});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"preset", [](const RunConfig& c) { return c.preset; },
                 [](RunConfig& c, const std::string& v) {
                   const std::uint64_t seed = c.seed;
                   c = preset_config(v);
                   c.seed = seed;
                 }});
    f.push_back(number_field<std::uint64_t>("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(number_field<int>("data.train", [](RunConfig& c) -> int& { return c.n_train; }));
    f.push_back(number_field<int>("data.heldout", [](RunConfig& c) -> int& { return c.n_heldout; }));
    f.push_back(number_field<int>("data.rl", [](RunConfig& c) -> int& { return c.n_rl; }));
    add_model_fields(f, "interpreter", &RunConfig::interpreter);
    add_model_fields(f, "reasoner", &RunConfig::reasoner);
    add_training_fields(f, "sft", &RunConfig::sft, false);
    add_training_fields(f, "stage2", &RunConfig::stage2, true);
    add_training_fields(f, "stage3", &RunConfig::stage3, true);
    return f;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_option(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  fail(ErrorKind::config, "unknown configuration key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::config, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  std::stable_partition(out.begin(), out.end(), [](const auto& kv) { return kv.first == "preset"; });
  return out;
}

void finalize(RunConfig& config) {
  if (config.n_train < 1) fail(ErrorKind::config, "data.train must be >= 1");
  if (config.n_heldout < 1) fail(ErrorKind::config, "data.heldout must be >= 1");
  if (config.n_rl < 1) fail(ErrorKind::config, "data.rl must be >= 1");
  for (const ModelConfig* m : {&config.interpreter, &config.reasoner}) {
    if (m->K < 1 || m->d < 1 || m->H < 1) fail(ErrorKind::config, "model dims K, d, H must be >= 1");
    if (m->max_len < 1) fail(ErrorKind::config, "max_len must be >= 1");
  }
  config.sft.seed = mix_seed(config.seed, 101);
  config.stage2.seed = mix_seed(config.seed, 102);
  config.stage3.seed = mix_seed(config.seed, 103);
  config.stage2.max_len = config.interpreter.max_len;
  config.stage3.max_len = config.reasoner.max_len;
  validate(config.sft);
  validate(config.stage2);
  validate(config.stage3);
}

std::vector<std::pair<std::string, std::string>> to_pairs(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.push_back({f.key, f.get(config)});
  return out;
}

std::string serialize(const RunConfig& config) {
  std::ostringstream os;
  for (const auto& [k, v] : to_pairs(config)) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace dvlr
