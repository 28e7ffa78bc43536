#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dvlr {

enum class RatioMode { token, sequence };

struct TrainingConfig {
  int epochs = 1;
  int batch_size = 1;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int G = 5;
  double clip_epsilon = 0.2;
  double kl_beta = 0.01;
  double temperature = 1.0;
  int max_len = 64;
  int inner_iterations = 1;
  RatioMode ratio_mode = RatioMode::token;
};

// Throws a config error naming the offending field.
void validate(const TrainingConfig& config);

struct ModelConfig {
  int K = 1;
  int d = 1;
  int H = 1;
  int max_len = 64;  // decoding cap for this role
};

struct RunConfig {
  std::string preset = "toy";
  std::uint64_t seed = 0;
  int n_train = 0;
  int n_heldout = 0;
  int n_rl = 0;  // problems for the RL stages, disjoint from train and held-out
  ModelConfig interpreter;
  ModelConfig reasoner;
  TrainingConfig sft;
  TrainingConfig stage2;
  TrainingConfig stage3;
};

// "toy" or "paper"; anything else is a config error.
RunConfig preset_config(const std::string& name);

// key = value assignment, e.g. "stage2.kl_beta" = "0.01".
void set_option(RunConfig& config, const std::string& key, const std::string& value);

// Reads "key = value" lines ('#' starts a comment). A "preset" key, if
// present, is applied before every other key in the file.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// Copies the run seed into per-stage seeds and validates every stage.
void finalize(RunConfig& config);

// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> to_pairs(const RunConfig& config);
std::string serialize(const RunConfig& config);

}  // namespace dvlr
