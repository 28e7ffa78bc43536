#pragma once

// Binary checkpoint: magic "DVLRCKPT", u32 version, u8 role, 32-byte
// vocabulary hash, u32 K d H V, the five parameter blocks, then the optimizer
// state (u64 step, f64 lr beta1 beta2 epsilon, first and second moments) and
// a length-prefixed provenance text. Integers and doubles are little-endian.

#include <string>
#include <string_view>

#include "dvlr/policy.hpp"
#include "dvlr/vocabulary.hpp"

namespace dvlr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParameters params;
  OptimizerState optimizer;
  std::string provenance;  // configuration text the checkpoint was trained with
};

std::string encode_checkpoint(const Checkpoint& checkpoint, const Vocabulary& vocab);
// Throws a format error on bad magic, version or vocabulary hash.
Checkpoint decode_checkpoint(std::string_view bytes, const Vocabulary& vocab);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::string& path, const Vocabulary& vocab);

// SHA-256 (hex) over role, dims and parameter blocks.
std::string parameter_hash(const PolicyParameters& params);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace dvlr
