#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dvlr {

using TokenSequence = std::vector<std::string>;
using TokenIds = std::vector<int>;

namespace tok {
inline constexpr std::string_view pad = "<pad>";
inline constexpr std::string_view bos = "<bos>";
inline constexpr std::string_view eos = "<eos>";
inline constexpr std::string_view sep = "<sep>";
inline constexpr std::string_view text_begin = "TEXT_BEGIN";
inline constexpr std::string_view text_end = "TEXT_END";
inline constexpr std::string_view statement_sep = ";";
inline constexpr std::string_view unknown = "x";
inline constexpr std::string_view answer = "ANSWER";
inline constexpr std::string_view find = "find";
}  // namespace tok

// Token string for a multiple-choice label: 'B' -> "(B)".
std::string choice_token(char label);
// Inverse of choice_token; nullopt for any other token.
std::optional<char> choice_label(std::string_view token);

class Vocabulary {
 public:
  using Hash = std::array<std::uint8_t, 32>;

  // Tokens must be distinct and include <pad> and <eos>.
  explicit Vocabulary(std::vector<std::string> tokens);

  // The shared alphabet of the geometry domain: drawing tokens, statement
  // grammar, question and choice tokens, answer marker and specials.
  static Vocabulary geometry();

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const;
  std::optional<int> find(std::string_view token) const;
  int id(std::string_view token) const;

  TokenIds encode(const TokenSequence& tokens) const;
  TokenSequence decode(const TokenIds& ids) const;

  int pad_id() const { return pad_; }
  int eos_id() const { return eos_; }
  const Hash& content_hash() const { return hash_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1;
  int eos_ = -1;
  Hash hash_{};
};

}  // namespace dvlr
