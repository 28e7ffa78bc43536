#include "dvlr/vocabulary.hpp"

#include <algorithm>

#include "dvlr/common.hpp"

namespace dvlr {

std::string choice_token(char label) { return std::string("(") + label + ")"; }

std::optional<char> choice_label(std::string_view token) {
  if (token.size() == 3 && token[0] == '(' && token[2] == ')' && token[1] >= 'A' && token[1] <= 'D') {
    return token[1];
  }
  return std::nullopt;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      fail(ErrorKind::vocabulary, "duplicate token '" + tokens_[i] + "'");
    }
  }
  const auto pad = find(tok::pad);
  const auto eos = find(tok::eos);
  if (!pad || !eos) fail(ErrorKind::vocabulary, "vocabulary must contain <pad> and <eos>");
  pad_ = *pad;
  eos_ = *eos;
  const auto digest = sha256(join(tokens_, "\n"));
  std::copy_n(digest.begin(), hash_.size(), hash_.begin());
}

Vocabulary Vocabulary::geometry() {
  std::vector<std::string> t = {
      std::string(tok::pad), std::string(tok::bos), std::string(tok::eos), std::string(tok::sep),
      std::string(tok::text_begin), std::string(tok::text_end), std::string(tok::statement_sep),
      std::string(tok::unknown), std::string(tok::answer), std::string(tok::find),
      // statement grammar
      "angle", "tri", "quad", "supp", "iso", "par",
      // drawing commands
      "POINT", "SEG", "COLL", "TICK", "ARROW", "ANGLE",
  };
  for (char c = 'A'; c <= 'H'; ++c) t.emplace_back(1, c);
  for (char c = 'A'; c <= 'D'; ++c) t.push_back(choice_token(c));
  // Grid coordinates, then the 10-degree angle lattice.
  for (int v = 0; v <= 9; ++v) t.push_back(std::to_string(v));
  for (int v = 10; v <= 180; v += 10) t.push_back(std::to_string(v));
  return Vocabulary(std::move(t));
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) fail(ErrorKind::vocabulary, "token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view token) const {
  const auto found = find(token);
  if (!found) fail(ErrorKind::vocabulary, "unknown token '" + std::string(token) + "'");
  return *found;
}

TokenIds Vocabulary::encode(const TokenSequence& tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenSequence Vocabulary::decode(const TokenIds& ids) const {
  TokenSequence out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace dvlr
