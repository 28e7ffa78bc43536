#pragma once

#include <optional>

#include "dvlr/vocabulary.hpp"

namespace dvlr {

struct OutcomeReward {
  int value = 0;  // 0 or 1
  std::optional<char> extracted;
};

// The label of the last ANSWER marker that is directly followed by a choice
// token, scanning from the end; nullopt when no such pair exists.
std::optional<char> extract_answer(const TokenSequence& response);

OutcomeReward outcome_reward(const TokenSequence& response, char gt_choice);

}  // namespace dvlr
