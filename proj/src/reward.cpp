#include "dvlr/reward.hpp"

#include "dvlr/common.hpp"

namespace dvlr {

std::optional<char> extract_answer(const TokenSequence& response) {
  for (std::size_t i = response.size(); i >= 2; --i) {
    if (response[i - 2] != tok::answer) continue;
    if (const auto label = choice_label(response[i - 1])) return label;
  }
  return std::nullopt;
}

OutcomeReward outcome_reward(const TokenSequence& response, char gt_choice) {
  if (gt_choice < 'A' || gt_choice > 'D') {
    fail(ErrorKind::argument, std::string("ground-truth label must be A-D, got '") + gt_choice + "'");
  }
  OutcomeReward r;
  r.extracted = extract_answer(response);
  r.value = r.extracted == gt_choice ? 1 : 0;
  return r;
}

}  // namespace dvlr
