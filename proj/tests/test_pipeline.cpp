#include <algorithm>
#include <memory>

#include <doctest.h>

#include "dvlr/checkpoint.hpp"
#include "dvlr/common.hpp"
#include "dvlr/pipeline.hpp"
#include "support/oracles.hpp"

using namespace dvlr;

namespace {

// Reads the scene channel perfectly: embedded text, then the decoded and
// refined fact set.
Generation oracle_interpreter(const TokenSequence& scene, const Decoding&) {
  Generation g;
  g.tokens = embedded_text(scene);
  g.tokens.emplace_back(tok::sep);
  const auto desc = geo::statements_to_tokens(geo::refine_description(oracle::decode_drawing(scene)));
  g.tokens.insert(g.tokens.end(), desc.begin(), desc.end());
  g.tokens.emplace_back(tok::eos);
  return g;
}

// Solves the description in its prompt and names the matching choice.
Generation oracle_reasoner(const TokenSequence& prompt, const Decoding&) {
  const auto sep = std::find(prompt.begin(), prompt.end(), tok::sep);
  const auto facts = geo::tokens_to_statements(TokenSequence(prompt.begin(), sep));
  const int x = geo::solve_ground_truth(geo::scene_from_statements(facts));
  Generation g;
  for (auto it = sep; it != prompt.end(); ++it) {
    if (choice_label(*it) && it + 1 != prompt.end() && *(it + 1) == std::to_string(x)) {
      g.tokens = {std::string(tok::answer), *it, std::string(tok::eos)};
    }
  }
  if (g.tokens.empty()) g.tokens = {std::string(tok::eos)};
  return g;
}

Generator random_reasoner(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const TokenSequence&, const Decoding&) {
    const char label = static_cast<char>('A' + rng->below(4));
    return Generation{{std::string(tok::answer), choice_token(label), std::string(tok::eos)}, {}, false};
  };
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("interpreter output parsing") {
    const auto r = parse_interpreter_output({"find", "angle", "A", "B", "C", "<sep>", "tri", "A", "B", "C", "<eos>"});
    CHECK(r.readout == TokenSequence{"find", "angle", "A", "B", "C"});
    CHECK(r.description == TokenSequence{"tri", "A", "B", "C"});
    const auto none = parse_interpreter_output({"tri", "A", "B", "C"});
    CHECK(none.readout.empty());
    CHECK(none.description == TokenSequence{"tri", "A", "B", "C"});
  }

  TEST_CASE("reasoner prompt assembly per variant") {
    const auto p = geo::generate_problem(3, 1);
    const auto desc = geo::statements_to_tokens(geo::refine_description(geo::scene_statements(p.scene)));
    const auto choices = geo::choice_tokens(p.choices);
    const auto expected = reasoner_prompt(desc, p.question, choices);
    for (const auto v : geo::kAllVariants) {
      const auto input = geo::render_variant(p, v);
      CHECK(assemble_reasoner_prompt(input, oracle_interpreter(input.scene_channel, {}).tokens) == expected);
    }
    // TextDominant ignores whatever the interpreter says about the figure.
    const auto td = geo::render_variant(p, geo::Variant::text_dominant);
    CHECK(assemble_reasoner_prompt(td, {"<sep>", "tri", "X", "Y", "Z", "<eos>"}) == expected);
  }

  TEST_CASE("oracle stubs score 100% on every variant") {
    const auto problems = group_problems(generate_records(31, 0, 150));
    const auto report = evaluate(oracle_interpreter, oracle_reasoner, problems, {});
    REQUIRE(report.variants.size() == 5);
    for (const auto& s : report.variants) {
      CHECK(s.total == 150);
      CHECK(s.correct == 150);
    }
    CHECK(report.accuracy() == 100.0);
  }

  TEST_CASE("a uniformly guessing reasoner scores about 25%") {
    const auto problems = group_problems(generate_records(32, 0, 400));
    const auto report = evaluate(oracle_interpreter, random_reasoner(5), problems, {});
    // 2000 draws: standard error about 1 point
    CHECK(report.accuracy() > 21.0);
    CHECK(report.accuracy() < 29.0);
  }

  TEST_CASE("report format") {
    EvalReport r;
    r.variants = {{geo::Variant::text_dominant, 2, 3}, {geo::Variant::vision_only, 0, 3}};
    CHECK(format_report(r) == "variant,correct,total,accuracy\nTextDominant,2,3,66.7\nVisionOnly,0,3,0.0\n");
  }

  TEST_CASE("pipeline output fields") {
    const auto p = geo::generate_problem(8, 2);
    const auto input = geo::render_variant(p, geo::Variant::vision_only);
    const auto out = run_pipeline(oracle_interpreter, oracle_reasoner, input, {}, p.gt_choice);
    CHECK(out.reward.value == 1);
    CHECK(out.extracted == p.gt_choice);
    CHECK(out.description ==
          geo::statements_to_tokens(geo::refine_description(geo::scene_statements(p.scene))));
  }

  TEST_CASE("RL stages leave the frozen partner bit-identical") {
    const Vocabulary vocab = Vocabulary::geometry();
    const auto problems = group_problems(generate_records(41, 0, 6));
    auto interpreter = init_policy(vocab, 8, 2, 4, 1, Role::interpreter);
    auto reasoner = init_policy(vocab, 8, 2, 4, 2, Role::reasoner);
    TrainingConfig c;
    c.epochs = 1;
    c.batch_size = 3;
    c.G = 3;
    c.max_len = 6;
    c.learning_rate = 1e-2;

    const std::string r0 = parameter_hash(reasoner);
    auto s2 = init_optimizer(interpreter, c.learning_rate);
    const auto logs2 = stage2_train(interpreter, s2, reasoner, problems, c, 6, vocab);
    CHECK(parameter_hash(reasoner) == r0);
    CHECK(logs2.size() == 2);

    const std::string i0 = parameter_hash(interpreter);
    auto s3 = init_optimizer(reasoner, c.learning_rate);
    const auto logs3 = stage3_train(interpreter, reasoner, s3, problems, c, 6, vocab);
    CHECK(parameter_hash(interpreter) == i0);
    for (const auto& l : logs3) {
      CHECK(l.groups == 3);
      CHECK(l.skipped <= l.groups);
    }
  }

  TEST_CASE("stage drivers are deterministic") {
    const Vocabulary vocab = Vocabulary::geometry();
    const auto problems = group_problems(generate_records(42, 0, 4));
    TrainingConfig c;
    c.batch_size = 2;
    c.G = 3;
    c.max_len = 6;
    c.seed = 5;
    auto run = [&] {
      auto interpreter = init_policy(vocab, 6, 2, 4, 1);
      const auto reasoner = init_policy(vocab, 6, 2, 4, 2, Role::reasoner);
      auto s = init_optimizer(interpreter, 1e-2);
      std::vector<std::string> lines;
      stage2_train(interpreter, s, reasoner, problems, c, 6, vocab,
                   [&](const RlBatchLog& e) { lines.push_back(format_log(e)); });
      return std::make_pair(parameter_hash(interpreter), lines);
    };
    CHECK(run() == run());
  }
}
