#include <algorithm>
#include <set>

#include <doctest.h>

#include "dvlr/common.hpp"
#include "dvlr/geo.hpp"
#include "support/oracles.hpp"

using namespace dvlr;
using namespace dvlr::geo;
using dvlr::oracle::kind;

namespace {

AngleFact angle(Label a, Label v, Label b, std::optional<int> value) { return {AngleRef::make(a, v, b), value}; }

SceneGraph triangle_scene(std::optional<int> a, std::optional<int> b, std::optional<int> c) {
  SceneGraph s;
  s.points = {{'A', 0, 0}, {'B', 5, 0}, {'C', 2, 4}};
  s.segments = {{'A', 'B'}, {'B', 'C'}, {'A', 'C'}};
  s.relations = {{RelationKind::triangle, {'A', 'B', 'C'}}};
  s.angle_facts = {angle('B', 'A', 'C', a), angle('A', 'B', 'C', b), angle('A', 'C', 'B', c)};
  return s;
}

std::set<std::string> as_set(const StatementList& l) { return {l.begin(), l.end()}; }

}  // namespace

TEST_SUITE("geo") {
  TEST_CASE("seed 7 complexity 1 is triangle ABC with two known angles") {
    const SceneGraph s = generate_scene(7, 1);
    REQUIRE(s.relations.size() == 1);
    CHECK(s.relations[0].kind == RelationKind::triangle);
    CHECK(s.relations[0].canonical().participants == std::vector<Label>{'A', 'B', 'C'});
    int known = 0, unknown = 0;
    for (const auto& f : s.angle_facts) (f.value ? known : unknown)++;
    CHECK(known == 2);
    CHECK(unknown == 1);
  }

  TEST_CASE("generation is a pure function of seed and complexity") {
    for (int c = 1; c <= 3; ++c) {
      for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto a = generate_scene(seed, c);
        const auto b = generate_scene(seed, c);
        CHECK(scene_statements(a) == scene_statements(b));
        CHECK(encode_scene(a, Variant::text_lite, {}) == encode_scene(b, Variant::text_lite, {}));
      }
    }
  }

  TEST_CASE("complexity is validated") {
    CHECK(oracle::error_kind_of([] { generate_scene(1, 0); }) == kind(ErrorKind::argument));
    CHECK(oracle::error_kind_of([] { generate_scene(1, 4); }) == kind(ErrorKind::argument));
  }

  TEST_CASE("generated scenes satisfy the type invariants") {
    for (int c = 1; c <= 3; ++c) {
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = generate_scene(seed, c);
        validate_scene(s);
        int unknown = 0;
        for (const auto& f : s.angle_facts) {
          if (!f.value) {
            ++unknown;
            continue;
          }
          CHECK(*f.value >= kMinKnownAngle);
          CHECK(*f.value <= kMaxKnownAngle);
        }
        CHECK(unknown == 1);
        CHECK(static_cast<int>(s.relations.size()) == c);
      }
    }
  }

  TEST_CASE("hand-built solver examples") {
    CHECK(solve_ground_truth(triangle_scene(40, 60, std::nullopt)) == 80);

    SceneGraph supp;
    supp.points = {{'A', 0, 5}, {'B', 0, 0}, {'C', 3, 0}, {'D', 9, 0}};
    supp.segments = {{'C', 'A'}, {'B', 'C'}, {'C', 'D'}};
    supp.relations = {{RelationKind::supplementary_pair, {'A', 'C', 'B', 'D'}}};
    supp.angle_facts = {angle('A', 'C', 'B', std::nullopt), angle('A', 'C', 'D', 110)};
    CHECK(solve_ground_truth(supp) == 70);
  }

  TEST_CASE("underdetermined and inconsistent scenes are solver errors") {
    SceneGraph under = triangle_scene(40, std::nullopt, std::nullopt);
    under.angle_facts = {angle('B', 'A', 'C', 40), angle('A', 'B', 'C', std::nullopt)};
    CHECK(oracle::error_kind_of([&] { solve_ground_truth(under); }) == kind(ErrorKind::solver));

    SceneGraph bad = triangle_scene(40, 60, std::nullopt);
    bad.relations.push_back({RelationKind::isosceles_pair, {'C', 'A', 'B'}});  // forces A = B
    CHECK(oracle::error_kind_of([&] { solve_ground_truth(bad); }) == kind(ErrorKind::solver));
  }

  TEST_CASE("propagation agrees with brute-force enumeration on 1000 scenes per complexity") {
    for (int c = 1; c <= 3; ++c) {
      for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        const auto s = generate_scene(seed, c);
        const auto brute = oracle::brute_force_unknown(s);
        REQUIRE(brute.size() == 1);
        CHECK(solve_ground_truth(s) == brute[0]);
      }
    }
  }

  TEST_CASE("derivation ends in the unknown and stays in range") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto s = generate_scene(seed, static_cast<int>(seed % 3) + 1);
      const auto d = derive_unknown(s);
      REQUIRE(!d.steps.empty());
      CHECK(d.steps.back().angle == s.unknown_fact().angle);
      CHECK(d.steps.back().value == d.value);
      for (const auto& step : d.steps) {
        CHECK(step.value >= 1);
        CHECK(step.value <= 179);
      }
    }
  }

  TEST_CASE("statement grammar round trip") {
    for (const char* text : {"tri A B C", "quad A B C D", "supp A C B D", "iso A B C", "par A B C D",
                             "angle A B C 40", "angle A B C x"}) {
      CHECK(format_fact(parse_statement(text)) == text);
    }
    CHECK(format_fact(parse_statement("angle C B A 40")) == "angle A B C 40");
    for (const char* bad : {"", "tri A B", "angle A B C", "angle A B C 400", "circle A", "tri A A B", "angle a B C 4"}) {
      CHECK(oracle::error_kind_of([&] { parse_statement(bad); }) == kind(ErrorKind::malformed_statement));
    }
  }

  TEST_CASE("refine dedups and orders entities first") {
    const StatementList d = {"angle A B C 40", "tri A B C", "angle A B C 40"};
    CHECK(refine_description(d) == StatementList{"tri A B C", "angle A B C 40"});
    const StatementList blocks = {"angle A B C x", "iso A B C", "supp D A B C", "tri A B C"};
    const auto r = refine_description(blocks);
    REQUIRE(r.size() == 4);
    CHECK(r[0] == "tri A B C");
    CHECK(r[1].rfind("supp", 0) == 0);
    CHECK(r[2] == "iso A B C");
    CHECK(r[3] == "angle A B C x");
  }

  TEST_CASE("refine names the malformed statement index") {
    try {
      refine_description({"tri A B C", "angle A B C 40", "triangle ABC"});
      FAIL("expected a malformed-statement error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::malformed_statement);
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }

  TEST_CASE("verbose description: 1-3 copies of every fact, seeded") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = generate_scene(seed, static_cast<int>(seed % 3) + 1);
      const auto facts = scene_statements(s);
      const auto v = verbose_description(s, seed * 31 + 3);
      CHECK(v.size() >= facts.size());
      CHECK(v.size() <= 3 * facts.size());
      CHECK(v == verbose_description(s, seed * 31 + 3));
      CHECK(as_set(refine_description(v)) == as_set(facts));
      for (const auto& f : facts) {
        const auto n = std::count(v.begin(), v.end(), f);
        CHECK(n >= 1);
        CHECK(n <= 3);
      }
    }
  }

  TEST_CASE("refined verbose description is independent of the seed") {
    for (std::uint64_t scene_seed = 0; scene_seed < 20; ++scene_seed) {
      const auto s = generate_scene(scene_seed, static_cast<int>(scene_seed % 3) + 1);
      const auto first = refine_description(verbose_description(s, 0));
      for (std::uint64_t seed = 1; seed < 100; ++seed) CHECK(refine_description(verbose_description(s, seed)) == first);
    }
  }

  TEST_CASE("refine is idempotent and permutation invariant on random descriptions") {
    Rng rng(42);
    for (int n = 0; n < 1000; ++n) {
      const auto s = generate_scene(rng.next(), rng.range(1, 3));
      StatementList d = verbose_description(s, rng.next());
      // drop a random subset so the inputs are not all full fact sets
      StatementList kept;
      for (const auto& st : d) {
        if (rng.below(4) != 0) kept.push_back(st);
      }
      const auto r = refine_description(kept);
      CHECK(refine_description(r) == r);
      StatementList shuffled = kept;
      rng.shuffle(shuffled);
      CHECK(refine_description(shuffled) == r);
    }
  }

  TEST_CASE("refined complexity-3 description has one statement per fact") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = generate_scene(seed, 3);
      const auto r = refine_description(verbose_description(s, seed));
      CHECK(r.size() == s.relations.size() + s.angle_facts.size());
    }
  }

  TEST_CASE("question synthesis") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto s = generate_scene(seed, static_cast<int>(seed % 3) + 1);
      const auto p = synthesize_question(s, seed);
      const int x = solve_ground_truth(s);
      CHECK(p.answer_value() == x);
      CHECK(std::set<int>(p.choices.begin(), p.choices.end()).size() == 4);
      for (int c : p.choices) {
        CHECK(c >= 1);
        CHECK(c <= 179);
      }
      REQUIRE(!p.solution_steps.empty());
      CHECK(p.solution_steps.back().find(std::to_string(x)) != std::string::npos);
    }
  }

  TEST_CASE("answer label varies with the seed while its value does not") {
    const auto s = generate_scene(11, 2);
    std::set<char> labels;
    std::set<int> values;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto p = synthesize_question(s, seed);
      labels.insert(p.gt_choice);
      values.insert(p.answer_value());
    }
    CHECK(labels.size() > 1);
    CHECK(values.size() == 1);
  }

  TEST_CASE("drawing tokens decode back to the scene's fact set") {
    for (int c = 1; c <= 3; ++c) {
      for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto s = generate_scene(seed, c);
        const auto decoded = oracle::decode_drawing(encode_scene(s, Variant::text_lite, {}));
        CHECK(refine_description(decoded) == refine_description(scene_statements(s)));
      }
    }
  }

  TEST_CASE("scene encoding: hash order, TEXT markers per variant") {
    const auto p = generate_problem(5, 0);
    const auto tl = encode_scene(p.scene, Variant::text_lite, p.question);
    CHECK(std::find(tl.begin(), tl.end(), tok::text_begin) == tl.end());
    const auto vo = render_variant(p, Variant::vision_only);
    CHECK(vo.text_channel.empty());
    CHECK(std::find(vo.scene_channel.begin(), vo.scene_channel.end(), tok::text_begin) != vo.scene_channel.end());
    CHECK(vo.scene_channel.back() == tok::text_end);
    // Commands are sorted by content hash, so the unsorted scene fields never
    // leak their construction order.
    std::vector<std::uint64_t> hashes;
    std::string cmd;
    for (const auto& t : tl) {
      if (t == "POINT" || t == "SEG" || t == "ANGLE" || t == "COLL" || t == "TICK" || t == "ARROW") {
        if (!cmd.empty()) hashes.push_back(fnv1a(cmd));
        cmd = t;
      } else {
        cmd += " " + t;
      }
    }
    hashes.push_back(fnv1a(cmd));
    CHECK(std::is_sorted(hashes.begin(), hashes.end()));
  }

  TEST_CASE("variant renditions") {
    for (std::uint64_t j = 0; j < 60; ++j) {
      const auto p = generate_problem(9, j);
      const auto choices = choice_tokens(p.choices);
      TokenSequence qc = p.question;
      qc.insert(qc.end(), choices.begin(), choices.end());

      const auto td = render_variant(p, Variant::text_dominant);
      const auto tl = render_variant(p, Variant::text_lite);
      const auto vi = render_variant(p, Variant::vision_intensive);
      const auto vd = render_variant(p, Variant::vision_dominant);
      const auto vo = render_variant(p, Variant::vision_only);

      // TextDominant carries every fact in text.
      const auto sep = std::find(td.text_channel.begin(), td.text_channel.end(), tok::sep);
      REQUIRE(sep != td.text_channel.end());
      const TokenSequence desc(sep + 1, td.text_channel.end());
      CHECK(refine_description(tokens_to_statements(desc)) == refine_description(scene_statements(p.scene)));
      CHECK(tl.text_channel == qc);
      CHECK(vi.text_channel == qc);
      CHECK(vd.text_channel == choices);
      CHECK(vo.text_channel.empty());
      CHECK(td.scene_channel == tl.scene_channel);
      CHECK(vi.scene_channel != tl.scene_channel);
      CHECK(vi.scene_channel.size() == tl.scene_channel.size());

      const std::size_t sizes[] = {td.text_channel.size(), tl.text_channel.size(), vi.text_channel.size(),
                                   vd.text_channel.size(), vo.text_channel.size()};
      CHECK(std::is_sorted(std::begin(sizes), std::end(sizes), std::greater<>()));

      // Jitter moves coordinates only; the decoded facts are unchanged.
      CHECK(refine_description(oracle::decode_drawing(vi.scene_channel)) ==
            refine_description(scene_statements(p.scene)));
    }
  }

  TEST_CASE("jitter is deterministic and stays on the grid") {
    const auto s = generate_scene(3, 3);
    const auto a = jitter_points(s);
    const auto b = jitter_points(s);
    REQUIRE(a.points.size() == s.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].x == b.points[i].x);
      CHECK(a.points[i].y == b.points[i].y);
      CHECK(a.points[i].x >= 0);
      CHECK(a.points[i].x < kGridSize);
      CHECK((a.points[i].x != s.points[i].x || a.points[i].y != s.points[i].y));
    }
  }

  TEST_CASE("scene built from statements solves like the original") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = generate_scene(seed, static_cast<int>(seed % 3) + 1);
      const auto rebuilt = scene_from_statements(scene_statements(s));
      CHECK(solve_ground_truth(rebuilt) == solve_ground_truth(s));
    }
  }
}
