#pragma once

// Procedural angle-chasing geometry: scenes, statement descriptions, the
// propagation solver, multiple-choice synthesis and the five channel
// renditions of a problem.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dvlr/vocabulary.hpp"

namespace dvlr::geo {

using Label = char;

inline constexpr int kMinKnownAngle = 10;
inline constexpr int kMaxKnownAngle = 170;
inline constexpr int kAngleStep = 10;
inline constexpr int kGridSize = 10;

struct Point {
  Label label;
  int x;
  int y;
};

struct Segment {
  Label a;
  Label b;
};

// An angle named by its vertex and two arm endpoints. Arms are stored sorted
// so that angle ABC and angle CBA compare equal.
struct AngleRef {
  Label arm1;
  Label vertex;
  Label arm2;

  static AngleRef make(Label arm_a, Label vertex, Label arm_b);
  std::string str() const;  // "A B C"
  auto operator<=>(const AngleRef&) const = default;
};

struct AngleFact {
  AngleRef angle;
  std::optional<int> value;  // nullopt is the unknown x

  bool operator==(const AngleFact&) const = default;
};

enum class RelationKind {
  triangle,            // [P Q R]
  supplementary_pair,  // [A C B D]: ray CA stands on line B-C-D
  isosceles_pair,      // [P Q R]: PQ = PR, so angle PQR = angle PRQ
  parallel_pair,       // [P Q R S]: PQ || RS, transversal PR, angle QPR = angle PRS
  angle_sum_polygon,   // [P Q R S]: quadrilateral in cyclic order
};

struct Relation {
  RelationKind kind;
  std::vector<Label> participants;

  // Same relation with participants in canonical order.
  Relation canonical() const;
  // Angle variables tied together by this relation.
  std::vector<AngleRef> angles() const;
  // Sum constraint value (180/360), or nullopt for an equality relation.
  std::optional<int> angle_sum() const;

  bool operator==(const Relation&) const = default;
};

struct SceneGraph {
  std::vector<Point> points;
  std::vector<Segment> segments;
  std::vector<AngleFact> angle_facts;
  std::vector<Relation> relations;

  const AngleFact& unknown_fact() const;
  bool has_point(Label label) const;
};

// Checks the structural invariants (declared labels, one unknown, value
// range). Solvability is checked separately by the solver.
void validate_scene(const SceneGraph& scene);

// complexity: 1 = triangle or supplementary pair, 2 and 3 = that many
// composed relations. Pure function of (seed, complexity).
SceneGraph generate_scene(std::uint64_t seed, int complexity);

// ---------------------------------------------------------------------------
// Statements

using StatementList = std::vector<std::string>;
using Fact = std::variant<Relation, AngleFact>;

enum class StatementBlock { entity = 0, incidence = 1, relation = 2, measure = 3 };

// Parses one statement of the grammar:
//   tri P Q R | quad P Q R S | supp A C B D | iso P Q R | par P Q R S
//   angle A B C <value|x>
// Throws a malformed-statement error on anything else.
Fact parse_statement(std::string_view statement);
std::string format_fact(const Fact& fact);
StatementBlock block_of(const Fact& fact);

// One canonical statement per relation and angle fact, in canonical order.
StatementList scene_statements(const SceneGraph& scene);
// Every fact 1-3 times, shuffled; the raw rule-generated description.
StatementList verbose_description(const SceneGraph& scene, std::uint64_t seed);
// Dedups and orders statements: entities < incidences < relations <
// measures, lexicographic within a block.
StatementList refine_description(const StatementList& statements);

// Scene holding exactly the facts of a description (points at the origin,
// no segments). Throws a malformed-statement error on a bad statement.
SceneGraph scene_from_statements(const StatementList& statements);

TokenSequence statements_to_tokens(const StatementList& statements);
StatementList tokens_to_statements(const TokenSequence& tokens);

// ---------------------------------------------------------------------------
// Solver

struct DerivationStep {
  std::size_t relation;
  AngleRef angle;
  int value;
};

struct Derivation {
  int value;
  // Steps x depends on, in derivation order; the last derives x.
  std::vector<DerivationStep> steps;
};

// Fixed-point constraint propagation. Throws a solver error when the unknown
// is underdetermined or the scene is inconsistent.
Derivation derive_unknown(const SceneGraph& scene);
int solve_ground_truth(const SceneGraph& scene);

// ---------------------------------------------------------------------------
// Problems and renditions

enum class Variant { text_dominant, text_lite, vision_intensive, vision_dominant, vision_only };

inline constexpr std::array<Variant, 5> kAllVariants = {
    Variant::text_dominant, Variant::text_lite, Variant::vision_intensive,
    Variant::vision_dominant, Variant::vision_only};

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);

struct ProblemInstance {
  SceneGraph scene;
  TokenSequence question;
  std::array<int, 4> choices{};
  char gt_choice = 'A';
  StatementList solution_steps;
  Variant variant = Variant::text_dominant;

  int answer_value() const { return choices[static_cast<std::size_t>(gt_choice - 'A')]; }
};

ProblemInstance synthesize_question(const SceneGraph& scene, std::uint64_t seed);

struct PipelineInput {
  TokenSequence text_channel;
  TokenSequence scene_channel;
};

// Scene-channel drawing tokens. Commands are ordered by a content hash; the
// embedded tokens (question or question + choices) follow inside
// TEXT_BEGIN/TEXT_END for the vision-dominant and vision-only variants.
TokenSequence encode_scene(const SceneGraph& scene, Variant variant, const TokenSequence& embedded);

// Applies the deterministic coordinate offset used by the vision-intensive
// rendition.
SceneGraph jitter_points(const SceneGraph& scene);

TokenSequence choice_tokens(const std::array<int, 4>& choices);
PipelineInput render_variant(const ProblemInstance& problem, Variant variant);

// Problem j of a corpus: seed mix_seed(seed, j), complexity j % 3 + 1.
ProblemInstance generate_problem(std::uint64_t corpus_seed, std::uint64_t index);

}  // namespace dvlr::geo
