#include "dvlr/geo.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dvlr/common.hpp"

namespace dvlr::geo {

namespace {

bool is_label(std::string_view s) { return s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z'; }

std::string label_str(Label l) { return std::string(1, l); }

bool on_lattice(int v) { return v >= kMinKnownAngle && v <= kMaxKnownAngle && v % kAngleStep == 0; }

}  // namespace

AngleRef AngleRef::make(Label arm_a, Label vertex, Label arm_b) {
  if (arm_b < arm_a) std::swap(arm_a, arm_b);
  return AngleRef{arm_a, vertex, arm_b};
}

std::string AngleRef::str() const {
  return label_str(arm1) + " " + label_str(vertex) + " " + label_str(arm2);
}

Relation Relation::canonical() const {
  Relation r = *this;
  auto& p = r.participants;
  switch (kind) {
    case RelationKind::triangle:
      std::sort(p.begin(), p.end());
      break;
    case RelationKind::angle_sum_polygon: {
      std::rotate(p.begin(), std::min_element(p.begin(), p.end()), p.end());
      if (p[3] < p[1]) std::swap(p[1], p[3]);
      break;
    }
    case RelationKind::supplementary_pair:
      if (p[3] < p[2]) std::swap(p[2], p[3]);
      break;
    case RelationKind::isosceles_pair:
      if (p[2] < p[1]) std::swap(p[1], p[2]);
      break;
    case RelationKind::parallel_pair: {
      const std::vector<Label> swapped = {p[2], p[3], p[0], p[1]};
      if (swapped < p) p = swapped;
      break;
    }
  }
  return r;
}

std::vector<AngleRef> Relation::angles() const {
  const auto& p = participants;
  switch (kind) {
    case RelationKind::triangle:
      return {AngleRef::make(p[1], p[0], p[2]), AngleRef::make(p[0], p[1], p[2]),
              AngleRef::make(p[0], p[2], p[1])};
    case RelationKind::angle_sum_polygon:
      return {AngleRef::make(p[3], p[0], p[1]), AngleRef::make(p[0], p[1], p[2]),
              AngleRef::make(p[1], p[2], p[3]), AngleRef::make(p[2], p[3], p[0])};
    case RelationKind::supplementary_pair:
      return {AngleRef::make(p[0], p[1], p[2]), AngleRef::make(p[0], p[1], p[3])};
    case RelationKind::isosceles_pair:
      return {AngleRef::make(p[0], p[1], p[2]), AngleRef::make(p[0], p[2], p[1])};
    case RelationKind::parallel_pair:
      return {AngleRef::make(p[1], p[0], p[2]), AngleRef::make(p[0], p[2], p[3])};
  }
  return {};
}

std::optional<int> Relation::angle_sum() const {
  switch (kind) {
    case RelationKind::triangle:
    case RelationKind::supplementary_pair:
      return 180;
    case RelationKind::angle_sum_polygon:
      return 360;
    case RelationKind::isosceles_pair:
    case RelationKind::parallel_pair:
      return std::nullopt;
  }
  return std::nullopt;
}

const AngleFact& SceneGraph::unknown_fact() const {
  for (const auto& f : angle_facts) {
    if (!f.value) return f;
  }
  fail(ErrorKind::contract, "scene has no unknown angle");
}

bool SceneGraph::has_point(Label label) const {
  return std::any_of(points.begin(), points.end(), [&](const Point& p) { return p.label == label; });
}

void validate_scene(const SceneGraph& scene) {
  std::set<Label> declared;
  for (const auto& p : scene.points) {
    if (!declared.insert(p.label).second) {
      fail(ErrorKind::contract, "point " + label_str(p.label) + " declared twice");
    }
  }
  auto check = [&](Label l) {
    if (!declared.count(l)) fail(ErrorKind::contract, "label " + label_str(l) + " is not a declared point");
  };
  for (const auto& s : scene.segments) {
    check(s.a);
    check(s.b);
  }
  int unknowns = 0;
  for (const auto& f : scene.angle_facts) {
    check(f.angle.arm1);
    check(f.angle.vertex);
    check(f.angle.arm2);
    if (!f.value) {
      ++unknowns;
    } else if (*f.value < kMinKnownAngle || *f.value > kMaxKnownAngle) {
      fail(ErrorKind::contract, "known angle " + f.angle.str() + " = " + std::to_string(*f.value) +
                                    " outside [10, 170]");
    }
  }
  if (unknowns != 1) fail(ErrorKind::contract, "scene must carry exactly one unknown, found " + std::to_string(unknowns));
  for (const auto& r : scene.relations) {
    for (Label l : r.participants) check(l);
  }
}

// ---------------------------------------------------------------------------
// Solver

namespace {

struct Propagation {
  std::map<AngleRef, int> known;
  std::vector<DerivationStep> steps;
};

Propagation propagate(const std::vector<Relation>& relations, std::map<AngleRef, int> known) {
  Propagation out;
  out.known = std::move(known);
  for (std::size_t pass = 0; pass < relations.size(); ++pass) {
    bool progress = false;
    for (std::size_t i = 0; i < relations.size(); ++i) {
      const auto angles = relations[i].angles();
      std::optional<AngleRef> missing;
      int missing_count = 0;
      int known_sum = 0;
      for (const auto& a : angles) {
        const auto it = out.known.find(a);
        if (it == out.known.end()) {
          ++missing_count;
          missing = a;
        } else {
          known_sum += it->second;
        }
      }
      if (missing_count != 1) continue;
      const auto sum = relations[i].angle_sum();
      // Equality relations hold exactly two angles; the known one is the sum.
      const int value = sum ? *sum - known_sum : known_sum;
      out.known[*missing] = value;
      out.steps.push_back({i, *missing, value});
      progress = true;
    }
    if (!progress) break;
  }
  return out;
}

std::map<AngleRef, int> known_values(const SceneGraph& scene) {
  std::map<AngleRef, int> known;
  for (const auto& f : scene.angle_facts) {
    if (f.value) known[f.angle] = *f.value;
  }
  return known;
}

}  // namespace

Derivation derive_unknown(const SceneGraph& scene) {
  validate_scene(scene);
  const AngleRef target = scene.unknown_fact().angle;
  const auto prop = propagate(scene.relations, known_values(scene));
  const auto it = prop.known.find(target);
  if (it == prop.known.end()) fail(ErrorKind::solver, "unknown angle " + target.str() + " is underdetermined");

  for (const auto& r : scene.relations) {
    const auto angles = r.angles();
    if (!std::all_of(angles.begin(), angles.end(), [&](const AngleRef& a) { return prop.known.count(a) > 0; })) {
      continue;
    }
    bool holds;
    if (const auto sum = r.angle_sum()) {
      int total = 0;
      for (const auto& a : angles) total += prop.known.at(a);
      holds = total == *sum;
    } else {
      holds = prop.known.at(angles[0]) == prop.known.at(angles[1]);
    }
    if (!holds) fail(ErrorKind::solver, "inconsistent scene: " + format_fact(r.canonical()) + " violated");
  }
  for (const auto& step : prop.steps) {
    if (step.value < 1 || step.value > 179) {
      fail(ErrorKind::solver, "inconsistent scene: derived angle " + step.angle.str() + " = " +
                                  std::to_string(step.value));
    }
  }

  // Keep only the steps the unknown depends on.
  std::set<AngleRef> needed = {target};
  std::vector<DerivationStep> kept;
  for (auto s = prop.steps.rbegin(); s != prop.steps.rend(); ++s) {
    if (!needed.count(s->angle)) continue;
    kept.push_back(*s);
    for (const auto& a : scene.relations[s->relation].angles()) needed.insert(a);
  }
  std::reverse(kept.begin(), kept.end());
  return Derivation{it->second, std::move(kept)};
}

int solve_ground_truth(const SceneGraph& scene) { return derive_unknown(scene).value; }

// ---------------------------------------------------------------------------
// Generation

namespace {

enum class Attachment { exterior, isosceles, parallel };
enum class BaseShape { triangle, quad, supplementary };

struct Template {
  BaseShape base;
  std::vector<Attachment> attachments;
};

const std::vector<Template>& templates_for(int complexity) {
  using A = Attachment;
  using B = BaseShape;
  static const std::vector<Template> c1 = {{B::triangle, {}}, {B::supplementary, {}}};
  static const std::vector<Template> c2 = {
      {B::triangle, {A::exterior}}, {B::triangle, {A::isosceles}},
      {B::triangle, {A::parallel}}, {B::quad, {A::exterior}}};
  static const std::vector<Template> c3 = {
      {B::triangle, {A::isosceles, A::exterior}}, {B::triangle, {A::parallel, A::exterior}},
      {B::triangle, {A::exterior, A::exterior}},  {B::quad, {A::exterior, A::exterior}},
      {B::triangle, {A::isosceles, A::parallel}}};
  if (complexity == 1) return c1;
  if (complexity == 2) return c2;
  return c3;
}

class Builder {
 public:
  explicit Builder(Rng& rng) : rng_(rng) {}

  void base(BaseShape shape) {
    if (shape == BaseShape::triangle) {
      const Label a = add_point(), b = add_point(), c = add_point();
      add_segment(a, b);
      add_segment(b, c);
      add_segment(c, a);
      scene_.relations.push_back({RelationKind::triangle, {a, b, c}});
    } else if (shape == BaseShape::quad) {
      const Label a = add_point(), b = add_point(), c = add_point(), d = add_point();
      add_segment(a, b);
      add_segment(b, c);
      add_segment(c, d);
      add_segment(d, a);
      scene_.relations.push_back({RelationKind::angle_sum_polygon, {a, b, c, d}});
    } else {
      // Line A-B-C with a ray from B to D.
      const Label a = add_point(), b = add_point(), c = add_point(), d = add_point();
      add_segment(a, b);
      add_segment(b, c);
      add_segment(b, d);
      scene_.relations.push_back({RelationKind::supplementary_pair, {d, b, a, c}});
    }
  }

  // Returns false when the attachment has no admissible placement.
  bool attach(Attachment kind) {
    const Relation host = scene_.relations.front();
    const auto& cyc = host.participants;
    const std::size_t n = cyc.size();
    if (kind == Attachment::exterior) {
      std::vector<std::pair<std::size_t, int>> options;  // vertex index, side
      for (std::size_t i = 0; i < n; ++i) {
        if (!vertex_free(cyc[i])) continue;
        options.push_back({i, -1});
        options.push_back({i, +1});
      }
      if (options.empty()) return false;
      const auto [i, side] = options[rng_.below(options.size())];
      const Label v = cyc[i];
      const Label u = cyc[(i + n + static_cast<std::size_t>(side == -1 ? n - 1 : 1)) % n];
      const Label w = cyc[(i + n + static_cast<std::size_t>(side == -1 ? 1 : n - 1)) % n];
      const Label ext = add_point();
      add_segment(v, ext);
      scene_.relations.push_back({RelationKind::supplementary_pair, {w, v, u, ext}});
      used_.insert(v);
      return true;
    }
    if (host.kind != RelationKind::triangle) return false;
    if (kind == Attachment::isosceles) {
      if (has_iso_) return false;
      const std::size_t apex = rng_.below(3);
      scene_.relations.push_back(
          {RelationKind::isosceles_pair, {cyc[apex], cyc[(apex + 1) % 3], cyc[(apex + 2) % 3]}});
      has_iso_ = true;
      return true;
    }
    if (has_par_) return false;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < 3; ++i) {
      if (vertex_free(cyc[i])) free.push_back(i);
    }
    if (free.empty()) return false;
    const std::size_t vi = free[rng_.below(free.size())];
    const std::size_t step = 1 + rng_.below(2);
    const Label v = cyc[vi];
    const Label w = cyc[(vi + step) % 3];
    const Label u = cyc[(vi + 3 - step) % 3];
    const Label through = add_point();
    add_segment(v, through);
    // Line v-through parallel to w-u, transversal v-w.
    scene_.relations.push_back({RelationKind::parallel_pair, {v, through, w, u}});
    used_.insert(v);
    has_par_ = true;
    return true;
  }

  SceneGraph& scene() { return scene_; }

 private:
  Label add_point() {
    const Label l = next_++;
    scene_.points.push_back({l, 0, 0});
    return l;
  }
  void add_segment(Label a, Label b) {
    if (b < a) std::swap(a, b);
    scene_.segments.push_back({a, b});
  }
  bool vertex_free(Label v) const { return !used_.count(v); }

  Rng& rng_;
  SceneGraph scene_;
  Label next_ = 'A';
  std::set<Label> used_;
  bool has_iso_ = false;
  bool has_par_ = false;
};

int lattice_value(Rng& rng) {
  return kAngleStep * rng.range(kMinKnownAngle / kAngleStep, kMaxKnownAngle / kAngleStep);
}

// Samples a consistent lattice assignment for every angle variable.
std::optional<std::map<AngleRef, int>> sample_values(const std::vector<Relation>& relations, Rng& rng) {
  std::vector<const Relation*> order;
  for (const auto& r : relations) {
    if (!r.angle_sum()) order.push_back(&r);
  }
  for (const auto& r : relations) {
    if (r.kind == RelationKind::triangle || r.kind == RelationKind::angle_sum_polygon) order.push_back(&r);
  }
  for (const auto& r : relations) {
    if (r.kind == RelationKind::supplementary_pair) order.push_back(&r);
  }

  std::map<AngleRef, int> values;
  for (const Relation* r : order) {
    const auto angles = r->angles();
    std::vector<AngleRef> open;
    int known_sum = 0;
    for (const auto& a : angles) {
      const auto it = values.find(a);
      if (it == values.end()) {
        open.push_back(a);
      } else {
        known_sum += it->second;
      }
    }
    const auto sum = r->angle_sum();
    if (open.empty()) {
      const bool holds = sum ? known_sum == *sum : values.at(angles[0]) == values.at(angles[1]);
      if (!holds) return std::nullopt;
      continue;
    }
    for (std::size_t k = 0; k + 1 < open.size(); ++k) {
      const int v = lattice_value(rng);
      values[open[k]] = v;
      known_sum += v;
    }
    const int last = sum ? *sum - known_sum : known_sum;
    if (!on_lattice(last)) return std::nullopt;
    values[open.back()] = last;
  }
  return values;
}

bool determines(const std::vector<Relation>& relations, const std::map<AngleRef, int>& known,
                const AngleRef& target) {
  return propagate(relations, known).known.count(target) > 0;
}

std::optional<SceneGraph> try_generate(Rng& rng, const Template& tmpl) {
  Builder builder(rng);
  builder.base(tmpl.base);
  for (const auto a : tmpl.attachments) {
    if (!builder.attach(a)) return std::nullopt;
  }
  SceneGraph scene = std::move(builder.scene());

  const auto values = sample_values(scene.relations, rng);
  if (!values) return std::nullopt;

  std::vector<AngleRef> variables;
  for (const auto& r : scene.relations) {
    for (const auto& a : r.angles()) {
      if (std::find(variables.begin(), variables.end(), a) == variables.end()) variables.push_back(a);
    }
  }

  // Pick the unknown and a minimal set of given angles whose derivation
  // exercises every relation of the scene.
  std::vector<std::size_t> candidates(variables.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  rng.shuffle(candidates);
  for (const std::size_t xi : candidates) {
    const AngleRef target = variables[xi];
    std::map<AngleRef, int> given;
    for (const auto& v : variables) {
      if (!(v == target)) given[v] = values->at(v);
    }
    std::vector<AngleRef> removal;
    for (const auto& [a, _] : given) removal.push_back(a);
    rng.shuffle(removal);
    for (const auto& a : removal) {
      const int saved = given.at(a);
      given.erase(a);
      if (!determines(scene.relations, given, target)) given[a] = saved;
    }

    SceneGraph candidate = scene;
    for (const auto& v : variables) {
      if (given.count(v)) candidate.angle_facts.push_back({v, given.at(v)});
    }
    candidate.angle_facts.push_back({target, std::nullopt});
    const Derivation d = derive_unknown(candidate);
    std::set<std::size_t> used;
    for (const auto& s : d.steps) used.insert(s.relation);
    if (used.size() != scene.relations.size()) continue;

    std::vector<std::pair<int, int>> cells;
    for (int x = 0; x < kGridSize; ++x) {
      for (int y = 0; y < kGridSize; ++y) cells.push_back({x, y});
    }
    rng.shuffle(cells);
    for (std::size_t i = 0; i < candidate.points.size(); ++i) {
      candidate.points[i].x = cells[i].first;
      candidate.points[i].y = cells[i].second;
    }
    return candidate;
  }
  return std::nullopt;
}

}  // namespace

SceneGraph generate_scene(std::uint64_t seed, int complexity) {
  if (complexity < 1 || complexity > 3) {
    fail(ErrorKind::argument, "complexity must be in 1..3, got " + std::to_string(complexity));
  }
  const auto& family = templates_for(complexity);
  const Template& tmpl = family[mix_seed(seed, 0x7e3a) % family.size()];
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    if (auto scene = try_generate(rng, tmpl)) return std::move(*scene);
  }
  fail(ErrorKind::generation, "no valid scene after 1000 attempts (seed " + std::to_string(seed) + ")");
}

// ---------------------------------------------------------------------------
// Statements

namespace {

std::optional<RelationKind> relation_keyword(std::string_view word, std::size_t& arity) {
  if (word == "tri") return arity = 3, RelationKind::triangle;
  if (word == "quad") return arity = 4, RelationKind::angle_sum_polygon;
  if (word == "supp") return arity = 4, RelationKind::supplementary_pair;
  if (word == "iso") return arity = 3, RelationKind::isosceles_pair;
  if (word == "par") return arity = 4, RelationKind::parallel_pair;
  return std::nullopt;
}

std::string_view keyword_of(RelationKind kind) {
  switch (kind) {
    case RelationKind::triangle: return "tri";
    case RelationKind::angle_sum_polygon: return "quad";
    case RelationKind::supplementary_pair: return "supp";
    case RelationKind::isosceles_pair: return "iso";
    case RelationKind::parallel_pair: return "par";
  }
  return "";
}

bool all_distinct(std::vector<Label> labels) {
  std::sort(labels.begin(), labels.end());
  return std::adjacent_find(labels.begin(), labels.end()) == labels.end();
}

}  // namespace

Fact parse_statement(std::string_view statement) {
  const auto words = split_words(statement);
  auto bad = [&](const std::string& why) -> Fact {
    fail(ErrorKind::malformed_statement, "'" + std::string(statement) + "': " + why);
  };
  if (words.empty()) return bad("empty statement");
  if (words[0] == "angle") {
    if (words.size() != 5) return bad("angle statement takes three labels and a value");
    for (std::size_t i = 1; i <= 3; ++i) {
      if (!is_label(words[i])) return bad("expected a point label");
    }
    if (!all_distinct({words[1][0], words[2][0], words[3][0]})) return bad("repeated label");
    AngleFact fact{AngleRef::make(words[1][0], words[2][0], words[3][0]), std::nullopt};
    if (words[4] != tok::unknown) {
      const std::string& v = words[4];
      if (v.empty() || v.size() > 3 || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return bad("angle value must be an integer or x");
      }
      const int value = std::stoi(v);
      if (value < 1 || value > 179) return bad("angle value out of range");
      fact.value = value;
    }
    return fact;
  }
  std::size_t arity = 0;
  const auto kind = relation_keyword(words[0], arity);
  if (!kind) return bad("unknown keyword '" + words[0] + "'");
  if (words.size() != arity + 1) return bad("wrong number of labels");
  Relation r{*kind, {}};
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (!is_label(words[i])) return bad("expected a point label");
    r.participants.push_back(words[i][0]);
  }
  if (!all_distinct(r.participants)) return bad("repeated label");
  return r.canonical();
}

std::string format_fact(const Fact& fact) {
  if (const auto* a = std::get_if<AngleFact>(&fact)) {
    return "angle " + a->angle.str() + " " + (a->value ? std::to_string(*a->value) : std::string(tok::unknown));
  }
  const Relation r = std::get<Relation>(fact).canonical();
  std::string out(keyword_of(r.kind));
  for (Label l : r.participants) {
    out += ' ';
    out += l;
  }
  return out;
}

StatementBlock block_of(const Fact& fact) {
  if (std::holds_alternative<AngleFact>(fact)) return StatementBlock::measure;
  switch (std::get<Relation>(fact).kind) {
    case RelationKind::triangle:
    case RelationKind::angle_sum_polygon:
      return StatementBlock::entity;
    case RelationKind::supplementary_pair:
      return StatementBlock::incidence;
    case RelationKind::isosceles_pair:
    case RelationKind::parallel_pair:
      return StatementBlock::relation;
  }
  return StatementBlock::relation;
}

StatementList scene_statements(const SceneGraph& scene) {
  StatementList out;
  for (const auto& r : scene.relations) out.push_back(format_fact(r));
  for (const auto& f : scene.angle_facts) out.push_back(format_fact(f));
  return refine_description(out);
}

StatementList verbose_description(const SceneGraph& scene, std::uint64_t seed) {
  Rng rng(seed);
  StatementList out;
  for (const auto& r : scene.relations) {
    const std::string s = format_fact(r);
    for (int k = rng.range(1, 3); k > 0; --k) out.push_back(s);
  }
  for (const auto& f : scene.angle_facts) {
    const std::string s = format_fact(f);
    for (int k = rng.range(1, 3); k > 0; --k) out.push_back(s);
  }
  rng.shuffle(out);
  return out;
}

StatementList refine_description(const StatementList& statements) {
  std::vector<std::pair<int, std::string>> keyed;
  keyed.reserve(statements.size());
  for (std::size_t i = 0; i < statements.size(); ++i) {
    Fact fact;
    try {
      fact = parse_statement(statements[i]);
    } catch (const Error& e) {
      fail(ErrorKind::malformed_statement, "statement " + std::to_string(i) + ": " + e.what());
    }
    keyed.push_back({static_cast<int>(block_of(fact)), format_fact(fact)});
  }
  std::sort(keyed.begin(), keyed.end());
  keyed.erase(std::unique(keyed.begin(), keyed.end()), keyed.end());
  StatementList out;
  out.reserve(keyed.size());
  for (auto& [_, s] : keyed) out.push_back(std::move(s));
  return out;
}

SceneGraph scene_from_statements(const StatementList& statements) {
  SceneGraph scene;
  std::set<Label> labels;
  for (const auto& s : refine_description(statements)) {
    const Fact fact = parse_statement(s);
    if (const auto* a = std::get_if<AngleFact>(&fact)) {
      scene.angle_facts.push_back(*a);
      labels.insert({a->angle.arm1, a->angle.vertex, a->angle.arm2});
    } else {
      const auto& r = std::get<Relation>(fact);
      scene.relations.push_back(r);
      labels.insert(r.participants.begin(), r.participants.end());
    }
  }
  for (Label l : labels) scene.points.push_back({l, 0, 0});
  return scene;
}

TokenSequence statements_to_tokens(const StatementList& statements) {
  TokenSequence out;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    if (i > 0) out.emplace_back(tok::statement_sep);
    for (auto& w : split_words(statements[i])) out.push_back(std::move(w));
  }
  return out;
}

StatementList tokens_to_statements(const TokenSequence& tokens) {
  StatementList out;
  std::string current;
  for (const auto& t : tokens) {
    if (t == tok::statement_sep) {
      out.push_back(current);
      current.clear();
      continue;
    }
    if (!current.empty()) current += ' ';
    current += t;
  }
  if (!current.empty() || !out.empty()) out.push_back(current);
  return out;
}

// ---------------------------------------------------------------------------
// Problems

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::text_dominant: return "TextDominant";
    case Variant::text_lite: return "TextLite";
    case Variant::vision_intensive: return "VisionIntensive";
    case Variant::vision_dominant: return "VisionDominant";
    case Variant::vision_only: return "VisionOnly";
  }
  return "";
}

Variant parse_variant(std::string_view name) {
  for (const auto v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  fail(ErrorKind::format, "unknown variant '" + std::string(name) + "'");
}

ProblemInstance synthesize_question(const SceneGraph& scene, std::uint64_t seed) {
  const Derivation derivation = derive_unknown(scene);
  const int x = derivation.value;
  const AngleRef target = scene.unknown_fact().angle;

  std::vector<int> siblings;
  for (const auto& f : scene.angle_facts) {
    if (f.value) siblings.push_back(*f.value);
  }
  for (const auto& s : derivation.steps) siblings.push_back(s.value);

  Rng rng(seed);
  std::vector<int> pool;
  std::vector<int> candidates = siblings;
  candidates.push_back(180 - x);
  // Widen the offset until three distinct distractors are available.
  for (int offset = 20; offset <= 60 && pool.size() < 3; offset += 10) {
    candidates.push_back(std::abs(x - offset));
    candidates.push_back(x + offset);
    for (int c : candidates) {
      if (c == x || c < 1 || c > 179) continue;
      if (std::find(pool.begin(), pool.end(), c) == pool.end()) pool.push_back(c);
    }
  }
  if (pool.size() < 3) fail(ErrorKind::synthesis, "fewer than three distractors for x = " + std::to_string(x));
  rng.shuffle(pool);

  std::vector<int> values = {x, pool[0], pool[1], pool[2]};
  rng.shuffle(values);

  ProblemInstance problem;
  problem.scene = scene;
  problem.question = {std::string(tok::find), "angle", label_str(target.arm1), label_str(target.vertex),
                      label_str(target.arm2)};
  for (std::size_t i = 0; i < 4; ++i) {
    problem.choices[i] = values[i];
    if (values[i] == x) problem.gt_choice = static_cast<char>('A' + i);
  }
  for (const auto& s : derivation.steps) {
    problem.solution_steps.push_back(format_fact(AngleFact{s.angle, s.value}));
  }
  return problem;
}

SceneGraph jitter_points(const SceneGraph& scene) {
  SceneGraph out = scene;
  for (auto& p : out.points) {
    const int k = p.label - 'A';
    p.x = (p.x + 1 + k % 2) % kGridSize;
    p.y = (p.y + 1 + (k / 2) % 2) % kGridSize;
  }
  return out;
}

TokenSequence encode_scene(const SceneGraph& scene, Variant variant, const TokenSequence& embedded) {
  std::vector<TokenSequence> commands;
  for (const auto& p : scene.points) {
    commands.push_back({"POINT", label_str(p.label), std::to_string(p.x), std::to_string(p.y)});
  }
  std::set<std::pair<Label, Label>> covered;
  for (const auto& r : scene.relations) {
    const Relation c = r.canonical();
    const auto& p = c.participants;
    switch (c.kind) {
      case RelationKind::supplementary_pair:
        commands.push_back({"COLL", label_str(p[2]), label_str(p[1]), label_str(p[3])});
        covered.insert(std::minmax(p[1], p[2]));
        covered.insert(std::minmax(p[1], p[3]));
        break;
      case RelationKind::isosceles_pair:
        commands.push_back({"TICK", label_str(p[0]), label_str(p[1])});
        commands.push_back({"TICK", label_str(p[0]), label_str(p[2])});
        break;
      case RelationKind::parallel_pair:
        commands.push_back({"ARROW", label_str(p[0]), label_str(p[1])});
        commands.push_back({"ARROW", label_str(p[2]), label_str(p[3])});
        break;
      default:
        break;
    }
  }
  for (const auto& s : scene.segments) {
    if (covered.count(std::minmax(s.a, s.b))) continue;
    commands.push_back({"SEG", label_str(std::min(s.a, s.b)), label_str(std::max(s.a, s.b))});
  }
  for (const auto& f : scene.angle_facts) {
    commands.push_back({"ANGLE", label_str(f.angle.arm1), label_str(f.angle.vertex), label_str(f.angle.arm2),
                        f.value ? std::to_string(*f.value) : std::string(tok::unknown)});
  }

  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const std::string text = join(commands[i], " ");
    keyed.push_back({fnv1a(text), text});
  }
  std::sort(keyed.begin(), keyed.end());

  TokenSequence out;
  for (const auto& [_, text] : keyed) {
    for (auto& w : split_words(text)) out.push_back(std::move(w));
  }
  if (variant == Variant::vision_dominant || variant == Variant::vision_only) {
    out.emplace_back(tok::text_begin);
    out.insert(out.end(), embedded.begin(), embedded.end());
    out.emplace_back(tok::text_end);
  }
  return out;
}

TokenSequence choice_tokens(const std::array<int, 4>& choices) {
  TokenSequence out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.push_back(choice_token(static_cast<char>('A' + i)));
    out.push_back(std::to_string(choices[i]));
  }
  return out;
}

PipelineInput render_variant(const ProblemInstance& problem, Variant variant) {
  const TokenSequence choices = choice_tokens(problem.choices);
  TokenSequence question_and_choices = problem.question;
  question_and_choices.insert(question_and_choices.end(), choices.begin(), choices.end());

  PipelineInput input;
  switch (variant) {
    case Variant::text_dominant: {
      input.text_channel = question_and_choices;
      input.text_channel.emplace_back(tok::sep);
      const auto desc = statements_to_tokens(scene_statements(problem.scene));
      input.text_channel.insert(input.text_channel.end(), desc.begin(), desc.end());
      input.scene_channel = encode_scene(problem.scene, variant, {});
      break;
    }
    case Variant::text_lite:
      input.text_channel = question_and_choices;
      input.scene_channel = encode_scene(problem.scene, variant, {});
      break;
    case Variant::vision_intensive:
      input.text_channel = question_and_choices;
      input.scene_channel = encode_scene(jitter_points(problem.scene), variant, {});
      break;
    case Variant::vision_dominant:
      input.text_channel = choices;
      input.scene_channel = encode_scene(problem.scene, variant, problem.question);
      break;
    case Variant::vision_only:
      input.scene_channel = encode_scene(problem.scene, variant, question_and_choices);
      break;
  }
  return input;
}

ProblemInstance generate_problem(std::uint64_t corpus_seed, std::uint64_t index) {
  const std::uint64_t seed = mix_seed(corpus_seed, index);
  const int complexity = static_cast<int>(index % 3) + 1;
  return synthesize_question(generate_scene(seed, complexity), mix_seed(seed, 0x5eed));
}

}  // namespace dvlr::geo
