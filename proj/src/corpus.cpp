#include "dvlr/corpus.hpp"

#include <algorithm>
#include <fstream>

#include "dvlr/common.hpp"

namespace dvlr {

const CorpusRecord& CorpusProblem::rendition(geo::Variant variant) const {
  for (const auto& r : renditions) {
    if (r.variant == variant) return r;
  }
  fail(ErrorKind::contract, "problem has no " + std::string(geo::to_string(variant)) + " rendition");
}

CorpusRecord make_record(const geo::ProblemInstance& problem, geo::Variant variant) {
  const auto input = geo::render_variant(problem, variant);
  CorpusRecord r;
  r.variant = variant;
  r.text = input.text_channel;
  r.scene = input.scene_channel;
  r.choices = problem.choices;
  r.gt = problem.gt_choice;
  r.description = geo::statements_to_tokens(geo::scene_statements(problem.scene));
  r.solution = geo::statements_to_tokens(problem.solution_steps);
  return r;
}

std::string format_record(const CorpusRecord& r) {
  std::string choices;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i > 0) choices += ';';
    choices += static_cast<char>('A' + i);
    choices += '=';
    choices += std::to_string(r.choices[i]);
  }
  return std::string(geo::to_string(r.variant)) + '\t' + join(r.text, " ") + '\t' + join(r.scene, " ") + '\t' +
         choices + '\t' + std::string(1, r.gt) + '\t' + join(r.description, " ") + '\t' + join(r.solution, " ");
}

CorpusRecord parse_record(const std::string& line) {
  const auto fields = split(line, '\t');
  if (fields.size() != 7) {
    fail(ErrorKind::format, "corpus record has " + std::to_string(fields.size()) + " fields, expected 7");
  }
  CorpusRecord r;
  r.variant = geo::parse_variant(fields[0]);
  r.text = split_words(fields[1]);
  r.scene = split_words(fields[2]);
  const auto parts = split(fields[3], ';');
  if (parts.size() != 4) fail(ErrorKind::format, "choices field must hold four entries: " + fields[3]);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string& p = parts[i];
    if (p.size() < 3 || p[0] != static_cast<char>('A' + i) || p[1] != '=') {
      fail(ErrorKind::format, "bad choice entry '" + p + "'");
    }
    try {
      r.choices[i] = std::stoi(p.substr(2));
    } catch (const std::exception&) {
      fail(ErrorKind::format, "bad choice value '" + p + "'");
    }
  }
  if (fields[4].size() != 1 || fields[4][0] < 'A' || fields[4][0] > 'D') {
    fail(ErrorKind::format, "bad gt label '" + fields[4] + "'");
  }
  r.gt = fields[4][0];
  r.description = split_words(fields[5]);
  r.solution = split_words(fields[6]);
  return r;
}

void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  for (const auto& r : records) out << format_record(r) << '\n';
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

std::vector<CorpusRecord> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::vector<CorpusRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const Error& e) {
      fail(ErrorKind::format, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

TokenSequence question_of(const CorpusRecord& r) {
  auto before_choices = [](const TokenSequence& seq, std::size_t from, std::size_t to) {
    TokenSequence q;
    for (std::size_t i = from; i < to && !choice_label(seq[i]); ++i) q.push_back(seq[i]);
    return q;
  };
  if (r.variant == geo::Variant::vision_dominant || r.variant == geo::Variant::vision_only) {
    const auto b = std::find(r.scene.begin(), r.scene.end(), tok::text_begin);
    const auto e = std::find(r.scene.begin(), r.scene.end(), tok::text_end);
    if (b == r.scene.end() || e < b) fail(ErrorKind::format, "scene channel lacks embedded text");
    return before_choices(r.scene, static_cast<std::size_t>(b - r.scene.begin()) + 1,
                          static_cast<std::size_t>(e - r.scene.begin()));
  }
  return before_choices(r.text, 0, r.text.size());
}

std::vector<CorpusProblem> group_problems(const std::vector<CorpusRecord>& records) {
  std::vector<CorpusProblem> out;
  for (const auto& r : records) {
    const bool same = !out.empty() && out.back().choices == r.choices && out.back().gt == r.gt &&
                      out.back().description == r.description && out.back().solution == r.solution;
    const bool repeated_variant =
        same && std::any_of(out.back().renditions.begin(), out.back().renditions.end(),
                            [&](const CorpusRecord& x) { return x.variant == r.variant; });
    if (!same || repeated_variant) {
      CorpusProblem p;
      p.question = question_of(r);
      p.choices = r.choices;
      p.gt = r.gt;
      p.description = r.description;
      p.solution = r.solution;
      out.push_back(std::move(p));
    }
    out.back().renditions.push_back(r);
  }
  return out;
}

std::vector<CorpusRecord> generate_records(std::uint64_t seed, std::uint64_t first, std::uint64_t count) {
  std::vector<CorpusRecord> out;
  out.reserve(count * geo::kAllVariants.size());
  for (std::uint64_t j = first; j < first + count; ++j) {
    const auto problem = geo::generate_problem(seed, j);
    for (const auto v : geo::kAllVariants) out.push_back(make_record(problem, v));
  }
  return out;
}

}  // namespace dvlr
