#pragma once

// Corpus records: one line per (problem, variant) with tab-separated fields
//   variant, text tokens, scene tokens, "A=v1;B=v2;C=v3;D=v4", gt label,
//   refined description tokens, solution-step tokens.

#include <array>
#include <string>
#include <vector>

#include "dvlr/geo.hpp"

namespace dvlr {

struct CorpusRecord {
  geo::Variant variant = geo::Variant::text_dominant;
  TokenSequence text;
  TokenSequence scene;
  std::array<int, 4> choices{};
  char gt = 'A';
  TokenSequence description;
  TokenSequence solution;

  bool operator==(const CorpusRecord&) const = default;
};

// All renditions of one problem plus the fields they share.
struct CorpusProblem {
  TokenSequence question;
  std::array<int, 4> choices{};
  char gt = 'A';
  TokenSequence description;
  TokenSequence solution;
  std::vector<CorpusRecord> renditions;

  const CorpusRecord& rendition(geo::Variant variant) const;
};

CorpusRecord make_record(const geo::ProblemInstance& problem, geo::Variant variant);
std::string format_record(const CorpusRecord& record);
// Throws a format error describing the bad field.
CorpusRecord parse_record(const std::string& line);

void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> read_corpus(const std::string& path);

// Groups consecutive records that share choices, answer, description and
// solution into problems.
std::vector<CorpusProblem> group_problems(const std::vector<CorpusRecord>& records);

// Problems [first, first + count) of a corpus seed, every variant rendered.
std::vector<CorpusRecord> generate_records(std::uint64_t seed, std::uint64_t first, std::uint64_t count);

// The question tokens of a rendition, wherever the variant carries them.
TokenSequence question_of(const CorpusRecord& record);

}  // namespace dvlr
