#pragma once

#include "dupq/corpus.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace dupq {

/// Counts reported by `ingest` and `stats`. Keys are stable identifiers.
using CorpusStats = std::map<std::string, double>;

CorpusStats compute_corpus_stats(const std::vector<QuestionRecord>& records,
                                 const std::vector<DuplicatePair>& pairs);

/// On-disk corpus archive: `questions.jsonl`, `pairs.jsonl`, `stats.json`.
struct CorpusArchive {
  std::vector<QuestionRecord> questions;
  std::vector<DuplicatePair> pairs;
  CorpusStats stats;

  void save(const std::filesystem::path& dir) const;
  static CorpusArchive load(const std::filesystem::path& dir);
};

std::string question_to_json_line(const QuestionRecord& q);
QuestionRecord question_from_json_line(const std::string& line);
std::string pair_to_json_line(const DuplicatePair& p);
DuplicatePair pair_from_json_line(const std::string& line);

}  // namespace dupq
