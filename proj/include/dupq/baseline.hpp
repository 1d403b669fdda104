#pragma once

#include "dupq/corpus.hpp"
#include "dupq/retrieval.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace dupq {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

/// Okapi BM25 over title ⊕ body tokens.
class Bm25Index {
 public:
  static Bm25Index build(const std::vector<QuestionRecord>& records, Bm25Params params = {});

  std::size_t document_count() const { return lengths_.size(); }
  double average_length() const { return avg_length_; }
  const Bm25Params& params() const { return params_; }
  bool contains(QuestionId doc) const { return doc_of_.count(doc) != 0; }

  std::size_t document_frequency(const std::string& term) const;
  std::size_t term_frequency(QuestionId doc, const std::string& term) const;
  std::size_t length(QuestionId doc) const;

  /// ln((N - df + 0.5) / (df + 0.5) + 1).
  double idf(const std::string& term) const;
  /// Sum over query tokens (repeats count) of idf * tf (k1 + 1) / (tf + k1 (1 - b + b len / avglen)).
  /// Throws std::out_of_range for an unindexed document.
  double score(const TokenSequence& query, QuestionId doc) const;

 private:
  using TermId = std::uint32_t;
  Bm25Params params_;
  std::unordered_map<std::string, TermId> terms_;
  std::vector<std::size_t> df_;
  std::unordered_map<QuestionId, std::size_t> doc_of_;
  std::vector<std::vector<std::pair<TermId, std::uint32_t>>> tf_;  ///< sorted by term id
  std::vector<std::size_t> lengths_;
  double avg_length_ = 0;
};

/// Document tokens used by the index: title followed by body.
TokenSequence document_tokens(const QuestionRecord& record);

/// Ranks candidates by BM25 against the anchor's title ⊕ body, with the same
/// tie-break as the head ranking.
RankedList bm25_rank(const QuestionRecord& anchor, const CandidateSet& set, const Bm25Index& index,
                     const QuestionIndex& questions, std::optional<QuestionId> gold);

}  // namespace dupq
