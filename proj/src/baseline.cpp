#include "dupq/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dupq {

TokenSequence document_tokens(const QuestionRecord& record) {
  TokenSequence doc = record.title_tokens;
  doc.insert(doc.end(), record.body_tokens.begin(), record.body_tokens.end());
  return doc;
}

Bm25Index Bm25Index::build(const std::vector<QuestionRecord>& records, Bm25Params params) {
  Bm25Index index;
  index.params_ = params;
  std::size_t total = 0;
  for (const auto& rec : records) {
    if (!index.doc_of_.emplace(rec.id, index.lengths_.size()).second)
      throw FormatError("repeated question id " + std::to_string(rec.id));
    std::unordered_map<TermId, std::uint32_t> counts;
    const auto doc = document_tokens(rec);
    for (const auto& token : doc) {
      auto [it, inserted] = index.terms_.emplace(token, TermId(index.df_.size()));
      if (inserted) index.df_.push_back(0);
      ++counts[it->second];
    }
    std::vector<std::pair<TermId, std::uint32_t>> tf(counts.begin(), counts.end());
    std::sort(tf.begin(), tf.end());
    for (const auto& [term, _] : tf) ++index.df_[term];
    index.tf_.push_back(std::move(tf));
    index.lengths_.push_back(doc.size());
    total += doc.size();
  }
  index.avg_length_ = index.lengths_.empty() ? 0.0 : double(total) / double(index.lengths_.size());
  return index;
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
  auto it = terms_.find(term);
  return it == terms_.end() ? 0 : df_[it->second];
}

std::size_t Bm25Index::term_frequency(QuestionId doc, const std::string& term) const {
  auto d = doc_of_.find(doc);
  if (d == doc_of_.end()) throw std::out_of_range("document " + std::to_string(doc) + " is not indexed");
  auto t = terms_.find(term);
  if (t == terms_.end()) return 0;
  const auto& tf = tf_[d->second];
  auto it = std::lower_bound(tf.begin(), tf.end(), std::make_pair(t->second, std::uint32_t(0)));
  return (it != tf.end() && it->first == t->second) ? it->second : 0;
}

std::size_t Bm25Index::length(QuestionId doc) const {
  auto d = doc_of_.find(doc);
  if (d == doc_of_.end()) throw std::out_of_range("document " + std::to_string(doc) + " is not indexed");
  return lengths_[d->second];
}

double Bm25Index::idf(const std::string& term) const {
  const double n = double(document_count());
  const double df = double(document_frequency(term));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::score(const TokenSequence& query, QuestionId doc) const {
  const double len = double(length(doc));
  const double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_length_);
  // Terms are summed in sorted order so the score does not depend on query order.
  std::map<std::string_view, int> multiplicity;
  for (const auto& term : query) ++multiplicity[term];
  double s = 0;
  for (const auto& [term, times] : multiplicity) {
    const std::string key(term);
    const double tf = double(term_frequency(doc, key));
    if (tf == 0) continue;
    s += times * idf(key) * tf * (params_.k1 + 1.0) / (tf + norm);
  }
  return s;
}

RankedList bm25_rank(const QuestionRecord& anchor, const CandidateSet& set, const Bm25Index& index,
                     const QuestionIndex& questions, std::optional<QuestionId> gold) {
  const auto query = document_tokens(anchor);
  std::vector<RankedCandidate> scored;
  scored.reserve(set.candidates.size());
  for (const auto& c : set.candidates) scored.push_back({c.id, index.score(query, c.id)});
  return rank_by_score(anchor.id, std::move(scored), questions, gold);
}

}  // namespace dupq
