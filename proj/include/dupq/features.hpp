#pragma once

#include "dupq/embed.hpp"
#include "dupq/taggraph.hpp"

#include <unordered_map>

namespace dupq {

/// Per-question input rows `title ⊕ body (⊕ top-tag)` for a set of records.
/// The title block is the leading `title_dim` columns and the text block the
/// leading `text_dim()` columns.
class FeatureTable {
 public:
  FeatureTable() = default;

  /// `graph` and `tag_store` are required in text+network mode. Questions
  /// whose top tag has no vector get a zero tag block.
  static FeatureTable build(const std::vector<QuestionRecord>& records, const QuestionEncoder& encoder,
                            FeatureMode mode, const TagGraph* graph = nullptr,
                            const EmbeddingStore* tag_store = nullptr, unsigned threads = 1);

  /// Single row for a record that is not part of the table (e.g. a live query).
  static VectorXd encode_one(const QuestionRecord& record, const QuestionEncoder& encoder, FeatureMode mode,
                             const TagGraph* graph, const EmbeddingStore* tag_store);

  FeatureMode mode() const { return mode_; }
  int title_dim() const { return title_dim_; }
  int body_dim() const { return body_dim_; }
  int tag_dim() const { return tag_dim_; }
  int text_dim() const { return title_dim_ + body_dim_; }
  int input_dim() const { return int(rows_.cols()); }
  std::size_t size() const { return std::size_t(rows_.rows()); }

  bool contains(QuestionId id) const { return row_of_.count(id) != 0; }
  std::size_t row_index(QuestionId id) const;
  auto row(QuestionId id) const { return rows_.row(Eigen::Index(row_index(id))); }
  auto title(QuestionId id) const { return row(id).head(title_dim_); }
  auto text(QuestionId id) const { return row(id).head(text_dim()); }
  const RowMatrix<double>& rows() const { return rows_; }

 private:
  FeatureMode mode_ = FeatureMode::kText;
  int title_dim_ = 0;
  int body_dim_ = 0;
  int tag_dim_ = 0;
  RowMatrix<double> rows_;
  std::unordered_map<QuestionId, std::size_t> row_of_;
};

}  // namespace dupq
