#include "dupq/features.hpp"

#include "dupq/parallel.hpp"

namespace dupq {

namespace {

void check_network_inputs(FeatureMode mode, const TagGraph* graph, const EmbeddingStore* tag_store) {
  if (mode == FeatureMode::kTextNetwork && (!graph || !tag_store))
    throw ConfigError("text+network features need the tag graph and tag embeddings");
}

void fill_row(Eigen::Ref<Eigen::RowVectorXd> out, const QuestionRecord& record, const QuestionEncoder& encoder,
              FeatureMode mode, const TagGraph* graph, const EmbeddingStore* tag_store) {
  auto fields = encoder.encode(record);
  const int t = encoder.title_dim(), b = encoder.body_dim();
  if (fields.title.size() != t || fields.body.size() != b)
    throw ConfigError("encoder returned vectors of unexpected size");
  out.head(t) = fields.title.transpose();
  out.segment(t, b) = fields.body.transpose();
  if (mode == FeatureMode::kTextNetwork) {
    auto tag = tag_store->find(top_tag(record, *graph));
    if (tag) out.tail(tag_store->dimension()) = tag->transpose();
    else out.tail(tag_store->dimension()).setZero();
  }
}

}  // namespace

FeatureTable FeatureTable::build(const std::vector<QuestionRecord>& records, const QuestionEncoder& encoder,
                                 FeatureMode mode, const TagGraph* graph, const EmbeddingStore* tag_store,
                                 unsigned threads) {
  check_network_inputs(mode, graph, tag_store);
  FeatureTable table;
  table.mode_ = mode;
  table.title_dim_ = encoder.title_dim();
  table.body_dim_ = encoder.body_dim();
  table.tag_dim_ = mode == FeatureMode::kTextNetwork ? tag_store->dimension() : 0;
  table.rows_.resize(Eigen::Index(records.size()), table.text_dim() + table.tag_dim_);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!table.row_of_.emplace(records[i].id, i).second)
      throw FormatError("repeated question id " + std::to_string(records[i].id));
  parallel_for(records.size(), threads, [&](std::size_t i) {
    fill_row(table.rows_.row(Eigen::Index(i)), records[i], encoder, mode, graph, tag_store);
  });
  return table;
}

VectorXd FeatureTable::encode_one(const QuestionRecord& record, const QuestionEncoder& encoder, FeatureMode mode,
                                  const TagGraph* graph, const EmbeddingStore* tag_store) {
  check_network_inputs(mode, graph, tag_store);
  const int dim = encoder.title_dim() + encoder.body_dim() +
                  (mode == FeatureMode::kTextNetwork ? tag_store->dimension() : 0);
  Eigen::RowVectorXd row(dim);
  fill_row(row, record, encoder, mode, graph, tag_store);
  return row.transpose();
}

std::size_t FeatureTable::row_index(QuestionId id) const {
  auto it = row_of_.find(id);
  if (it == row_of_.end()) throw std::out_of_range("no features for question " + std::to_string(id));
  return it->second;
}

}  // namespace dupq
