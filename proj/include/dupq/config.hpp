#pragma once

#include "dupq/baseline.hpp"
#include "dupq/corpus.hpp"
#include "dupq/embed.hpp"
#include "dupq/retrieval.hpp"
#include "dupq/taggraph.hpp"
#include "dupq/timepred.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dupq {

/// Every pipeline setting as one JSON tree. Leaves are addressed by dotted
/// names (`node2vec.p`, `head.lr`); the set of keys and their types is fixed
/// by defaults().
class PipelineConfig {
 public:
  PipelineConfig();

  static const nlohmann::ordered_json& defaults();
  /// Dotted names of every leaf, in document order.
  static std::vector<std::string> keys();

  /// Overlays a JSON document; unknown keys and type mismatches throw ConfigError.
  void merge(const nlohmann::json& overlay);
  void merge_file(const std::filesystem::path& path);
  /// Sets one leaf from its textual form, parsed as the leaf's type.
  void set(const std::string& dotted, const std::string& value);

  const nlohmann::ordered_json& tree() const { return tree_; }
  std::string dump() const { return tree_.dump(2) + "\n"; }

  /// Range and sign checks; throws ConfigError.
  void validate() const;

  template <typename T>
  T get(const std::string& dotted) const {
    return leaf(dotted).get<T>();
  }

  std::uint64_t seed() const { return get<std::uint64_t>("seed"); }
  unsigned threads() const { return get<unsigned>("threads"); }
  bool deterministic() const { return get<bool>("deterministic"); }
  FeatureMode feature_mode() const { return parse_feature_mode(get<std::string>("feature_mode")); }
  std::filesystem::path work_dir() const { return get<std::string>("paths.work_dir"); }

  SplitWindows windows() const;
  double graph_threshold() const { return get<double>("graph.edge_threshold"); }
  WalkConfig walk() const;
  SgnsConfig node2vec() const;
  SgnsConfig word2vec() const;
  CandidateFilter candidate_filter() const;
  HeadTrainConfig head() const;
  double alpha() const { return get<double>("head.alpha"); }
  Bm25Params bm25() const;
  TimeMlpConfig time_mlp(FeatureMode mode) const;
  TreeConfig time_tree() const;
  Timestamp time_test_start() const;

 private:
  const nlohmann::ordered_json& leaf(const std::string& dotted) const;
  /// Independent stream per named stage, derived from the global seed.
  std::uint64_t derive_seed_for(std::string_view stage) const;

  nlohmann::ordered_json tree_;
};

}  // namespace dupq
