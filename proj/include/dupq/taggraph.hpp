#pragma once

#include "dupq/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dupq {

inline constexpr double kDefaultEdgeThreshold = 0.005;
inline constexpr const char* kUnknownTag = "unknown-tag";

/// Weighted undirected tag co-occurrence graph. Nodes are kept sorted; each
/// adjacency list is sorted by neighbour index.
class TagGraph {
 public:
  using NodeIndex = std::uint32_t;
  struct Edge {
    NodeIndex to;
    double weight;
  };

  TagGraph() = default;

  /// Jaccard weights |Q(a) ∩ Q(b)| / |Q(a) ∪ Q(b)| over the given questions;
  /// edges with weight <= threshold are discarded.
  static TagGraph build(const std::vector<QuestionRecord>& records,
                        double threshold = kDefaultEdgeThreshold);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const;
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& name(NodeIndex i) const { return nodes_[i]; }
  std::optional<NodeIndex> index_of(const std::string& tag) const;
  const std::vector<Edge>& neighbors(NodeIndex i) const { return adjacency_[i]; }
  bool adjacent(NodeIndex a, NodeIndex b) const;
  /// 0 when there is no edge.
  double weight(const std::string& a, const std::string& b) const;
  double weight(NodeIndex a, NodeIndex b) const;
  /// Number of training questions carrying the tag; 0 for unseen tags.
  std::size_t question_count(const std::string& tag) const;

  /// `tag_a<TAB>tag_b<TAB>weight` with tag_a < tag_b, plus a `tag<TAB>count`
  /// sidecar that also carries isolated nodes.
  void save(const std::filesystem::path& edges, const std::filesystem::path& counts) const;
  static TagGraph load(const std::filesystem::path& edges, const std::filesystem::path& counts);

 private:
  void add_node(const std::string& tag, std::size_t count);
  void add_edge(NodeIndex a, NodeIndex b, double weight);
  void finalize();

  std::vector<std::string> nodes_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<std::size_t> counts_;
};

struct WalkConfig {
  double p = 1.3;
  double q = 0.8;
  int walks_per_node = 5;
  int walk_length = 80;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Unnormalised second-order weights for stepping from `current` having
/// arrived from `previous`: w(current,x) times 1/p (x == previous), 1 (x
/// adjacent to previous) or 1/q (otherwise). Order follows `neighbors(current)`.
std::vector<double> transition_weights(const TagGraph& graph, TagGraph::NodeIndex previous,
                                       TagGraph::NodeIndex current, double p, double q);

/// One walk per (walk index, start node), ordered walk-major. Each walk draws
/// from its own stream seeded by (seed, node, walk index), so the output does
/// not depend on `threads`.
std::vector<std::vector<std::string>> generate_walks(const TagGraph& graph, const WalkConfig& cfg,
                                                     unsigned threads = 1);

/// Tag with the highest training count; ties go to the lexicographically
/// smaller tag. Returns kUnknownTag when no tag was seen in training.
std::string top_tag(const QuestionRecord& record, const TagGraph& graph);

}  // namespace dupq
