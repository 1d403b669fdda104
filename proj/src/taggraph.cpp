#include "dupq/taggraph.hpp"

#include "dupq/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace dupq {

namespace {

double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

std::size_t sample_index(const std::vector<double>& weights, std::mt19937_64& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double target = unit_uniform(rng) * total;
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // Rounding can leave target == total; fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0) return i;
  return weights.size() - 1;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void TagGraph::add_node(const std::string& tag, std::size_t count) {
  auto [it, inserted] = index_.emplace(tag, NodeIndex(nodes_.size()));
  if (!inserted) {
    counts_[it->second] = count;
    return;
  }
  nodes_.push_back(tag);
  counts_.push_back(count);
  adjacency_.emplace_back();
}

void TagGraph::add_edge(NodeIndex a, NodeIndex b, double weight) {
  adjacency_[a].push_back({b, weight});
  adjacency_[b].push_back({a, weight});
}

void TagGraph::finalize() {
  // Re-index so nodes are sorted; keeps every derived output independent of
  // insertion order.
  std::vector<NodeIndex> order(nodes_.size());
  for (NodeIndex i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) { return nodes_[a] < nodes_[b]; });
  std::vector<NodeIndex> remap(nodes_.size());
  for (NodeIndex i = 0; i < order.size(); ++i) remap[order[i]] = i;

  std::vector<std::string> nodes(nodes_.size());
  std::vector<std::size_t> counts(nodes_.size());
  std::vector<std::vector<Edge>> adjacency(nodes_.size());
  for (NodeIndex old = 0; old < nodes_.size(); ++old) {
    NodeIndex now = remap[old];
    nodes[now] = std::move(nodes_[old]);
    counts[now] = counts_[old];
    for (const auto& e : adjacency_[old]) adjacency[now].push_back({remap[e.to], e.weight});
    std::sort(adjacency[now].begin(), adjacency[now].end(),
              [](const Edge& x, const Edge& y) { return x.to < y.to; });
  }
  nodes_ = std::move(nodes);
  counts_ = std::move(counts);
  adjacency_ = std::move(adjacency);
  index_.clear();
  for (NodeIndex i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);
}

TagGraph TagGraph::build(const std::vector<QuestionRecord>& records, double threshold) {
  std::map<std::string, std::size_t> counts;
  std::map<std::pair<std::string, std::string>, std::size_t> together;
  for (const auto& q : records) {
    auto tags = tag_set(q.tags);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      ++counts[tags[i]];
      for (std::size_t j = i + 1; j < tags.size(); ++j) ++together[{tags[i], tags[j]}];
    }
  }
  TagGraph g;
  for (const auto& [tag, n] : counts) g.add_node(tag, n);
  for (const auto& [key, both] : together) {
    double uni = double(counts[key.first] + counts[key.second] - both);
    double w = double(both) / uni;
    if (w > threshold) g.add_edge(g.index_.at(key.first), g.index_.at(key.second), w);
  }
  g.finalize();
  return g;
}

std::size_t TagGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& adj : adjacency_) n += adj.size();
  return n / 2;
}

std::optional<TagGraph::NodeIndex> TagGraph::index_of(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double TagGraph::weight(NodeIndex a, NodeIndex b) const {
  const auto& adj = adjacency_[a];
  auto it = std::lower_bound(adj.begin(), adj.end(), b,
                             [](const Edge& e, NodeIndex v) { return e.to < v; });
  return (it != adj.end() && it->to == b) ? it->weight : 0.0;
}

bool TagGraph::adjacent(NodeIndex a, NodeIndex b) const { return weight(a, b) > 0.0; }

double TagGraph::weight(const std::string& a, const std::string& b) const {
  auto ia = index_of(a), ib = index_of(b);
  if (!ia || !ib) return 0.0;
  return weight(*ia, *ib);
}

std::size_t TagGraph::question_count(const std::string& tag) const {
  auto i = index_of(tag);
  return i ? counts_[*i] : 0;
}

void TagGraph::save(const std::filesystem::path& edges, const std::filesystem::path& counts) const {
  std::ofstream e(edges, std::ios::binary);
  for (NodeIndex a = 0; a < nodes_.size(); ++a)
    for (const auto& edge : adjacency_[a])
      if (a < edge.to) e << nodes_[a] << '\t' << nodes_[edge.to] << '\t' << format_double(edge.weight) << '\n';
  std::ofstream c(counts, std::ios::binary);
  for (NodeIndex a = 0; a < nodes_.size(); ++a) c << nodes_[a] << '\t' << counts_[a] << '\n';
  if (!e || !c) throw std::runtime_error("failed writing tag graph");
}

TagGraph TagGraph::load(const std::filesystem::path& edges, const std::filesystem::path& counts) {
  TagGraph g;
  std::string line;
  std::size_t lineno = 0;
  std::ifstream c(counts);
  if (!c) throw FormatError("cannot open " + counts.string());
  while (std::getline(c, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    std::size_t n = 0;
    if (tab == std::string::npos ||
        std::from_chars(line.data() + tab + 1, line.data() + line.size(), n).ec != std::errc{})
      throw FormatError(counts.string() + ":" + std::to_string(lineno) + ": expected tag<TAB>count");
    g.add_node(line.substr(0, tab), n);
  }
  std::ifstream e(edges);
  if (!e) throw FormatError("cannot open " + edges.string());
  lineno = 0;
  while (std::getline(e, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, w;
    if (!std::getline(fields, a, '\t') || !std::getline(fields, b, '\t') || !std::getline(fields, w))
      throw FormatError(edges.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    double weight = 0;
    if (std::from_chars(w.data(), w.data() + w.size(), weight).ec != std::errc{} || a == b ||
        !(weight > 0.0 && weight <= 1.0))
      throw FormatError(edges.string() + ":" + std::to_string(lineno) + ": bad edge");
    auto ia = g.index_.find(a), ib = g.index_.find(b);
    if (ia == g.index_.end() || ib == g.index_.end())
      throw FormatError(edges.string() + ":" + std::to_string(lineno) + ": tag missing from counts");
    g.add_edge(ia->second, ib->second, weight);
  }
  g.finalize();
  return g;
}

void WalkConfig::validate() const {
  if (!(p > 0) || !(q > 0)) throw ConfigError("node2vec p and q must be positive");
  if (walk_length < 1) throw ConfigError("walk_length must be >= 1");
  if (walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
}

std::vector<double> transition_weights(const TagGraph& graph, TagGraph::NodeIndex previous,
                                       TagGraph::NodeIndex current, double p, double q) {
  const auto& adj = graph.neighbors(current);
  std::vector<double> w(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    double bias = adj[i].to == previous ? 1.0 / p : graph.adjacent(previous, adj[i].to) ? 1.0 : 1.0 / q;
    w[i] = adj[i].weight * bias;
  }
  return w;
}

std::vector<std::vector<std::string>> generate_walks(const TagGraph& graph, const WalkConfig& cfg,
                                                     unsigned threads) {
  cfg.validate();
  const std::size_t n = graph.node_count();
  std::vector<std::vector<std::string>> walks(n * std::size_t(cfg.walks_per_node));

  parallel_for(walks.size(), threads, [&](std::size_t slot) {
    const std::size_t walk_index = slot / n;
    const auto start = TagGraph::NodeIndex(slot % n);
    std::mt19937_64 rng(derive_seed(cfg.seed, start, walk_index));

    std::vector<TagGraph::NodeIndex> path{start};
    path.reserve(std::size_t(cfg.walk_length));
    while (path.size() < std::size_t(cfg.walk_length)) {
      const auto cur = path.back();
      const auto& adj = graph.neighbors(cur);
      if (adj.empty()) break;
      std::vector<double> w;
      if (path.size() == 1) {
        w.reserve(adj.size());
        for (const auto& e : adj) w.push_back(e.weight);
      } else {
        w = transition_weights(graph, path[path.size() - 2], cur, cfg.p, cfg.q);
      }
      path.push_back(adj[sample_index(w, rng)].to);
    }
    auto& out = walks[slot];
    out.reserve(path.size());
    for (auto v : path) out.push_back(graph.name(v));
  });
  return walks;
}

std::string top_tag(const QuestionRecord& record, const TagGraph& graph) {
  std::string best;
  std::size_t best_count = 0;
  for (const auto& tag : record.tags) {
    std::size_t c = graph.question_count(tag);
    if (c == 0) continue;
    if (c > best_count || (c == best_count && tag < best)) {
      best = tag;
      best_count = c;
    }
  }
  return best_count == 0 ? std::string(kUnknownTag) : best;
}

}  // namespace dupq
