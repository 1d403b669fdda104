#include "dupq/taggraph.hpp"
#include "test_util.hpp"

#include <map>
#include <set>

using namespace dupq;
using dupq::testing::day;
using dupq::testing::make_question;

namespace {

std::vector<QuestionRecord> records_from_tag_lists(const std::vector<std::vector<std::string>>& lists) {
  std::vector<QuestionRecord> recs;
  for (std::size_t i = 0; i < lists.size(); ++i) recs.push_back(make_question(QuestionId(i + 1), lists[i], day(int(i))));
  return recs;
}

// Four tags: Q(a)={1,2,3}, Q(b)={1,4}, Q(c)={2,4,5}, Q(d)={3,5,6}; b and d never co-occur.
std::vector<QuestionRecord> four_node_fixture() {
  return records_from_tag_lists({{"a", "b"}, {"a", "c"}, {"a", "d"}, {"b", "c"}, {"c", "d"}, {"d"}});
}

double set_jaccard(const std::set<int>& x, const std::set<int>& y) {
  std::size_t both = 0;
  for (int v : x) both += y.count(v);
  return double(both) / double(x.size() + y.size() - both);
}

}  // namespace

TEST(TagGraph, JaccardWeight) {
  const auto g = TagGraph::build(records_from_tag_lists({{"t1"}, {"t1", "t2"}, {"t2"}}));
  EXPECT_DOUBLE_EQ(g.weight("t1", "t2"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(g.weight("t2", "t1"), 1.0 / 3.0);
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_EQ(g.question_count("t1"), 2u);
  EXPECT_EQ(g.question_count("nope"), 0u);
}

TEST(TagGraph, ThresholdIsStrict) {
  auto build_with_union = [](int union_size) {
    std::vector<std::vector<std::string>> lists{{"x", "y"}};
    for (int i = 1; i < union_size; ++i) lists.push_back({"x"});
    return TagGraph::build(records_from_tag_lists(lists));
  };
  EXPECT_DOUBLE_EQ(build_with_union(250).weight("x", "y"), 0.0);  // 0.004
  EXPECT_DOUBLE_EQ(build_with_union(200).weight("x", "y"), 0.0);  // exactly 0.005
  EXPECT_DOUBLE_EQ(build_with_union(199).weight("x", "y"), 1.0 / 199);
}

TEST(TagGraph, EmptyCorpus) {
  const auto g = TagGraph::build({});
  EXPECT_EQ(g.node_count(), 0u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(TagGraph, RandomCorporaMatchSetOracle) {
  std::mt19937_64 rng(21);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<std::string>> lists;
    const int n = 1 + int(rng() % 40);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> tags;
      const int k = 1 + int(rng() % 4);
      for (int j = 0; j < k; ++j) tags.push_back(vocab[rng() % vocab.size()]);
      lists.push_back(tags);
    }
    const double threshold = trial % 2 ? 0.005 : 0.2;
    const auto g = TagGraph::build(records_from_tag_lists(lists), threshold);
    std::map<std::string, std::set<int>> q;
    for (int i = 0; i < n; ++i)
      for (const auto& t : lists[i]) q[t].insert(i);
    EXPECT_EQ(g.node_count(), q.size());
    std::size_t edges = 0;
    for (const auto& [ta, qa] : q)
      for (const auto& [tb, qb] : q) {
        if (ta >= tb) continue;
        const double w = set_jaccard(qa, qb);
        const double expect = w > threshold ? w : 0.0;
        EXPECT_DOUBLE_EQ(g.weight(ta, tb), expect);
        EXPECT_EQ(g.weight(ta, tb), g.weight(tb, ta));
        edges += expect > 0;
      }
    EXPECT_EQ(g.edge_count(), edges);
    for (TagGraph::NodeIndex i = 0; i < g.node_count(); ++i) {
      EXPECT_FALSE(g.adjacent(i, i));
      for (const auto& e : g.neighbors(i)) {
        EXPECT_GT(e.weight, 0.0);
        EXPECT_LE(e.weight, 1.0);
      }
    }
  }
}

TEST(Walks, TransitionWeightsByDistance) {
  // Path t - v plus v - x1 (x1 adjacent to t) and v - x2 (two hops from t), all unit weight.
  const auto g = TagGraph::build(records_from_tag_lists({{"t", "v", "x1"}, {"v", "x2"}}), 0.0);
  // Jaccard weights here are not all one, so rescale by the raw edge weights.
  const auto t = *g.index_of("t"), v = *g.index_of("v");
  const auto w = transition_weights(g, t, v, 1.3, 0.8);
  ASSERT_EQ(w.size(), g.neighbors(v).size());
  std::map<std::string, double> factor;
  for (std::size_t i = 0; i < w.size(); ++i) factor[g.name(g.neighbors(v)[i].to)] = w[i] / g.neighbors(v)[i].weight;
  EXPECT_NEAR(factor["t"], 0.7692, 1e-4);
  EXPECT_DOUBLE_EQ(factor["x1"], 1.0);
  EXPECT_DOUBLE_EQ(factor["x2"], 1.25);
}

TEST(Walks, IsolatedNodeGivesSingletonWalk) {
  const auto g = TagGraph::build(records_from_tag_lists({{"lonely"}, {"a", "b"}}));
  WalkConfig cfg;
  cfg.walks_per_node = 3;
  const auto walks = generate_walks(g, cfg);
  ASSERT_EQ(walks.size(), 9u);
  for (const auto& w : walks)
    if (w.front() == "lonely") {
      EXPECT_EQ(w, std::vector<std::string>{"lonely"});
    } else {
      EXPECT_EQ(w.size(), std::size_t(cfg.walk_length));
    }
}

TEST(Walks, EveryStepFollowsAnEdge) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<std::string>> lists;
    for (int i = 0; i < 30; ++i) lists.push_back({std::string(1, char('a' + rng() % 8)), std::string(1, char('a' + rng() % 8))});
    const auto g = TagGraph::build(records_from_tag_lists(lists));
    WalkConfig cfg;
    cfg.walks_per_node = 2;
    cfg.walk_length = 15;
    cfg.seed = trial;
    const auto walks = generate_walks(g, cfg);
    EXPECT_EQ(walks.size(), 2 * g.node_count());
    for (const auto& w : walks) {
      ASSERT_FALSE(w.empty());
      for (std::size_t i = 1; i < w.size(); ++i) EXPECT_GT(g.weight(w[i - 1], w[i]), 0.0) << w[i - 1] << "->" << w[i];
    }
  }
}

TEST(Walks, SecondOrderFrequenciesMatchOracle) {
  const auto recs = four_node_fixture();
  const auto g = TagGraph::build(recs);
  const double p = 1.3, q = 0.8;

  // Independent oracle: weights from the question sets, probabilities by the biased-walk rule.
  std::map<std::string, std::set<int>> qs{{"a", {1, 2, 3}}, {"b", {1, 4}}, {"c", {2, 4, 5}}, {"d", {3, 5, 6}}};
  auto w = [&](const std::string& x, const std::string& y) { return x == y ? 0.0 : set_jaccard(qs[x], qs[y]); };
  const std::vector<std::string> tags{"a", "b", "c", "d"};
  auto oracle = [&](const std::string& prev, const std::string& cur) {
    std::map<std::string, double> probs;
    double total = 0;
    for (const auto& x : tags) {
      if (w(cur, x) <= 0.005) continue;
      const double bias = x == prev ? 1 / p : (w(prev, x) > 0.005 ? 1.0 : 1 / q);
      probs[x] = w(cur, x) * bias;
      total += probs[x];
    }
    for (auto& [_, v] : probs) v /= total;
    return probs;
  };

  WalkConfig cfg;
  cfg.p = p;
  cfg.q = q;
  cfg.walks_per_node = 1000;
  cfg.walk_length = 80;
  cfg.seed = 99;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> counts;
  std::size_t steps = 0;
  for (const auto& walk : generate_walks(g, cfg))
    for (std::size_t i = 2; i < walk.size(); ++i) {
      counts[{walk[i - 2], walk[i - 1]}][walk[i]] += 1;
      ++steps;
    }
  ASSERT_GE(steps, 100000u);
  for (const auto& [edge, next] : counts) {
    double total = 0;
    for (const auto& [_, c] : next) total += c;
    for (const auto& [x, prob] : oracle(edge.first, edge.second)) {
      const double freq = next.count(x) ? next.at(x) / total : 0.0;
      EXPECT_NEAR(freq, prob, 0.01) << edge.first << "," << edge.second << "->" << x;
    }
  }
}

TEST(Walks, ReproducibleAndThreadIndependent) {
  const auto g = TagGraph::build(four_node_fixture());
  WalkConfig cfg;
  cfg.walks_per_node = 7;
  const auto a = generate_walks(g, cfg, 1);
  EXPECT_EQ(a, generate_walks(g, cfg, 1));
  EXPECT_EQ(a, generate_walks(g, cfg, 3));
  cfg.seed = 43;
  EXPECT_NE(a, generate_walks(g, cfg, 1));
}

TEST(Walks, ConfigValidation) {
  WalkConfig cfg;
  cfg.p = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.q = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.walk_length = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TopTag, HighestCountThenLexicographic) {
  std::vector<std::vector<std::string>> lists;
  for (int i = 0; i < 10; ++i) lists.push_back({"a"});
  for (int i = 0; i < 500; ++i) lists.push_back({"b"});
  for (int i = 0; i < 10; ++i) lists.push_back({"c"});
  const auto g = TagGraph::build(records_from_tag_lists(lists));
  EXPECT_EQ(top_tag(make_question(1, {"a", "b"}, day(0)), g), "b");
  EXPECT_EQ(top_tag(make_question(1, {"c", "a"}, day(0)), g), "a");
  EXPECT_EQ(top_tag(make_question(1, {"zz", "c"}, day(0)), g), "c");
  EXPECT_EQ(top_tag(make_question(1, {"zz", "yy"}, day(0)), g), kUnknownTag);
}

TEST(TagGraph, SaveLoadRoundTrip) {
  dupq::testing::TempDir dir;
  auto recs = four_node_fixture();
  recs.push_back(make_question(99, {"solo"}, day(50)));
  const auto g = TagGraph::build(recs);
  g.save(dir.path / "e.tsv", dir.path / "c.tsv");
  const auto h = TagGraph::load(dir.path / "e.tsv", dir.path / "c.tsv");
  EXPECT_EQ(h.nodes(), g.nodes());
  EXPECT_EQ(h.edge_count(), g.edge_count());
  for (const auto& a : g.nodes()) {
    EXPECT_EQ(h.question_count(a), g.question_count(a));
    for (const auto& b : g.nodes()) EXPECT_DOUBLE_EQ(h.weight(a, b), g.weight(a, b));
  }
}
