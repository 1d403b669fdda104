#include "dupq/config.hpp"
#include "dupq/pipeline.hpp"
#include "dupq/synthetic.hpp"
#include "test_util.hpp"

#include <fstream>
#include <regex>
#include <sstream>

using namespace dupq;

TEST(Config, DefaultsCarryReportedSettings) {
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.walk().p, 1.3);
  EXPECT_EQ(cfg.walk().q, 0.8);
  EXPECT_EQ(cfg.walk().walks_per_node, 5);
  EXPECT_EQ(cfg.walk().walk_length, 80);
  EXPECT_EQ(cfg.node2vec().window, 10);
  EXPECT_EQ(cfg.node2vec().min_count, 3);
  EXPECT_EQ(cfg.node2vec().dimension, 64);
  EXPECT_EQ(cfg.head().optimizer.learning_rate, 1e-3);
  EXPECT_EQ(cfg.head().optimizer.epsilon, 1e-8);
  EXPECT_EQ(cfg.head().epochs, 40);
  EXPECT_EQ(cfg.head().out_dim, 512);
  EXPECT_EQ(cfg.head().margin, 1.0);
  EXPECT_EQ(cfg.candidate_filter().min_tag_jaccard, 0.15);
  EXPECT_EQ(cfg.candidate_filter().min_title_cosine, 0.27);
  EXPECT_EQ(cfg.graph_threshold(), 0.005);
  EXPECT_EQ(cfg.bm25().k1, 1.5);
  EXPECT_EQ(cfg.bm25().b, 0.75);
  EXPECT_EQ(cfg.time_mlp(FeatureMode::kText).batch_size, 64);
  EXPECT_EQ(cfg.time_mlp(FeatureMode::kText).optimizer.learning_rate, 2e-5);
  EXPECT_EQ(cfg.time_mlp(FeatureMode::kText).hidden1, 256);
  EXPECT_EQ(cfg.time_mlp(FeatureMode::kTextNetwork).hidden1, 512);
  EXPECT_EQ(cfg.alpha(), 0.5);
  EXPECT_EQ(cfg.time_tree().max_depth, 7);
  EXPECT_EQ(cfg.windows().train.begin, make_timestamp(2010, 1, 1));
  EXPECT_EQ(cfg.windows().test.end, make_timestamp(2021, 1, 1));
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, UnknownKeysAndWrongTypesRejected) {
  PipelineConfig cfg;
  EXPECT_THROW(cfg.merge(nlohmann::json::parse(R"({"head": {"lrr": 0.1}})")), ConfigError);
  EXPECT_THROW(cfg.merge(nlohmann::json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(cfg.merge(nlohmann::json::parse(R"({"head": {"lr": "fast"}})")), ConfigError);
  EXPECT_THROW(cfg.merge(nlohmann::json::parse(R"({"head": 3})")), ConfigError);
  EXPECT_THROW(cfg.set("head.nope", "1"), ConfigError);
  EXPECT_THROW(cfg.set("head", "1"), ConfigError);
  EXPECT_THROW(cfg.set("head.epochs", "many"), ConfigError);
}

TEST(Config, DottedSetAndMerge) {
  PipelineConfig cfg;
  cfg.set("node2vec.p", "2.5");
  cfg.set("feature_mode", "text+network");
  cfg.set("seed", "7");
  cfg.merge(nlohmann::json::parse(R"({"head": {"epochs": 3}})"));
  EXPECT_EQ(cfg.walk().p, 2.5);
  EXPECT_EQ(cfg.feature_mode(), FeatureMode::kTextNetwork);
  EXPECT_EQ(cfg.seed(), 7u);
  EXPECT_EQ(cfg.head().epochs, 3);
  EXPECT_EQ(cfg.head().out_dim, 512);
}

TEST(Config, EveryKeyIsAddressable) {
  const auto keys = PipelineConfig::keys();
  EXPECT_GT(keys.size(), 40u);
  PipelineConfig cfg;
  for (const auto& k : keys) {
    EXPECT_NO_THROW(cfg.set(k, cfg.tree().flatten().at("/" + std::regex_replace(k, std::regex("\\."), "/")).dump()))
        << k;
  }
}

TEST(Config, DumpRoundTripsThroughMerge) {
  PipelineConfig a;
  a.set("word2vec.dim", "17");
  a.set("paths.work_dir", "/tmp/x");
  PipelineConfig b;
  b.merge(nlohmann::json::parse(a.dump()));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Config, ValidationCatchesRanges) {
  for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{{"candidates.tag_jaccard", "1.5"},
                                                                            {"candidates.title_cosine", "-0.1"},
                                                                            {"graph.edge_threshold", "2"},
                                                                            {"node2vec.p", "0"},
                                                                            {"word2vec.dim", "0"},
                                                                            {"head.out_dim", "-4"},
                                                                            {"threads", "0"},
                                                                            {"split.train_end", "2009-01-01"}}) {
    PipelineConfig cfg;
    try {
      cfg.set(key, value);
      cfg.validate();
      ADD_FAILURE() << key << "=" << value << " accepted";
    } catch (const ConfigError&) {
    }
  }
}

namespace {

struct Run {
  int status;
  std::string out, err;
};

Run run(const std::string& cmd, const PipelineConfig& cfg, const CommandOptions& opts = {}) {
  std::ostringstream out, err;
  const int status = run_command(cmd, cfg, opts, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Pipeline, MissingArtifactNamesProducer) {
  dupq::testing::TempDir dir;
  PipelineConfig cfg;
  cfg.set("paths.work_dir", (dir.path / "work").string());
  cfg.set("paths.posts", (dir.path / "absent.xml").string());
  // Nothing exists yet, so the first missing input is the ingested corpus.
  auto r = run("train-retrieval", cfg);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("ingest"), std::string::npos) << r.err;
  r = run("build-graph", cfg);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("ingest"), std::string::npos) << r.err;
  r = run("ingest", cfg);
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(run("no-such-command", cfg).status, 1);

  SyntheticConfig syn;
  syn.questions = 120;
  syn.train_pairs = 20;
  syn.validation_pairs = 5;
  syn.test_pairs = 5;
  write_synthetic_dump(syn, dir.path);
  cfg.set("paths.posts", (dir.path / "Posts.xml").string());
  cfg.set("paths.links", (dir.path / "PostLinks.xml").string());
  ASSERT_EQ(run("ingest", cfg).status, 0);
  r = run("train-retrieval", cfg);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("train-embeddings"), std::string::npos) << r.err;
}

TEST(Pipeline, SmallFixtureEndToEnd) {
  dupq::testing::TempDir dir;
  SyntheticConfig syn;
  syn.questions = 400;
  syn.train_pairs = 60;
  syn.validation_pairs = 10;
  syn.test_pairs = 10;
  const auto dump = write_synthetic_dump(syn, dir.path);
  PipelineConfig cfg;
  cfg.set("paths.posts", (dir.path / "Posts.xml").string());
  cfg.set("paths.links", (dir.path / "PostLinks.xml").string());
  cfg.set("paths.work_dir", (dir.path / "work").string());
  cfg.merge(nlohmann::json::parse(R"({
    "word2vec": {"dim": 16, "min_count": 1, "lr": 0.2, "epochs": 3},
    "node2vec": {"dim": 8, "walks": 2, "length": 20},
    "head": {"out_dim": 16, "epochs": 3},
    "timepred": {"hidden1": 8, "hidden2": 4, "epochs": 2}})"));

  for (const auto* cmd : {"ingest", "build-graph", "train-embeddings", "build-candidates", "train-retrieval",
                          "eval-retrieval", "train-timepred", "eval-timepred", "stats"}) {
    const auto r = run(cmd, cfg);
    ASSERT_EQ(r.status, 0) << cmd << ": " << r.err;
    EXPECT_NE(r.err.find("seed=42"), std::string::npos) << cmd << ": " << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir.path / "work" / "logs" / (std::string(cmd) + ".config.json"))) << cmd;
  }
  CommandOptions bm25;
  bm25.method = "bm25";
  ASSERT_EQ(run("eval-retrieval", cfg, bm25).status, 0);
  const WorkLayout layout{dir.path / "work"};
  EXPECT_TRUE(std::filesystem::exists(layout.eval_dir() / "retrieval-head-text.json"));
  EXPECT_TRUE(std::filesystem::exists(layout.eval_dir() / "retrieval-bm25.json"));
  const auto report = nlohmann::json::parse(slurp(layout.eval_dir() / "retrieval-bm25.json"));
  EXPECT_EQ(report.at("anchors").get<int>(), syn.test_pairs);

  // The logged config replays to the same checkpoint.
  const auto ckpt = slurp(layout.head_model(FeatureMode::kText));
  PipelineConfig replay;
  replay.merge_file(layout.log_dir() / "train-retrieval.config.json");
  ASSERT_EQ(run("train-retrieval", replay).status, 0);
  EXPECT_EQ(slurp(layout.head_model(FeatureMode::kText)), ckpt);

  // A planted anchor's own text finds its master near the top.
  const auto& planted = dump.pairs.back();
  CommandOptions q;
  q.title = planted.anchor_title;
  q.body = planted.anchor_body;
  q.tags = planted.anchor_tags;
  q.top_k = 3;
  q.created = "2030-01-01";
  const auto r = run("query", cfg, q);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find(std::to_string(planted.master)), std::string::npos) << r.out;
}
