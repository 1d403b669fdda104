#include "dupq/config.hpp"

#include "dupq/parallel.hpp"
#include "dupq/time.hpp"

#include <fstream>

namespace dupq {

using nlohmann::ordered_json;

const ordered_json& PipelineConfig::defaults() {
  static const ordered_json d = ordered_json::parse(R"({
    "seed": 42,
    "threads": 1,
    "deterministic": true,
    "feature_mode": "text",
    "paths": {
      "posts": "Posts.xml",
      "links": "PostLinks.xml",
      "work_dir": "work",
      "field_vectors": ""
    },
    "split": {
      "train_begin": "2010-01-01",
      "train_end": "2019-01-01",
      "validation_begin": "2019-10-01",
      "validation_end": "2020-01-01",
      "test_begin": "2020-10-01",
      "test_end": "2021-01-01"
    },
    "graph": {
      "edge_threshold": 0.005,
      "training_only": true
    },
    "node2vec": {
      "p": 1.3,
      "q": 0.8,
      "walks": 5,
      "length": 80,
      "window": 10,
      "min_count": 3,
      "dim": 64,
      "negatives": 5,
      "epochs": 5,
      "lr": 0.025,
      "batch_words": 5
    },
    "word2vec": {
      "dim": 100,
      "window": 10,
      "min_count": 5,
      "negatives": 5,
      "epochs": 5,
      "lr": 0.025
    },
    "candidates": {
      "tag_jaccard": 0.15,
      "title_cosine": 0.27
    },
    "head": {
      "out_dim": 512,
      "epochs": 40,
      "batch_size": 64,
      "optimizer": "adam",
      "lr": 0.001,
      "epsilon": 1e-8,
      "beta1": 0.9,
      "beta2": 0.999,
      "margin": 1.0,
      "norm_degree": 2.0,
      "alpha": 0.5,
      "score": "distance"
    },
    "bm25": {
      "k1": 1.5,
      "b": 0.75
    },
    "timepred": {
      "hidden1": 0,
      "hidden2": 64,
      "batch_size": 64,
      "lr": 2e-5,
      "epochs": 40,
      "validation_fraction": 0.25,
      "test_start": "2020-01-01",
      "max_depth": 7,
      "min_samples_split": 2
    },
    "eval": {
      "top_k": 10
    }
  })");
  return d;
}

namespace {

void collect_keys(const ordered_json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      collect_keys(*it, name, out);
    else
      out.push_back(name);
  }
}

bool same_kind(const ordered_json& def, const nlohmann::json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return false;
}

void merge_into(ordered_json& dst, const nlohmann::json& src, const std::string& prefix) {
  if (!src.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("unknown config key '" + name + "'");
    auto& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_into(slot, *it, name);
      continue;
    }
    if (!same_kind(slot, *it)) throw ConfigError("config key '" + name + "' has the wrong type (expected " + std::string(slot.type_name()) + ")");
    if (slot.is_number_unsigned() && it->is_number_integer() && it->get<long long>() < 0)
      throw ConfigError("config key '" + name + "' must be non-negative");
    slot = *it;
  }
}

Timestamp parse_date(const std::string& key, const std::string& value) {
  auto t = parse_timestamp(value);
  if (!t) throw ConfigError("config key '" + key + "' is not a timestamp: '" + value + "'");
  return *t;
}

}  // namespace

PipelineConfig::PipelineConfig() : tree_(defaults()) {}

std::vector<std::string> PipelineConfig::keys() {
  std::vector<std::string> out;
  collect_keys(defaults(), "", out);
  return out;
}

void PipelineConfig::merge(const nlohmann::json& overlay) { merge_into(tree_, overlay, ""); }

void PipelineConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  merge(j);
}

const ordered_json& PipelineConfig::leaf(const std::string& dotted) const {
  const ordered_json* node = &tree_;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + dotted + "' is a section, not a value");
  return *node;
}

void PipelineConfig::set(const std::string& dotted, const std::string& value) {
  const auto& current = leaf(dotted);
  nlohmann::json parsed;
  if (current.is_string()) {
    parsed = value;
  } else {
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      throw ConfigError("cannot parse '" + value + "' for config key '" + dotted + "'");
    }
  }
  // Rebuild the overlay as nested objects so merge() does the checking.
  nlohmann::json overlay = parsed;
  std::string rest = dotted;
  while (true) {
    const auto dot = rest.rfind('.');
    nlohmann::json wrap;
    wrap[dot == std::string::npos ? rest : rest.substr(dot + 1)] = overlay;
    overlay = std::move(wrap);
    if (dot == std::string::npos) break;
    rest.resize(dot);
  }
  merge(overlay);
}

void PipelineConfig::validate() const {
  auto unit = [&](const std::string& key) {
    const double v = get<double>(key);
    if (!(v >= 0 && v <= 1)) throw ConfigError(key + " must lie in [0, 1]");
  };
  auto positive = [&](const std::string& key) {
    if (!(get<double>(key) > 0)) throw ConfigError(key + " must be positive");
  };
  unit("graph.edge_threshold");
  unit("candidates.tag_jaccard");
  unit("candidates.title_cosine");
  unit("head.alpha");
  unit("timepred.validation_fraction");
  for (const char* k : {"node2vec.p", "node2vec.q", "node2vec.walks", "node2vec.length", "node2vec.window",
                        "node2vec.min_count", "node2vec.dim", "node2vec.epochs", "node2vec.lr", "node2vec.batch_words",
                        "word2vec.dim", "word2vec.window", "word2vec.min_count", "word2vec.epochs", "word2vec.lr",
                        "head.out_dim", "head.epochs", "head.batch_size", "head.lr", "head.epsilon", "head.norm_degree",
                        "bm25.k1", "timepred.hidden2", "timepred.batch_size", "timepred.lr", "timepred.epochs",
                        "eval.top_k"})
    positive(k);
  if (get<double>("node2vec.negatives") < 0 || get<double>("word2vec.negatives") < 0)
    throw ConfigError("negative counts must be non-negative");
  if (get<double>("head.margin") < 0) throw ConfigError("head.margin must be non-negative");
  if (get<double>("timepred.hidden1") < 0) throw ConfigError("timepred.hidden1 must be non-negative (0 = by feature mode)");
  if (get<int>("timepred.max_depth") < 0 || get<int>("timepred.min_samples_split") < 2)
    throw ConfigError("timepred tree needs max_depth >= 0 and min_samples_split >= 2");
  if (get<double>("bm25.b") < 0 || get<double>("bm25.b") > 1) throw ConfigError("bm25.b must lie in [0, 1]");
  if (get<double>("threads") < 1) throw ConfigError("threads must be at least 1");
  feature_mode();
  parse_optimizer(get<std::string>("head.optimizer"));
  parse_score_function(get<std::string>("head.score"));
  windows();
  time_test_start();
}

std::uint64_t PipelineConfig::derive_seed_for(std::string_view stage) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) h = (h ^ c) * 0x100000001b3ULL;
  return derive_seed(seed(), h);
}

SplitWindows PipelineConfig::windows() const {
  auto window = [&](const std::string& b, const std::string& e) {
    TimeWindow w{parse_date(b, get<std::string>(b)), parse_date(e, get<std::string>(e))};
    if (!(w.begin < w.end)) throw ConfigError(b + " must precede " + e);
    return w;
  };
  return {window("split.train_begin", "split.train_end"), window("split.validation_begin", "split.validation_end"),
          window("split.test_begin", "split.test_end")};
}

WalkConfig PipelineConfig::walk() const {
  WalkConfig w;
  w.p = get<double>("node2vec.p");
  w.q = get<double>("node2vec.q");
  w.walks_per_node = get<int>("node2vec.walks");
  w.walk_length = get<int>("node2vec.length");
  w.seed = derive_seed_for("node2vec.walks");
  return w;
}

SgnsConfig PipelineConfig::node2vec() const {
  SgnsConfig c;
  c.dimension = get<int>("node2vec.dim");
  c.window = get<int>("node2vec.window");
  c.negatives = get<int>("node2vec.negatives");
  c.epochs = get<int>("node2vec.epochs");
  c.learning_rate = get<double>("node2vec.lr");
  c.min_count = get<int>("node2vec.min_count");
  c.batch_words = get<int>("node2vec.batch_words");
  c.seed = derive_seed_for("node2vec.sgns");
  c.threads = deterministic() ? 1 : threads();
  return c;
}

SgnsConfig PipelineConfig::word2vec() const {
  SgnsConfig c;
  c.dimension = get<int>("word2vec.dim");
  c.window = get<int>("word2vec.window");
  c.negatives = get<int>("word2vec.negatives");
  c.epochs = get<int>("word2vec.epochs");
  c.learning_rate = get<double>("word2vec.lr");
  c.min_count = get<int>("word2vec.min_count");
  c.seed = derive_seed_for("word2vec");
  c.threads = deterministic() ? 1 : threads();
  return c;
}

CandidateFilter PipelineConfig::candidate_filter() const {
  return {get<double>("candidates.tag_jaccard"), get<double>("candidates.title_cosine")};
}

HeadTrainConfig PipelineConfig::head() const {
  HeadTrainConfig h;
  h.out_dim = get<int>("head.out_dim");
  h.epochs = get<int>("head.epochs");
  h.batch_size = get<int>("head.batch_size");
  h.optimizer.kind = parse_optimizer(get<std::string>("head.optimizer"));
  h.optimizer.learning_rate = get<double>("head.lr");
  h.optimizer.epsilon = get<double>("head.epsilon");
  h.optimizer.beta1 = get<double>("head.beta1");
  h.optimizer.beta2 = get<double>("head.beta2");
  h.margin = get<double>("head.margin");
  h.norm_degree = get<double>("head.norm_degree");
  h.score = parse_score_function(get<std::string>("head.score"));
  h.seed = derive_seed_for("head");
  h.threads = threads();
  return h;
}

Bm25Params PipelineConfig::bm25() const { return {get<double>("bm25.k1"), get<double>("bm25.b")}; }

TimeMlpConfig PipelineConfig::time_mlp(FeatureMode mode) const {
  TimeMlpConfig c;
  const auto [h1, h2] = default_hidden_sizes(mode);
  c.hidden1 = get<int>("timepred.hidden1") > 0 ? get<int>("timepred.hidden1") : h1;
  c.hidden2 = get<int>("timepred.hidden2") > 0 ? get<int>("timepred.hidden2") : h2;
  c.batch_size = get<int>("timepred.batch_size");
  c.epochs = get<int>("timepred.epochs");
  c.optimizer = {OptimizerKind::kAdam, get<double>("timepred.lr"), 0.9, 0.999, 1e-8};
  c.seed = derive_seed_for("timepred.mlp");
  return c;
}

TreeConfig PipelineConfig::time_tree() const {
  return {get<int>("timepred.max_depth"), get<int>("timepred.min_samples_split")};
}

Timestamp PipelineConfig::time_test_start() const {
  return parse_date("timepred.test_start", get<std::string>("timepred.test_start"));
}

}  // namespace dupq
