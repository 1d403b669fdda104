#include "dupq/pipeline.hpp"

#include "dupq/baseline.hpp"
#include "dupq/corpus_io.hpp"
#include "dupq/eval.hpp"
#include "dupq/features.hpp"
#include "dupq/parallel.hpp"
#include "dupq/time.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>

namespace dupq {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::filesystem::path WorkLayout::head_model(FeatureMode mode) const {
  return root / "models" / ("head-" + to_string(mode) + ".ckpt");
}

std::filesystem::path WorkLayout::time_model(const std::string& kind, FeatureMode mode) const {
  return root / "models" / ("time-" + kind + "-" + to_string(mode) + ".ckpt");
}

namespace {

void require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw MissingArtifact(p, producer);
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

struct Context {
  const PipelineConfig& cfg;
  const CommandOptions& opts;
  WorkLayout layout;
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------
// Shared loaders

struct Loaded {
  CorpusArchive archive;
  std::unique_ptr<QuestionIndex> index;
};

Loaded load_corpus(const Context& c) {
  require(c.layout.corpus() / "questions.jsonl", "ingest");
  Loaded l;
  l.archive = CorpusArchive::load(c.layout.corpus());
  l.index = std::make_unique<QuestionIndex>(l.archive.questions);
  return l;
}

std::unique_ptr<QuestionEncoder> load_encoder(const Context& c) {
  const std::string precomputed = c.cfg.get<std::string>("paths.field_vectors");
  if (!precomputed.empty()) {
    if (!fs::exists(precomputed)) throw ConfigError("paths.field_vectors points to a missing file: " + precomputed);
    return std::make_unique<PrecomputedEncoder>(std::make_shared<EmbeddingStore>(EmbeddingStore::load(fs::path(precomputed))));
  }
  require(c.layout.token_vectors(), "train-embeddings");
  return std::make_unique<Word2VecEncoder>(std::make_shared<EmbeddingStore>(EmbeddingStore::load(c.layout.token_vectors())));
}

struct NetworkInputs {
  std::unique_ptr<TagGraph> graph;
  std::unique_ptr<EmbeddingStore> tags;
};

NetworkInputs load_network(const Context& c, FeatureMode mode) {
  NetworkInputs n;
  if (mode != FeatureMode::kTextNetwork) return n;
  require(c.layout.graph_edges(), "build-graph");
  require(c.layout.tag_vectors(), "train-embeddings");
  n.graph = std::make_unique<TagGraph>(TagGraph::load(c.layout.graph_edges(), c.layout.graph_counts()));
  n.tags = std::make_unique<EmbeddingStore>(EmbeddingStore::load(c.layout.tag_vectors()));
  return n;
}

FeatureTable build_features(const Context& c, const Loaded& l, const QuestionEncoder& enc, FeatureMode mode,
                            const NetworkInputs& net) {
  return FeatureTable::build(l.archive.questions, enc, mode, net.graph.get(), net.tags.get(), c.cfg.threads());
}

struct Query {
  QuestionId anchor = 0;
  QuestionId gold = 0;
  bool gold_in_candidates = false;
  std::vector<QuestionId> candidates;
};

std::vector<Query> load_queries(const Context& c, const std::string& split) {
  const auto path = c.layout.candidates(split);
  require(path, "build-candidates");
  std::ifstream in(path);
  std::vector<Query> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("anchor").get<QuestionId>(), j.at("gold").get<QuestionId>(),
                     j.at("gold_in_candidates").get<bool>(), j.at("candidates").get<std::vector<QuestionId>>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

CandidateSet as_candidate_set(const Query& q) {
  CandidateSet set;
  set.anchor = q.anchor;
  for (auto id : q.candidates) set.candidates.push_back({id, 0, 0});
  return set;
}

std::vector<DuplicatePair> usable(const std::vector<DuplicatePair>& pairs, const QuestionIndex& index) {
  std::vector<DuplicatePair> out;
  for (const auto& p : pairs)
    if (index.find(p.anchor) && index.find(p.master)) out.push_back(p);
  return out;
}

std::string report_tag(const std::string& method, FeatureMode mode) {
  return method == "bm25" ? std::string("bm25") : method + "-" + to_string(mode);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const Context& c) {
  const fs::path posts_path = c.cfg.get<std::string>("paths.posts");
  const fs::path links_path = c.cfg.get<std::string>("paths.links");
  if (!fs::exists(posts_path)) throw ConfigError("posts dump not found: " + posts_path.string() + " (set paths.posts)");
  if (!fs::exists(links_path)) throw ConfigError("links dump not found: " + links_path.string() + " (set paths.links)");
  std::ifstream posts_in(posts_path, std::ios::binary), links_in(links_path, std::ios::binary);
  auto posts = parse_posts(posts_in);
  auto links = parse_links(links_in);
  auto derived = derive_pairs(links.links, posts.questions);

  CorpusArchive archive;
  archive.questions = std::move(posts.questions);
  archive.pairs = std::move(derived.pairs);
  archive.stats = compute_corpus_stats(archive.questions, archive.pairs);
  archive.stats["malformed_post_rows"] = double(posts.malformed_rows);
  archive.stats["answer_rows"] = double(posts.answer_rows);
  archive.stats["duplicate_links"] = double(links.links.size());
  archive.stats["links_unresolved"] = double(derived.unresolved);
  archive.stats["links_self"] = double(derived.self_links);
  archive.stats["links_repeated"] = double(derived.repeated);
  const auto split = split_pairs(archive.pairs, c.cfg.windows());
  archive.stats["train_pairs"] = double(split.train.size());
  archive.stats["validation_pairs"] = double(split.validation.size());
  archive.stats["test_pairs"] = double(split.test.size());
  archive.save(c.layout.corpus());
  c.out << "ingested " << archive.questions.size() << " questions, " << archive.pairs.size() << " duplicate pairs ("
        << split.train.size() << " train / " << split.validation.size() << " validation / " << split.test.size()
        << " test)\n";
  return 0;
}

int cmd_build_graph(const Context& c) {
  auto l = load_corpus(c);
  std::vector<QuestionRecord> records;
  const auto end = c.cfg.windows().train.end;
  for (const auto& q : l.archive.questions)
    if (!c.cfg.get<bool>("graph.training_only") || q.created_at < end) records.push_back(q);
  auto graph = TagGraph::build(records, c.cfg.graph_threshold());
  fs::create_directories(c.layout.graph_edges().parent_path());
  graph.save(c.layout.graph_edges(), c.layout.graph_counts());
  c.out << "tag graph: " << graph.node_count() << " nodes, " << graph.edge_count() << " edges from "
        << records.size() << " questions\n";
  return 0;
}

int cmd_train_embeddings(const Context& c) {
  auto l = load_corpus(c);
  ordered_json log;
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(l.archive.questions.size());
  for (const auto& q : l.archive.questions) {
    auto s = q.title_tokens;
    s.insert(s.end(), q.body_tokens.begin(), q.body_tokens.end());
    sentences.push_back(std::move(s));
  }
  auto words = train_sgns(sentences, c.cfg.word2vec());
  fs::create_directories(c.layout.token_vectors().parent_path());
  words.to_store().save(c.layout.token_vectors());
  log["word2vec"] = {{"vocabulary", words.vocab.size()}, {"epoch_objective", words.epoch_objective}};
  c.out << "word2vec: " << words.vocab.size() << " tokens\n";

  if (fs::exists(c.layout.graph_edges())) {
    const auto graph = TagGraph::load(c.layout.graph_edges(), c.layout.graph_counts());
    if (graph.node_count() == 0) throw ConfigError("tag graph is empty");
    auto walks = generate_walks(graph, c.cfg.walk(), c.cfg.threads());
    auto nodes = train_sgns(walks, c.cfg.node2vec());
    nodes.to_store().save(c.layout.tag_vectors());
    log["node2vec"] = {{"walks", walks.size()}, {"nodes", nodes.vocab.size()}, {"epoch_objective", nodes.epoch_objective}};
    c.out << "node2vec: " << nodes.vocab.size() << " tags from " << walks.size() << " walks\n";
  } else if (c.cfg.feature_mode() == FeatureMode::kTextNetwork) {
    throw MissingArtifact(c.layout.graph_edges(), "build-graph");
  } else {
    c.err << "note: no tag graph yet, skipping node2vec (run build-graph for text+network features)\n";
  }
  write_text(c.layout.root / "embeddings" / "training.json", log.dump(2) + "\n");
  return 0;
}

int cmd_build_candidates(const Context& c) {
  auto l = load_corpus(c);
  auto enc = load_encoder(c);
  const auto features = build_features(c, l, *enc, FeatureMode::kText, {});
  const CandidateGenerator gen(l.archive.questions, features, c.cfg.candidate_filter());
  const auto split = split_pairs(usable(l.archive.pairs, *l.index), c.cfg.windows());
  for (const auto& [name, pairs] : {std::pair<std::string, const std::vector<DuplicatePair>*>{"validation", &split.validation},
                                    {"test", &split.test}}) {
    std::vector<std::string> lines(pairs->size());
    std::vector<std::size_t> sizes(pairs->size());
    std::vector<char> hits(pairs->size());
    parallel_for(pairs->size(), c.cfg.threads(), [&](std::size_t i) {
      const auto& p = (*pairs)[i];
      const auto set = gen.generate(l.index->at(p.anchor));
      nlohmann::ordered_json j;
      j["anchor"] = p.anchor;
      j["gold"] = p.master;
      j["gold_in_candidates"] = set.contains(p.master);
      j["candidates"] = set.ids();
      lines[i] = j.dump();
      sizes[i] = set.candidates.size();
      hits[i] = set.contains(p.master);
    });
    std::string text;
    for (const auto& s : lines) text += s + "\n";
    write_text(c.layout.candidates(name), text);
    const double mean = sizes.empty() ? 0.0 : double(std::accumulate(sizes.begin(), sizes.end(), std::size_t(0))) / double(sizes.size());
    const auto covered = std::count(hits.begin(), hits.end(), 1);
    c.out << name << ": " << pairs->size() << " anchors, mean candidate set " << mean << ", gold covered "
          << covered << "\n";
  }
  return 0;
}

int cmd_train_retrieval(const Context& c) {
  const auto mode = c.cfg.feature_mode();
  auto l = load_corpus(c);
  auto enc = load_encoder(c);
  auto net = load_network(c, mode);
  const auto validation_queries = load_queries(c, "validation");
  const auto features = build_features(c, l, *enc, mode, net);
  const auto windows = c.cfg.windows();
  const auto split = split_pairs(usable(l.archive.pairs, *l.index), windows);

  std::vector<QuestionId> fallback;
  for (const auto& q : l.archive.questions)
    if (q.answered() && q.created_at < windows.train.end) fallback.push_back(q.id);
  std::sort(fallback.begin(), fallback.end());
  NegativeSampler sampler(build_buckets(split.train, &features), *l.index, std::move(fallback), c.cfg.alpha());

  const auto head_cfg = c.cfg.head();
  TripletProvider triplets = [&](int epoch) {
    std::mt19937_64 rng(derive_seed(head_cfg.seed, 0x7219, std::uint64_t(epoch)));
    return make_triplets(split.train, sampler, rng);
  };
  std::vector<ValidationQuery> validation;
  for (const auto& q : validation_queries) validation.push_back({q.anchor, q.gold, q.candidates});

  auto result = train_head(triplets, features, validation, *l.index, head_cfg);
  result.model.mode = mode;
  fs::create_directories(c.layout.head_model(mode).parent_path());
  result.model.save(c.layout.head_model(mode));

  ordered_json log;
  log["feature_mode"] = to_string(mode);
  log["train_pairs"] = split.train.size();
  log["buckets"] = sampler.buckets().size();
  log["negative_fallbacks"] = sampler.fallback_count();
  log["best_epoch"] = result.best_epoch;
  log["epoch_loss"] = result.epoch_loss;
  log["validation_mrr"] = result.validation_mrr;
  write_text(c.layout.head_model(mode).replace_extension(".train.json"), log.dump(2) + "\n");
  c.out << "head trained on " << split.train.size() << " pairs, best epoch " << result.best_epoch;
  if (!result.validation_mrr.empty())
    c.out << ", validation MRR " << result.validation_mrr[std::size_t(result.best_epoch - 1)];
  c.out << "\n";
  return 0;
}

int cmd_eval_retrieval(const Context& c) {
  const auto& method = c.opts.method;
  if (method != "head" && method != "bm25") throw ConfigError("--method must be head or bm25");
  const auto mode = c.cfg.feature_mode();
  auto l = load_corpus(c);
  const auto queries = load_queries(c, "test");
  if (queries.empty()) throw ConfigError("the test split has no anchors");

  std::optional<HeadModel> model;
  std::optional<FeatureTable> features;
  std::optional<Bm25Index> index;
  if (method == "head") {
    require(c.layout.head_model(mode), "train-retrieval");
    model = HeadModel::load(c.layout.head_model(mode));
    if (model->mode != mode) throw ConfigError("head checkpoint was trained in " + to_string(model->mode) + " mode");
    auto enc = load_encoder(c);
    auto net = load_network(c, mode);
    features = build_features(c, l, *enc, mode, net);
  } else {
    index = Bm25Index::build(l.archive.questions, c.cfg.bm25());
  }

  std::vector<RankedList> lists(queries.size());
  parallel_for(queries.size(), c.cfg.threads(), [&](std::size_t i) {
    const auto& q = queries[i];
    const auto set = as_candidate_set(q);
    lists[i] = method == "head"
                   ? rank_candidates(q.anchor, features->row(q.anchor).transpose(), set, *features, *model, *l.index, q.gold)
                   : bm25_rank(l.index->at(q.anchor), set, *index, *l.index, q.gold);
  });

  std::vector<GoldRank> ranks;
  std::vector<bool> covered;
  std::vector<double> rr;
  double total_candidates = 0;
  std::string ranked, rr_text;
  const auto top_k = std::size_t(c.opts.top_k.value_or(c.cfg.get<int>("eval.top_k")));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    ranks.push_back(lists[i].gold_rank);
    covered.push_back(queries[i].gold_in_candidates);
    total_candidates += double(queries[i].candidates.size());
    rr.push_back(lists[i].gold_rank ? 1.0 / double(*lists[i].gold_rank) : 0.0);
    ranked += ranked_line(lists[i], top_k) + "\n";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, rr.back());
    rr_text += std::to_string(queries[i].anchor) + "\t" + std::string(buf, ptr) + "\n";
  }
  std::unique_ptr<bool[]> flags(new bool[covered.size()]);
  for (std::size_t i = 0; i < covered.size(); ++i) flags[i] = covered[i];
  const auto report = RetrievalReport::compute(report_tag(method, mode), ranks, std::span<const bool>(flags.get(), covered.size()),
                                               total_candidates / double(queries.size()));
  auto json = ordered_json::parse(report.to_json());

  if (!c.opts.compare.empty()) {
    std::ifstream in(c.opts.compare);
    if (!in) throw ConfigError("cannot open comparison file " + c.opts.compare);
    std::vector<double> other;
    std::string line;
    while (std::getline(in, line)) {
      auto tab = line.find('\t');
      if (line.empty()) continue;
      other.push_back(std::stod(line.substr(tab == std::string::npos ? 0 : tab + 1)));
    }
    if (other.empty()) throw FormatError(c.opts.compare + " holds no reciprocal ranks");
    const auto mw = mann_whitney_u(rr, other);
    json["mann_whitney"] = {{"against", c.opts.compare}, {"u", mw.u_a}, {"u_other", mw.u_b}, {"p_value", mw.p_value},
                            {"exact", mw.exact}};
  }

  const auto tag = report_tag(method, mode);
  const auto dir = c.layout.eval_dir();
  write_text(dir / ("retrieval-" + tag + ".json"), json.dump(2) + "\n");
  write_text(dir / ("retrieval-" + tag + ".txt"), report.to_table());
  write_text(dir / ("ranked-" + tag + ".tsv"), ranked);
  write_text(dir / ("rr-" + tag + ".tsv"), rr_text);
  c.out << report.to_table();
  if (json.contains("mann_whitney")) c.out << "Mann-Whitney U p = " << json["mann_whitney"]["p_value"].get<double>() << "\n";
  return 0;
}

TimeSamples time_samples(const Context& c, const Loaded& l, FeatureMode mode) {
  auto enc = load_encoder(c);
  auto net = load_network(c, mode);
  const auto features = build_features(c, l, *enc, mode, net);
  return build_time_samples(usable(l.archive.pairs, *l.index), *l.index, features, c.cfg.time_test_start(),
                            c.cfg.get<double>("timepred.validation_fraction"));
}

int cmd_train_timepred(const Context& c) {
  const auto& kind = c.opts.model;
  if (kind != "mlp" && kind != "tree") throw ConfigError("--model must be mlp or tree");
  const auto mode = c.cfg.feature_mode();
  auto l = load_corpus(c);
  const auto samples = time_samples(c, l, mode);
  const auto path = c.layout.time_model(kind, mode);
  fs::create_directories(path.parent_path());
  ordered_json log;
  log["train"] = samples.train.size();
  log["validation"] = samples.validation.size();
  log["clamped_gaps"] = samples.clamped;
  if (kind == "mlp") {
    auto result = train_time_mlp(samples.train, samples.validation, mode, c.cfg.time_mlp(mode));
    result.model.save(path);
    log["best_epoch"] = result.best_epoch;
    log["train_mae"] = result.train_mae;
    log["validation_mae"] = result.validation_mae;
  } else {
    // The tree has no early stopping, so it sees the validation pairs too.
    auto all = samples.train;
    all.insert(all.end(), samples.validation.begin(), samples.validation.end());
    auto tree = train_time_tree(all, mode, c.cfg.time_tree());
    tree.save(path);
    log["depth"] = tree.depth();
    log["nodes"] = tree.nodes().size();
  }
  write_text(fs::path(path).replace_extension(".train.json"), log.dump(2) + "\n");
  c.out << "time model (" << kind << ", " << to_string(mode) << ") trained on " << samples.train.size()
        << " pairs\n";
  return 0;
}

int cmd_eval_timepred(const Context& c) {
  const auto& kind = c.opts.model;
  if (kind != "mlp" && kind != "tree") throw ConfigError("--model must be mlp or tree");
  const auto mode = c.cfg.feature_mode();
  const auto path = c.layout.time_model(kind, mode);
  require(path, "train-timepred");
  auto l = load_corpus(c);
  const auto samples = time_samples(c, l, mode);
  if (samples.test.empty()) throw ConfigError("no test pairs for the time model");
  std::vector<TimePrediction> ranked;
  if (kind == "mlp")
    ranked = predict_and_rank(TimeMlpModel::load(path), samples.test);
  else
    ranked = predict_and_rank(RegressionTree::load(path), samples.test);

  std::vector<double> gold, pred;
  std::string tsv;
  for (const auto& p : ranked) {
    gold.push_back(p.gold);
    pred.push_back(p.predicted);
    tsv += time_prediction_line(p) + "\n";
  }
  TimeReport report;
  report.method = kind + "-" + to_string(mode);
  report.pairs = ranked.size();
  report.rmse = rmse(gold, pred);
  try {
    report.spearman = spearman_rho(gold, pred);
  } catch (const std::exception&) {
    report.spearman = std::numeric_limits<double>::quiet_NaN();
  }
  const auto tag = kind + "-" + to_string(mode);
  write_text(c.layout.eval_dir() / ("time-" + tag + ".json"), report.to_json());
  write_text(c.layout.eval_dir() / ("time-" + tag + ".txt"), report.to_table());
  write_text(c.layout.eval_dir() / ("time-ranked-" + tag + ".tsv"), tsv);
  c.out << report.to_table();
  return 0;
}

int cmd_query(const Context& c) {
  if (c.opts.title.empty()) throw ConfigError("query needs --title");
  if (c.opts.tags.empty()) throw ConfigError("query needs at least one --tags value");
  const auto mode = c.cfg.feature_mode();
  auto l = load_corpus(c);
  auto enc = load_encoder(c);
  auto net = load_network(c, mode);
  const auto features = build_features(c, l, *enc, mode, net);

  QuestionRecord q;
  q.id = 0;
  q.title_raw = c.opts.title;
  q.body_raw = c.opts.body;
  q.title_tokens = preprocess_text(q.title_raw);
  q.body_tokens = preprocess_text(q.body_raw);
  for (const auto& t : c.opts.tags)
    for (auto& piece : t.find('<') != std::string::npos || t.find('|') != std::string::npos ? split_tag_string(t)
                                                                                            : std::vector<std::string>{t})
      q.tags.push_back(piece);
  if (c.opts.created.empty()) {
    q.created_at = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  } else {
    auto t = parse_timestamp(c.opts.created);
    if (!t) throw ConfigError("--created is not a timestamp: " + c.opts.created);
    q.created_at = *t;
  }

  const VectorXd row = FeatureTable::encode_one(q, *enc, mode, net.graph.get(), net.tags.get());
  const CandidateGenerator gen(l.archive.questions, features, c.cfg.candidate_filter());
  const auto set = gen.generate(q, row.head(features.title_dim()));
  RankedList list;
  if (c.opts.method == "bm25") {
    list = bm25_rank(q, set, Bm25Index::build(l.archive.questions, c.cfg.bm25()), *l.index, std::nullopt);
  } else if (c.opts.method == "head") {
    require(c.layout.head_model(mode), "train-retrieval");
    const auto model = HeadModel::load(c.layout.head_model(mode));
    list = rank_candidates(0, row, set, features, model, *l.index, std::nullopt);
  } else {
    throw ConfigError("--method must be head or bm25");
  }
  const auto k = std::size_t(c.opts.top_k.value_or(c.cfg.get<int>("eval.top_k")));
  c.out << set.candidates.size() << " candidates\n";
  for (std::size_t i = 0; i < std::min(k, list.entries.size()); ++i) {
    const auto& e = list.entries[i];
    c.out << i + 1 << '\t' << e.id << '\t' << e.score << '\t' << l.index->at(e.id).title_raw << '\n';
  }
  return 0;
}

int cmd_stats(const Context& c) {
  auto l = load_corpus(c);
  for (const auto& [k, v] : l.archive.stats) c.out << k << '\t' << v << '\n';
  if (fs::exists(c.layout.graph_edges())) {
    const auto g = TagGraph::load(c.layout.graph_edges(), c.layout.graph_counts());
    c.out << "graph_nodes\t" << g.node_count() << "\ngraph_edges\t" << g.edge_count() << '\n';
  }
  return 0;
}

const std::map<std::string, std::function<int(const Context&)>>& commands() {
  static const std::map<std::string, std::function<int(const Context&)>> m{
      {"ingest", cmd_ingest},
      {"build-graph", cmd_build_graph},
      {"train-embeddings", cmd_train_embeddings},
      {"build-candidates", cmd_build_candidates},
      {"train-retrieval", cmd_train_retrieval},
      {"eval-retrieval", cmd_eval_retrieval},
      {"train-timepred", cmd_train_timepred},
      {"eval-timepred", cmd_eval_timepred},
      {"query", cmd_query},
      {"stats", cmd_stats},
  };
  return m;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"ingest",          "build-graph",   "train-embeddings", "build-candidates",
                                              "train-retrieval", "eval-retrieval", "train-timepred",  "eval-timepred",
                                              "query",           "stats"};
  return names;
}

int run_command(const std::string& command, const PipelineConfig& cfg, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  auto it = commands().find(command);
  if (it == commands().end()) {
    err << "error: unknown command '" << command << "'\n";
    return 1;
  }
  try {
    cfg.validate();
    Context c{cfg, opts, WorkLayout{cfg.work_dir()}, out, err};
    fs::create_directories(c.layout.log_dir());
    write_text(c.layout.log_dir() / (command + ".config.json"), cfg.dump());
    err << "dupq " << command << ": seed=" << cfg.seed() << " threads=" << cfg.threads()
        << " feature_mode=" << to_string(cfg.feature_mode()) << " work_dir=" << cfg.work_dir().string() << "\n";
    const auto start = std::chrono::steady_clock::now();
    const int rc = it->second(c);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    err << "dupq " << command << ": done in " << took.count() << " s\n";
    return rc;
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << "; run `dupq " << e.producer() << "` first\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dupq
