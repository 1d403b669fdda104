// Command-line entry point: one subcommand per pipeline stage.

#include "dupq/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

int main(int argc, char** argv) {
  CLI::App app{"Duplicate question retrieval and confirmation-time prediction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show every configuration flag");

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file; flags given on the command line win")
      ->check(CLI::ExistingFile);

  // Every config leaf is a flag of the same dotted name, e.g. --node2vec.p 1.3.
  std::map<std::string, std::string> overrides;
  const auto& defaults = dupq::PipelineConfig::defaults();
  for (const auto& key : dupq::PipelineConfig::keys()) {
    std::string names = "--" + key;
    std::string help = "default: ";
    const auto* node = &defaults;
    for (std::size_t start = 0;;) {
      auto dot = key.find('.', start);
      node = &(*node)[key.substr(start, dot == std::string::npos ? std::string::npos : dot - start)];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    help += node->dump();
    if (key == "seed") help = "Global random seed (" + help + ")";
    if (key == "threads") help = "Worker threads; deterministic outputs do not depend on it (" + help + ")";
    if (key == "feature_mode") {
      names += ",--feature-mode";
      help = "text | text+network (" + help + ")";
    }
    if (key == "deterministic") help = "Single-threaded embedding training (" + help + ")";
    app.add_option(names, overrides[key], help)->group(key.find('.') == std::string::npos ? "Run" : "Configuration");
  }

  dupq::CommandOptions opts;
  std::map<std::string, CLI::App*> subs;
  auto sub = [&](const std::string& name, const std::string& description) {
    auto* s = app.add_subcommand(name, description);
    s->fallthrough();
    subs[name] = s;
    return s;
  };
  sub("ingest", "Parse Posts.xml and PostLinks.xml into the corpus archive");
  sub("build-graph", "Build the tag co-occurrence graph from training-period questions");
  sub("train-embeddings", "Train word2vec token vectors and node2vec tag vectors");
  sub("build-candidates", "Generate filtered candidate sets for validation and test anchors");
  sub("train-retrieval", "Train the Siamese head with hard negatives");
  auto* eval = sub("eval-retrieval", "Rank test candidates and write the retrieval report");
  eval->add_option("--method", opts.method, "head | bm25")->check(CLI::IsMember({"head", "bm25"}));
  eval->add_option("--compare", opts.compare, "rr-*.tsv of another run for a Mann-Whitney U test")
      ->check(CLI::ExistingFile);
  eval->add_option("--top-k", opts.top_k, "Candidates listed per anchor in the ranked output");
  auto* ttrain = sub("train-timepred", "Train the confirmation-time regressor");
  ttrain->add_option("--model", opts.model, "mlp | tree")->check(CLI::IsMember({"mlp", "tree"}));
  auto* teval = sub("eval-timepred", "Rank test pairs by predicted confirmation time");
  teval->add_option("--model", opts.model, "mlp | tree")->check(CLI::IsMember({"mlp", "tree"}));
  auto* query = sub("query", "Rank archive questions against a new question");
  query->add_option("--title", opts.title, "Question title")->required();
  query->add_option("--body", opts.body, "Question body (HTML allowed)");
  query->add_option("--tags", opts.tags, "Tags, separately or as <a><b>")->required();
  query->add_option("--created", opts.created, "Posting time (default: now)");
  query->add_option("--method", opts.method, "head | bm25")->check(CLI::IsMember({"head", "bm25"}));
  query->add_option("--top-k", opts.top_k, "Results to print");
  sub("stats", "Print corpus statistics");

  CLI11_PARSE(app, argc, argv);

  dupq::PipelineConfig cfg;
  try {
    if (!config_file.empty()) cfg.merge_file(config_file);
    for (const auto& [key, value] : overrides)
      if (app.count("--" + key)) cfg.set(key, value);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  for (const auto& [name, s] : subs)
    if (s->parsed()) return dupq::run_command(name, cfg, opts, std::cout, std::cerr);
  return 1;
}
