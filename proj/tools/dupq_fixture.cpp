// Writes a synthetic StackExchange dump with planted duplicates.

#include "dupq/synthetic.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic Posts.xml / PostLinks.xml pair"};
  std::string out_dir = "fixture";
  dupq::SyntheticConfig cfg;
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--questions", cfg.questions, "Total questions");
  app.add_option("--topics", cfg.topics, "Topic clusters");
  app.add_option("--train-pairs", cfg.train_pairs);
  app.add_option("--validation-pairs", cfg.validation_pairs);
  app.add_option("--test-pairs", cfg.test_pairs);
  app.add_option("--swap", cfg.paraphrase_swap, "Chance a private word changes in the duplicate");
  app.add_option("--seed", cfg.seed);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto dump = dupq::write_synthetic_dump(cfg, out_dir);
    std::ofstream planted(std::filesystem::path(out_dir) / "planted.tsv");
    planted << "anchor\tmaster\tsplit\tanchor_tags\tanchor_title\tanchor_body\n";
    for (const auto& p : dump.pairs) {
      std::string tags;
      for (const auto& t : p.anchor_tags) tags += "<" + t + ">";
      planted << p.anchor << '\t' << p.master << '\t' << p.split << '\t' << tags << '\t' << p.anchor_title << '\t' << p.anchor_body << '\n';
    }
    std::cout << dump.questions << " questions, " << dump.pairs.size() << " planted pairs in " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
