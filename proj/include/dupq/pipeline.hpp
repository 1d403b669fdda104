#pragma once

#include "dupq/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dupq {

/// Files under the work directory, one subdirectory per stage.
struct WorkLayout {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path graph_edges() const { return root / "graph" / "edges.tsv"; }
  std::filesystem::path graph_counts() const { return root / "graph" / "tag_counts.tsv"; }
  std::filesystem::path token_vectors() const { return root / "embeddings" / "tokens.vec"; }
  std::filesystem::path tag_vectors() const { return root / "embeddings" / "tags.vec"; }
  std::filesystem::path candidates(const std::string& split) const { return root / "candidates" / (split + ".jsonl"); }
  std::filesystem::path head_model(FeatureMode mode) const;
  std::filesystem::path time_model(const std::string& kind, FeatureMode mode) const;
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path log_dir() const { return root / "logs"; }
};

/// A required input is absent; `producer` is the command that writes it.
class MissingArtifact : public std::runtime_error {
 public:
  MissingArtifact(const std::filesystem::path& path, const std::string& producer)
      : std::runtime_error("missing " + path.string() + " (produced by `" + producer + "`)"),
        path_(path),
        producer_(producer) {}
  const std::filesystem::path& path() const { return path_; }
  const std::string& producer() const { return producer_; }

 private:
  std::filesystem::path path_;
  std::string producer_;
};

/// Per-command arguments that are not part of the persistent configuration.
struct CommandOptions {
  std::string method = "head";  ///< eval-retrieval, query: head | bm25
  std::string model = "mlp";    ///< train-timepred, eval-timepred: mlp | tree
  std::string compare;          ///< eval-retrieval: reciprocal-rank file of another run
  std::string title;            ///< query
  std::string body;
  std::vector<std::string> tags;
  std::string created;  ///< query posting time; defaults to now
  std::optional<int> top_k;
};

const std::vector<std::string>& command_names();

/// Runs one pipeline command. Returns 0 on success, 2 when a prerequisite
/// artifact is missing, 1 on other errors; messages go to `err`.
int run_command(const std::string& command, const PipelineConfig& cfg, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);

}  // namespace dupq
