#pragma once

#include "dupq/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dupq {

/// Knobs for a StackExchange-format fixture with planted duplicate pairs.
/// Questions fall into topics sharing tags and vocabulary; each duplicate
/// pair additionally shares a private set of words, perturbed in the anchor.
struct SyntheticConfig {
  int topics = 4;
  int questions = 1600;  ///< total, planted pairs included
  int train_pairs = 200;
  int validation_pairs = 30;
  int test_pairs = 30;
  int subtags_per_topic = 4;
  int title_topic_words = 3;
  int title_private_words = 3;
  int body_topic_words = 10;
  int body_private_words = 8;
  int body_shared_words = 5;
  double paraphrase_swap = 0.2;  ///< chance a private word is replaced in the anchor
  double answered_fraction = 0.85;
  std::uint64_t seed = 7;
};

struct PlantedPair {
  QuestionId anchor = 0;
  QuestionId master = 0;
  std::string split;  ///< train | validation | test
  std::string anchor_title;
  std::string anchor_body;
  std::vector<std::string> anchor_tags;
  std::string master_title;
};

struct SyntheticDump {
  std::size_t questions = 0;
  std::vector<PlantedPair> pairs;
};

SyntheticDump write_synthetic_dump(const SyntheticConfig& cfg, std::ostream& posts, std::ostream& links);
/// Writes `Posts.xml` and `PostLinks.xml` into `dir`.
SyntheticDump write_synthetic_dump(const SyntheticConfig& cfg, const std::filesystem::path& dir);

}  // namespace dupq
