#pragma once

#include "dupq/text.hpp"
#include "dupq/types.hpp"

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dupq {

struct QuestionRecord {
  QuestionId id = 0;
  std::string title_raw;
  std::string body_raw;
  TokenSequence title_tokens;
  TokenSequence body_tokens;
  std::vector<std::string> tags;
  Timestamp created_at{};
  int answer_count = 0;

  bool answered() const { return answer_count >= 1; }
};

struct DuplicateLink {
  QuestionId post_id = 0;
  QuestionId related_post_id = 0;
  Timestamp linked_at{};
};

struct DuplicatePair {
  QuestionId anchor = 0;
  QuestionId master = 0;
  Timestamp linked_at{};
  /// The dump recorded the link before the anchor was posted.
  bool linked_before_anchor = false;
};

struct SplitAssignment {
  std::vector<DuplicatePair> train;
  std::vector<DuplicatePair> validation;
  std::vector<DuplicatePair> test;
};

/// Half-open UTC interval [begin, end).
struct TimeWindow {
  Timestamp begin{};
  Timestamp end{};
  bool contains(Timestamp t) const { return t >= begin && t < end; }
};

struct SplitWindows {
  TimeWindow train;
  TimeWindow validation;
  TimeWindow test;

  /// 2010-01-01..2019-01-01, 2019-10-01..2020-01-01, 2020-10-01..2021-01-01.
  static SplitWindows defaults();
};

struct PostsParseResult {
  std::vector<QuestionRecord> questions;
  std::size_t malformed_rows = 0;
  std::size_t answer_rows = 0;
  std::size_t other_rows = 0;
};

struct LinksParseResult {
  std::vector<DuplicateLink> links;
  std::size_t non_duplicate_rows = 0;
  std::size_t malformed_rows = 0;
};

struct PairDerivation {
  std::vector<DuplicatePair> pairs;
  std::size_t unresolved = 0;
  std::size_t self_links = 0;
  std::size_t repeated = 0;  ///< same unordered pair seen again (either direction)
  std::size_t linked_before_anchor = 0;

  std::size_t dropped() const { return unresolved + self_links + repeated; }
};

/// Streams a StackExchange `Posts.xml`. Question rows (PostTypeId=1) become
/// records; answer rows (PostTypeId=2) count toward their parent when the
/// question row carries no AnswerCount. Throws FormatError on broken XML or a
/// repeated question id.
PostsParseResult parse_posts(std::istream& in);

/// Streams a StackExchange `PostLinks.xml`, keeping LinkTypeId=3 (duplicate).
LinksParseResult parse_links(std::istream& in);

/// Splits `<a><b>` (or `|a|b|`) preserving order.
std::vector<std::string> split_tag_string(std::string_view tags);

/// Orients every resolvable link as (newer anchor, older master). Equal
/// creation times make the larger id the anchor. Self links and links with an
/// unknown end are dropped; repeats of an unordered pair keep the earliest link.
PairDerivation derive_pairs(const std::vector<DuplicateLink>& links,
                            const std::vector<QuestionRecord>& records);

SplitAssignment split_pairs(const std::vector<DuplicatePair>& pairs,
                            const SplitWindows& windows = SplitWindows::defaults());

/// Read-only id lookup over a record vector.
class QuestionIndex {
 public:
  explicit QuestionIndex(const std::vector<QuestionRecord>& records);

  const QuestionRecord* find(QuestionId id) const;
  const QuestionRecord& at(QuestionId id) const;
  std::size_t position(QuestionId id) const;
  const std::vector<QuestionRecord>& records() const { return *records_; }

 private:
  const std::vector<QuestionRecord>* records_;
  std::unordered_map<QuestionId, std::size_t> by_id_;
};

/// Sorted, de-duplicated copy of a tag list.
std::vector<std::string> tag_set(const std::vector<std::string>& tags);

/// |A ∩ B| / |A ∪ B| over de-duplicated tag lists; 0 when both are empty.
double tag_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace dupq
