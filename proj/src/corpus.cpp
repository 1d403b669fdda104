#include "dupq/corpus.hpp"

#include "dupq/time.hpp"

#include <expat.h>

#include <algorithm>
#include <memory>
#include <charconv>
#include <functional>
#include <map>
#include <set>

namespace dupq {

namespace {

using Attributes = std::map<std::string_view, std::string_view>;
using RowHandler = std::function<void(const Attributes&)>;

struct ExpatState {
  XML_Parser parser = nullptr;
  RowHandler on_row;
  std::string error;
};

void XMLCALL start_element(void* user, const XML_Char* name, const XML_Char** atts) {
  auto* state = static_cast<ExpatState*>(user);
  if (std::string_view(name) != "row") return;
  Attributes attributes;
  for (std::size_t i = 0; atts[i] != nullptr; i += 2) attributes[atts[i]] = atts[i + 1];
  try {
    state->on_row(attributes);
  } catch (const std::exception& e) {
    state->error = e.what();
    XML_StopParser(state->parser, XML_FALSE);
  }
}

// Feeds the stream through expat, calling `on_row` for every <row .../>.
void stream_rows(std::istream& in, RowHandler on_row, const char* what) {
  ExpatState state;
  state.on_row = std::move(on_row);
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"),
                                                                      &XML_ParserFree);
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetStartElementHandler(parser.get(), &start_element);

  std::vector<char> buffer(1 << 16);
  while (true) {
    in.read(buffer.data(), std::streamsize(buffer.size()));
    auto got = in.gcount();
    bool done = got < std::streamsize(buffer.size());
    if (XML_Parse(parser.get(), buffer.data(), int(got), done) == XML_STATUS_ERROR) {
      if (!state.error.empty()) throw FormatError(state.error);
      throw FormatError(std::string(what) + ": XML error at line " +
                        std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                        XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    if (done) break;
  }
}

std::optional<std::string_view> attr(const Attributes& a, std::string_view key) {
  auto it = a.find(key);
  if (it == a.end()) return std::nullopt;
  return it->second;
}

template <typename Int>
std::optional<Int> attr_int(const Attributes& a, std::string_view key) {
  auto v = attr(a, key);
  if (!v) return std::nullopt;
  Int out{};
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) return std::nullopt;
  return out;
}

std::optional<Timestamp> attr_time(const Attributes& a, std::string_view key) {
  auto v = attr(a, key);
  if (!v) return std::nullopt;
  return parse_timestamp(*v);
}

}  // namespace

SplitWindows SplitWindows::defaults() {
  return {{make_timestamp(2010, 1, 1), make_timestamp(2019, 1, 1)},
          {make_timestamp(2019, 10, 1), make_timestamp(2020, 1, 1)},
          {make_timestamp(2020, 10, 1), make_timestamp(2021, 1, 1)}};
}

std::vector<std::string> split_tag_string(std::string_view tags) {
  std::vector<std::string> out;
  if (tags.empty()) return out;
  if (tags.front() == '<') {
    std::size_t pos = 0;
    while (pos < tags.size()) {
      auto open = tags.find('<', pos);
      if (open == std::string_view::npos) break;
      auto close = tags.find('>', open + 1);
      if (close == std::string_view::npos) break;
      if (close > open + 1) out.emplace_back(tags.substr(open + 1, close - open - 1));
      pos = close + 1;
    }
  } else {
    std::size_t pos = 0;
    while (pos <= tags.size()) {
      auto bar = tags.find('|', pos);
      auto piece = tags.substr(pos, bar == std::string_view::npos ? tags.npos : bar - pos);
      if (!piece.empty()) out.emplace_back(piece);
      if (bar == std::string_view::npos) break;
      pos = bar + 1;
    }
  }
  return out;
}

PostsParseResult parse_posts(std::istream& in) {
  PostsParseResult result;
  std::unordered_map<QuestionId, std::size_t> by_id;
  std::vector<bool> explicit_count;
  std::unordered_map<QuestionId, int> answers_seen;

  stream_rows(
      in,
      [&](const Attributes& row) {
        auto id = attr_int<QuestionId>(row, "Id");
        auto type = attr_int<int>(row, "PostTypeId");
        auto created = attr_time(row, "CreationDate");
        if (!id || !type || !created || *id <= 0) {
          ++result.malformed_rows;
          return;
        }
        if (*type == 2) {
          auto parent = attr_int<QuestionId>(row, "ParentId");
          if (!parent) {
            ++result.malformed_rows;
            return;
          }
          ++result.answer_rows;
          ++answers_seen[*parent];
          return;
        }
        if (*type != 1) {
          ++result.other_rows;
          return;
        }
        auto title = attr(row, "Title");
        auto tags = attr(row, "Tags");
        if (!title || !tags) {
          ++result.malformed_rows;
          return;
        }
        QuestionRecord rec;
        rec.id = *id;
        rec.title_raw = std::string(*title);
        rec.body_raw = std::string(attr(row, "Body").value_or(""));
        rec.tags = split_tag_string(*tags);
        rec.created_at = *created;
        if (rec.tags.empty()) {
          ++result.malformed_rows;
          return;
        }
        auto count = attr_int<int>(row, "AnswerCount");
        rec.answer_count = count.value_or(0);
        rec.title_tokens = preprocess_text(rec.title_raw);
        rec.body_tokens = preprocess_text(rec.body_raw);
        if (!by_id.emplace(rec.id, result.questions.size()).second) {
          throw FormatError("Posts: duplicate question id " + std::to_string(rec.id));
        }
        explicit_count.push_back(count.has_value());
        result.questions.push_back(std::move(rec));
      },
      "Posts");

  for (std::size_t i = 0; i < result.questions.size(); ++i) {
    if (explicit_count[i]) continue;
    auto it = answers_seen.find(result.questions[i].id);
    if (it != answers_seen.end()) result.questions[i].answer_count = it->second;
  }
  return result;
}

LinksParseResult parse_links(std::istream& in) {
  constexpr int kDuplicateLinkType = 3;
  LinksParseResult result;
  stream_rows(
      in,
      [&](const Attributes& row) {
        auto post = attr_int<QuestionId>(row, "PostId");
        auto related = attr_int<QuestionId>(row, "RelatedPostId");
        auto type = attr_int<int>(row, "LinkTypeId");
        auto created = attr_time(row, "CreationDate");
        if (!post || !related || !type || !created) {
          ++result.malformed_rows;
          return;
        }
        if (*type != kDuplicateLinkType) {
          ++result.non_duplicate_rows;
          return;
        }
        result.links.push_back({*post, *related, *created});
      },
      "PostLinks");
  return result;
}

PairDerivation derive_pairs(const std::vector<DuplicateLink>& links,
                            const std::vector<QuestionRecord>& records) {
  PairDerivation out;
  QuestionIndex index(records);

  // Earliest link wins for a repeated unordered pair; the stable sort keeps
  // dump order among equal timestamps.
  std::vector<const DuplicateLink*> ordered;
  ordered.reserve(links.size());
  for (const auto& l : links) ordered.push_back(&l);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](auto* a, auto* b) { return a->linked_at < b->linked_at; });

  std::set<std::pair<QuestionId, QuestionId>> seen;
  for (const auto* link : ordered) {
    if (link->post_id == link->related_post_id) {
      ++out.self_links;
      continue;
    }
    const auto* a = index.find(link->post_id);
    const auto* b = index.find(link->related_post_id);
    if (!a || !b) {
      ++out.unresolved;
      continue;
    }
    auto key = std::minmax(a->id, b->id);
    if (!seen.insert(key).second) {
      ++out.repeated;
      continue;
    }
    bool a_newer = a->created_at > b->created_at || (a->created_at == b->created_at && a->id > b->id);
    const auto& anchor = a_newer ? *a : *b;
    const auto& master = a_newer ? *b : *a;
    DuplicatePair pair{anchor.id, master.id, link->linked_at, link->linked_at < anchor.created_at};
    if (pair.linked_before_anchor) ++out.linked_before_anchor;
    out.pairs.push_back(pair);
  }
  return out;
}

SplitAssignment split_pairs(const std::vector<DuplicatePair>& pairs, const SplitWindows& windows) {
  SplitAssignment out;
  for (const auto& p : pairs) {
    if (windows.train.contains(p.linked_at)) out.train.push_back(p);
    else if (windows.validation.contains(p.linked_at)) out.validation.push_back(p);
    else if (windows.test.contains(p.linked_at)) out.test.push_back(p);
  }
  return out;
}

QuestionIndex::QuestionIndex(const std::vector<QuestionRecord>& records) : records_(&records) {
  by_id_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) by_id_.emplace(records[i].id, i);
}

const QuestionRecord* QuestionIndex::find(QuestionId id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &(*records_)[it->second];
}

const QuestionRecord& QuestionIndex::at(QuestionId id) const {
  const auto* rec = find(id);
  if (!rec) throw std::out_of_range("unknown question id " + std::to_string(id));
  return *rec;
}

std::size_t QuestionIndex::position(QuestionId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range("unknown question id " + std::to_string(id));
  return it->second;
}

std::vector<std::string> tag_set(const std::vector<std::string>& tags) {
  std::vector<std::string> out(tags);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double tag_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  auto sa = tag_set(a);
  auto sb = tag_set(b);
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t common = 0;
  for (std::size_t i = 0, j = 0; i < sa.size() && j < sb.size();) {
    if (sa[i] == sb[j]) {
      ++common;
      ++i;
      ++j;
    } else if (sa[i] < sb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return double(common) / double(sa.size() + sb.size() - common);
}

}  // namespace dupq
