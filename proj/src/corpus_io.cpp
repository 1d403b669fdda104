#include "dupq/corpus_io.hpp"

#include "dupq/time.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace dupq {

using nlohmann::json;

namespace {

std::size_t word_count(std::string_view raw) {
  std::istringstream in(strip_markup(raw));
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

Timestamp json_time(const json& j, const char* key) {
  auto ts = parse_timestamp(j.at(key).get<std::string>());
  if (!ts) throw FormatError(std::string("bad timestamp in field '") + key + "'");
  return *ts;
}

}  // namespace

CorpusStats compute_corpus_stats(const std::vector<QuestionRecord>& records,
                                 const std::vector<DuplicatePair>& pairs) {
  CorpusStats s;
  const double n = double(records.size());
  double title_words = 0, body_words = 0, tags = 0, answered = 0;
  std::set<std::string> distinct;
  for (const auto& q : records) {
    title_words += double(word_count(q.title_raw));
    body_words += double(word_count(q.body_raw));
    tags += double(q.tags.size());
    answered += q.answered() ? 1.0 : 0.0;
    distinct.insert(q.tags.begin(), q.tags.end());
  }
  s["questions"] = n;
  s["answered_questions"] = answered;
  s["avg_title_words"] = n > 0 ? title_words / n : 0.0;
  s["avg_body_words"] = n > 0 ? body_words / n : 0.0;
  s["avg_tags"] = n > 0 ? tags / n : 0.0;
  s["distinct_tags"] = double(distinct.size());
  s["duplicate_pairs"] = double(pairs.size());

  QuestionIndex index(records);
  double within_12h = 0, within_5d = 0, beyond_5d = 0, before_anchor = 0;
  for (const auto& p : pairs) {
    const auto* anchor = index.find(p.anchor);
    if (!anchor) continue;
    double hours = hours_between(anchor->created_at, p.linked_at);
    if (hours <= 12.0) within_12h += 1;
    else if (hours <= 120.0) within_5d += 1;
    else beyond_5d += 1;
    before_anchor += p.linked_before_anchor ? 1.0 : 0.0;
  }
  const double m = double(pairs.size());
  s["confirmed_le_12h_fraction"] = m > 0 ? within_12h / m : 0.0;
  s["confirmed_12h_5d_fraction"] = m > 0 ? within_5d / m : 0.0;
  s["confirmed_gt_5d_fraction"] = m > 0 ? beyond_5d / m : 0.0;
  s["pairs_linked_before_anchor"] = before_anchor;
  return s;
}

std::string question_to_json_line(const QuestionRecord& q) {
  json j;
  j["id"] = q.id;
  j["title_raw"] = q.title_raw;
  j["body_raw"] = q.body_raw;
  j["title_tokens"] = q.title_tokens;
  j["body_tokens"] = q.body_tokens;
  j["tags"] = q.tags;
  j["created_at"] = format_timestamp(q.created_at);
  j["answer_count"] = q.answer_count;
  return j.dump();
}

QuestionRecord question_from_json_line(const std::string& line) {
  auto j = json::parse(line);
  QuestionRecord q;
  q.id = j.at("id").get<QuestionId>();
  q.title_raw = j.at("title_raw").get<std::string>();
  q.body_raw = j.at("body_raw").get<std::string>();
  q.title_tokens = j.at("title_tokens").get<TokenSequence>();
  q.body_tokens = j.at("body_tokens").get<TokenSequence>();
  q.tags = j.at("tags").get<std::vector<std::string>>();
  q.created_at = json_time(j, "created_at");
  q.answer_count = j.at("answer_count").get<int>();
  return q;
}

std::string pair_to_json_line(const DuplicatePair& p) {
  json j;
  j["anchor"] = p.anchor;
  j["master"] = p.master;
  j["linked_at"] = format_timestamp(p.linked_at);
  j["linked_before_anchor"] = p.linked_before_anchor;
  return j.dump();
}

DuplicatePair pair_from_json_line(const std::string& line) {
  auto j = json::parse(line);
  return {j.at("anchor").get<QuestionId>(), j.at("master").get<QuestionId>(),
          json_time(j, "linked_at"), j.value("linked_before_anchor", false)};
}

void CorpusArchive::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "questions.jsonl", std::ios::binary);
    for (const auto& q : questions) out << question_to_json_line(q) << '\n';
  }
  {
    std::ofstream out(dir / "pairs.jsonl", std::ios::binary);
    for (const auto& p : pairs) out << pair_to_json_line(p) << '\n';
  }
  std::ofstream out(dir / "stats.json", std::ios::binary);
  out << json(stats).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing corpus archive at " + dir.string());
}

CorpusArchive CorpusArchive::load(const std::filesystem::path& dir) {
  CorpusArchive a;
  auto read_lines = [&](const std::filesystem::path& path, auto&& fn) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        fn(line);
      } catch (const std::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  };
  read_lines(dir / "questions.jsonl",
             [&](const std::string& l) { a.questions.push_back(question_from_json_line(l)); });
  read_lines(dir / "pairs.jsonl",
             [&](const std::string& l) { a.pairs.push_back(pair_from_json_line(l)); });
  std::ifstream stats_in(dir / "stats.json");
  if (stats_in) a.stats = json::parse(stats_in).get<CorpusStats>();
  return a;
}

}  // namespace dupq
