#include "dupq/synthetic.hpp"

#include "dupq/text.hpp"
#include "dupq/time.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace dupq {

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string dump_time(Timestamp t, int millis) {
  char buf[8];
  std::snprintf(buf, sizeof buf, ".%03d", millis);
  return format_timestamp(t) + buf;
}

class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}

  std::string fresh() {
    static const char* kSyllables[] = {"ka", "lo", "mi", "ren", "tus", "vo", "zal", "pe", "dri", "nok", "sha", "gu",
                                       "bel", "tor", "qui", "fa", "jun", "wex", "ys", "har", "cop", "lem", "ost", "ib"};
    constexpr int n = int(std::size(kSyllables));
    std::uniform_int_distribution<int> syl(0, n - 1), len(2, 4);
    while (true) {
      std::string w;
      for (int i = len(rng_); i > 0; --i) w += kSyllables[syl(rng_)];
      if (stopwords().count(w) || !used_.insert(w).second) continue;
      return w;
    }
  }

  std::vector<std::string> fresh(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(fresh());
    return out;
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

struct Topic {
  std::string core_tag;
  std::vector<std::string> subtags;
  std::vector<std::string> title_words;
  std::vector<std::string> body_words;
};

struct Draft {
  int topic = 0;
  Timestamp created{};
  int millis = 0;
  std::vector<std::string> title;
  std::vector<std::string> body;
  std::vector<std::string> tags;
  int answers = 0;
  QuestionId id = 0;
};

template <typename T>
std::vector<T> pick(const std::vector<T>& from, int k, std::mt19937_64& rng) {
  std::vector<T> out;
  std::sample(from.begin(), from.end(), std::back_inserter(out), std::size_t(k), rng);
  return out;
}

std::string render_body(const std::vector<std::string>& words, std::mt19937_64& rng) {
  std::string html = "<p>";
  std::bernoulli_distribution markup(0.15), link(0.05);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i && i % 9 == 0) html += "</p>\n<p>";
    if (i) html += ' ';
    if (markup(rng))
      html += "<code>" + words[i] + "</code>";
    else
      html += words[i];
    if (link(rng)) html += " https://example.org/" + words[i];
  }
  return html + "</p>";
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

SyntheticDump write_synthetic_dump(const SyntheticConfig& cfg, std::ostream& posts, std::ostream& links) {
  const int planted = 2 * (cfg.train_pairs + cfg.validation_pairs + cfg.test_pairs);
  if (cfg.topics <= 0 || cfg.questions < planted || cfg.subtags_per_topic <= 0)
    throw ConfigError("synthetic corpus needs topics > 0 and room for every planted pair");
  std::mt19937_64 rng(cfg.seed);
  WordMaker words(rng);

  std::vector<Topic> topics;
  for (int t = 0; t < cfg.topics; ++t) {
    Topic topic;
    topic.core_tag = words.fresh();
    for (int s = 0; s < cfg.subtags_per_topic; ++s) topic.subtags.push_back(topic.core_tag + "-" + words.fresh());
    topic.title_words = words.fresh(2 * cfg.title_topic_words + 2);
    topic.body_words = words.fresh(4 * cfg.body_topic_words);
    topics.push_back(std::move(topic));
  }
  const auto shared_words = words.fresh(40);

  const Timestamp corpus_begin = make_timestamp(2009, 1, 1);
  const Timestamp corpus_end = make_timestamp(2020, 12, 31);
  auto uniform_time = [&](Timestamp a, Timestamp b) {
    std::uniform_int_distribution<long long> d(a.time_since_epoch().count(), b.time_since_epoch().count());
    return Timestamp(std::chrono::seconds(d(rng)));
  };
  std::uniform_int_distribution<int> topic_of(0, cfg.topics - 1), millis(0, 999);
  std::bernoulli_distribution answered(cfg.answered_fraction), swap(cfg.paraphrase_swap);

  auto base_question = [&](int topic, const std::vector<std::string>& title_private,
                           const std::vector<std::string>& body_private) {
    const auto& tp = topics[std::size_t(topic)];
    Draft d;
    d.topic = topic;
    d.title = pick(tp.title_words, cfg.title_topic_words, rng);
    d.title.insert(d.title.end(), title_private.begin(), title_private.end());
    std::shuffle(d.title.begin(), d.title.end(), rng);
    d.body = pick(tp.body_words, cfg.body_topic_words, rng);
    for (const auto& w : body_private) d.body.push_back(w), d.body.push_back(w);
    for (const auto& w : pick(shared_words, cfg.body_shared_words, rng)) d.body.push_back(w);
    std::shuffle(d.body.begin(), d.body.end(), rng);
    d.tags = {tp.core_tag};
    for (const auto& s : pick(tp.subtags, 1 + int(rng() % 2), rng)) d.tags.push_back(s);
    d.millis = millis(rng);
    return d;
  };
  auto perturb = [&](std::vector<std::string> private_words) {
    for (auto& w : private_words)
      if (swap(rng)) w = words.fresh();
    return private_words;
  };

  std::vector<Draft> drafts;
  struct PairSlot {
    std::size_t anchor, master;
    std::string split;
    Timestamp linked;
  };
  std::vector<PairSlot> slots;
  std::uniform_real_distribution<double> log_gap(-0.5, 3.5), master_age_days(1, 700);

  auto plant = [&](int count, const std::string& split, Timestamp link_begin, Timestamp link_end) {
    for (int i = 0; i < count; ++i) {
      const int topic = topic_of(rng);
      const auto title_private = words.fresh(cfg.title_private_words);
      const auto body_private = words.fresh(cfg.body_private_words);
      Draft master = base_question(topic, title_private, body_private);
      Draft anchor = base_question(topic, perturb(title_private), perturb(body_private));
      anchor.tags = master.tags;
      const Timestamp linked = uniform_time(link_begin, link_end);
      anchor.created = linked - std::chrono::seconds(long(3600.0 * std::pow(10.0, log_gap(rng))));
      master.created = std::max(corpus_begin, anchor.created - std::chrono::seconds(long(86400.0 * master_age_days(rng))));
      if (master.created >= anchor.created) master.created = anchor.created - std::chrono::hours(1);
      master.answers = 1 + int(rng() % 3);
      anchor.answers = answered(rng) ? 1 + int(rng() % 2) : 0;
      drafts.push_back(std::move(master));
      drafts.push_back(std::move(anchor));
      slots.push_back({drafts.size() - 1, drafts.size() - 2, split, linked});
    }
  };
  plant(cfg.train_pairs, "train", make_timestamp(2010, 3, 1), make_timestamp(2018, 12, 31));
  plant(cfg.validation_pairs, "validation", make_timestamp(2019, 10, 1), make_timestamp(2019, 12, 31));
  plant(cfg.test_pairs, "test", make_timestamp(2020, 10, 1), make_timestamp(2020, 12, 31));

  while (int(drafts.size()) < cfg.questions) {
    Draft d = base_question(topic_of(rng), words.fresh(cfg.title_private_words), words.fresh(cfg.body_private_words));
    d.created = uniform_time(corpus_begin, corpus_end);
    d.answers = answered(rng) ? 1 + int(rng() % 4) : 0;
    drafts.push_back(std::move(d));
  }

  // Ids follow posting order, as in a real dump.
  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return drafts[a].created < drafts[b].created; });
  for (std::size_t i = 0; i < order.size(); ++i) drafts[order[i]].id = QuestionId(i + 1);

  QuestionId next_post = QuestionId(drafts.size()) + 1;
  posts << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n";
  std::bernoulli_distribution explicit_count(0.7);
  for (auto i : order) {
    const auto& d = drafts[i];
    std::string tags;
    for (const auto& t : d.tags) tags += "<" + t + ">";
    const bool has_count = explicit_count(rng);
    posts << "  <row Id=\"" << d.id << "\" PostTypeId=\"1\" CreationDate=\"" << dump_time(d.created, d.millis)
          << "\" Score=\"0\" Body=\"" << xml_escape(render_body(d.body, rng)) << "\" Title=\""
          << xml_escape(join(d.title)) << "\" Tags=\"" << xml_escape(tags) << "\"";
    if (has_count) posts << " AnswerCount=\"" << d.answers << "\"";
    posts << " />\n";
    if (!has_count)
      for (int a = 0; a < d.answers; ++a)
        posts << "  <row Id=\"" << next_post++ << "\" PostTypeId=\"2\" ParentId=\"" << d.id << "\" CreationDate=\""
              << dump_time(d.created + std::chrono::hours(1 + a), 0) << "\" Score=\"1\" Body=\"&lt;p&gt;answer&lt;/p&gt;\" />\n";
  }
  posts << "</posts>\n";

  SyntheticDump out;
  out.questions = drafts.size();
  links << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<postlinks>\n";
  std::size_t link_id = 1;
  std::bernoulli_distribution reversed(0.1), related(0.2);
  for (const auto& s : slots) {
    const auto& a = drafts[s.anchor];
    const auto& m = drafts[s.master];
    const bool flip = reversed(rng);
    links << "  <row Id=\"" << link_id++ << "\" CreationDate=\"" << dump_time(s.linked, 0) << "\" PostId=\""
          << (flip ? m.id : a.id) << "\" RelatedPostId=\"" << (flip ? a.id : m.id) << "\" LinkTypeId=\"3\" />\n";
    if (related(rng)) {
      const auto& other = drafts[std::size_t(rng() % drafts.size())];
      if (other.id != a.id)
        links << "  <row Id=\"" << link_id++ << "\" CreationDate=\"" << dump_time(s.linked, 0) << "\" PostId=\""
              << a.id << "\" RelatedPostId=\"" << other.id << "\" LinkTypeId=\"1\" />\n";
    }
    out.pairs.push_back({a.id, m.id, s.split, join(a.title), join(a.body), a.tags, join(m.title)});
  }
  links << "</postlinks>\n";
  return out;
}

SyntheticDump write_synthetic_dump(const SyntheticConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream posts(dir / "Posts.xml", std::ios::binary), links(dir / "PostLinks.xml", std::ios::binary);
  if (!posts || !links) throw std::runtime_error("cannot write fixture files under " + dir.string());
  auto dump = write_synthetic_dump(cfg, posts, links);
  if (!posts || !links) throw std::runtime_error("failed writing fixture files under " + dir.string());
  return dump;
}

}  // namespace dupq
