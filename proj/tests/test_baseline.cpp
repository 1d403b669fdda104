#include "dupq/baseline.hpp"
#include "test_util.hpp"

using namespace dupq;
using namespace dupq::testing;

namespace {

// Twenty short documents over a twelve-word vocabulary with uneven lengths.
std::vector<QuestionRecord> twenty_docs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> words{"grub", "boot", "wifi", "driver", "nvidia", "kernel",
                                       "apt",  "ssh",  "key",  "login",  "unity",  "panel"};
  std::vector<QuestionRecord> out;
  for (int i = 0; i < 20; ++i) {
    TokenSequence title, body;
    for (int k = 0, n = 1 + int(rng() % 4); k < n; ++k) title.push_back(words[rng() % 6]);
    for (int k = 0, n = int(rng() % 15); k < n; ++k) body.push_back(words[rng() % words.size()]);
    out.push_back(make_question(100 + i, {"x"}, day(i), 1, title, body));
  }
  return out;
}

}  // namespace

TEST(Bm25Index, SingleDocumentCounts) {
  const auto idx = Bm25Index::build({make_question(1, {"x"}, day(0), 1, {"a"}, {"b", "a"})});
  EXPECT_EQ(idx.term_frequency(1, "a"), 2u);
  EXPECT_EQ(idx.term_frequency(1, "b"), 1u);
  EXPECT_EQ(idx.term_frequency(1, "c"), 0u);
  EXPECT_EQ(idx.length(1), 3u);
  EXPECT_EQ(document_tokens(make_question(1, {"x"}, day(0), 1, {"a"}, {"b", "a"})), (TokenSequence{"a", "b", "a"}));
}

TEST(Bm25Index, EmptyCorpus) {
  const auto idx = Bm25Index::build({});
  EXPECT_EQ(idx.document_count(), 0u);
  EXPECT_EQ(idx.document_frequency("a"), 0u);
}

TEST(Bm25Index, CountsMatchHandCount) {
  const auto docs = twenty_docs(1);
  const auto idx = Bm25Index::build(docs);
  std::map<std::string, std::size_t> df;
  double total = 0;
  for (const auto& d : docs) {
    const auto toks = document_tokens(d);
    total += double(toks.size());
    EXPECT_EQ(idx.length(d.id), toks.size());
    std::set<std::string> seen(toks.begin(), toks.end());
    for (const auto& t : seen) {
      ++df[t];
      EXPECT_EQ(idx.term_frequency(d.id, t), std::size_t(std::count(toks.begin(), toks.end(), t)));
    }
  }
  for (const auto& [t, n] : df) EXPECT_EQ(idx.document_frequency(t), n) << t;
  EXPECT_DOUBLE_EQ(idx.average_length(), total / 20.0);
}

TEST(Bm25Score, NoSharedTermIsZero) {
  const auto idx = Bm25Index::build(twenty_docs(2));
  EXPECT_EQ(idx.score({"nonexistent", "words"}, 100), 0.0);
}

TEST(Bm25Score, SingleDocSingleTermClosedForm) {
  const auto idx = Bm25Index::build({make_question(1, {"x"}, day(0), 1, {"t"}, {})});
  // N = 1, df = 1, tf = 1, len = avglen: idf = ln(0.5 / 1.5 + 1), tf part = (k1 + 1) / (1 + k1) = 1.
  EXPECT_NEAR(idx.score({"t"}, 1), std::log(4.0 / 3.0), 1e-12);
}

TEST(Bm25Score, MatchesDirectFormula) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto docs = twenty_docs(seed);
    std::vector<TokenSequence> corpus;
    for (const auto& d : docs) corpus.push_back(document_tokens(d));
    for (Bm25Params params : {Bm25Params{}, Bm25Params{1.2, 0.3}}) {
      const auto idx = Bm25Index::build(docs, params);
      for (const auto& q : docs)
        for (const auto& d : docs) {
          const auto query = document_tokens(q);
          EXPECT_NEAR(idx.score(query, d.id), bm25_formula(query, document_tokens(d), corpus, params.k1, params.b), 1e-9);
        }
    }
  }
}

TEST(Bm25Score, UnknownDocumentThrows) {
  const auto idx = Bm25Index::build(twenty_docs(3));
  EXPECT_THROW(idx.score({"grub"}, 5), std::out_of_range);
}

TEST(Bm25Score, NonNegative) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto docs = twenty_docs(rng());
    const auto idx = Bm25Index::build(docs);
    for (const auto& q : docs)
      for (const auto& d : docs) EXPECT_GE(idx.score(document_tokens(q), d.id), 0.0);
  }
}

TEST(Bm25Score, MonotoneInTermFrequency) {
  // Swapping a filler token for a query term the document already holds keeps
  // every length and document frequency fixed and raises only that tf.
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto docs = twenty_docs(rng());
    for (auto& d : docs) d.body_tokens.insert(d.body_tokens.end(), {"filler", "filler", "filler"});
    const auto idx = Bm25Index::build(docs);
    auto& target = docs[rng() % docs.size()];
    const std::string term = target.title_tokens.front();
    const TokenSequence query{term, "boot", "wifi"};
    double prev = idx.score(query, target.id);
    for (int step = 0; step < 3; ++step) {
      *std::find(target.body_tokens.begin(), target.body_tokens.end(), "filler") = term;
      const auto next_idx = Bm25Index::build(docs);
      ASSERT_EQ(next_idx.document_frequency(term), idx.document_frequency(term));
      ASSERT_EQ(next_idx.average_length(), idx.average_length());
      const double next = next_idx.score(query, target.id);
      EXPECT_GE(next, prev);
      prev = next;
    }
  }
}

TEST(Bm25Rank, SharedTermsFirstAndEmptySet) {
  const std::vector<QuestionRecord> docs{make_question(1, {"x"}, day(0), 1, {"grub", "boot"}, {}),
                                         make_question(2, {"x"}, day(1), 1, {"wifi"}, {}),
                                         make_question(3, {"x"}, day(2), 1, {"grub", "boot"}, {"loader"})};
  const auto idx = Bm25Index::build(docs);
  const QuestionIndex qi(docs);
  const CandidateSet set{3, {{1, 0, 0}, {2, 0, 0}}};
  const auto list = bm25_rank(docs[2], set, idx, qi, QuestionId(1));
  ASSERT_EQ(list.entries.size(), 2u);
  EXPECT_EQ(list.entries[0].id, 1);
  EXPECT_EQ(list.gold_rank, 1u);
  EXPECT_TRUE(bm25_rank(docs[2], CandidateSet{3, {}}, idx, qi, QuestionId(1)).entries.empty());
}

TEST(Bm25Rank, EqualsScoreSortOracleAndIgnoresQueryOrder) {
  const auto docs = twenty_docs(9);
  std::vector<TokenSequence> corpus;
  for (const auto& d : docs) corpus.push_back(document_tokens(d));
  const auto idx = Bm25Index::build(docs);
  const QuestionIndex qi(docs);
  std::mt19937_64 rng(1);
  for (const auto& anchor : docs) {
    CandidateSet set{anchor.id, {}};
    std::vector<std::tuple<double, Timestamp, QuestionId>> rows;
    for (const auto& d : docs) {
      if (d.id == anchor.id) continue;
      set.candidates.push_back({d.id, 0, 0});
      rows.emplace_back(bm25_formula(document_tokens(anchor), document_tokens(d), corpus), d.created_at, d.id);
    }
    const auto list = bm25_rank(anchor, set, idx, qi, std::nullopt);
    std::vector<QuestionId> got;
    for (const auto& e : list.entries) got.push_back(e.id);
    EXPECT_EQ(got, score_sort(rows));

    auto shuffled = anchor;
    std::shuffle(shuffled.title_tokens.begin(), shuffled.title_tokens.end(), rng);
    std::shuffle(shuffled.body_tokens.begin(), shuffled.body_tokens.end(), rng);
    std::swap(shuffled.title_tokens, shuffled.body_tokens);
    const auto permuted = bm25_rank(shuffled, set, idx, qi, std::nullopt);
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(permuted.entries[k].id, got[k]);
  }
}
