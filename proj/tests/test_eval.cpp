#include "dupq/eval.hpp"
#include "test_util.hpp"

#include <cmath>
#include <numeric>

using namespace dupq;

namespace {

// Average ranks by counting: rank = #smaller + (#equal + 1) / 2.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) less += w < v[i], equal += w == v[i];
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST(Mrr, Examples) {
  const std::vector<GoldRank> ranks{1, 2, 4};
  EXPECT_NEAR(mrr(ranks), (1 + 0.5 + 0.25) / 3, 1e-15);
  const std::vector<GoldRank> absent(3, std::nullopt);
  EXPECT_EQ(mrr(absent), 0.0);
  EXPECT_THROW(mrr(std::vector<GoldRank>{}), std::invalid_argument);
}

TEST(RecallAt, Examples) {
  const std::vector<GoldRank> ranks{1, 15, std::nullopt};
  EXPECT_NEAR(recall_at(ranks, 10), 1.0 / 3, 1e-15);
  EXPECT_NEAR(recall_at(ranks, 15), 2.0 / 3, 1e-15);
  EXPECT_THROW(recall_at(ranks, 0), std::invalid_argument);
  EXPECT_EQ(recall_at(ranks, 1000), upper_bound(dupq::testing::Flags{true, true, false}));
}

TEST(UpperBound, Examples) {
  std::vector<bool> flags(485, false);
  std::fill(flags.begin(), flags.begin() + 305, true);
  EXPECT_NEAR(upper_bound(dupq::testing::Flags(flags)), 0.629, 1e-3);
  EXPECT_EQ(upper_bound(dupq::testing::Flags(std::vector<bool>(4, true))), 1.0);
  EXPECT_EQ(upper_bound(dupq::testing::Flags(std::vector<bool>(4, false))), 0.0);
}

TEST(RetrievalReport, OrderedAndBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GoldRank> ranks;
    std::vector<bool> present;
    for (int i = 0, n = 1 + int(rng() % 60); i < n; ++i) {
      const bool in = rng() % 3 != 0;
      present.push_back(in);
      ranks.push_back(in ? GoldRank(1 + rng() % 700) : std::nullopt);
    }
    const auto r = RetrievalReport::compute("m", ranks, dupq::testing::Flags(present), 10);
    double prev = 0;
    for (std::size_t k = 1; k <= 500; ++k) {
      const double v = recall_at(ranks, k);
      EXPECT_GE(v, prev);
      EXPECT_LE(v, r.upper_bound);
      prev = v;
    }
    EXPECT_LE(r.mrr, r.upper_bound);
    EXPECT_GE(r.mrr, 0.0);
    EXPECT_EQ(r.rr_at.size(), kReportCutoffs.size());
  }
}

TEST(RetrievalReport, Rendering) {
  const std::vector<GoldRank> ranks{1, 40};
  const std::vector<bool> present{true, true};
  const auto r = RetrievalReport::compute("head", ranks, dupq::testing::Flags(present), 12.5);
  EXPECT_NE(r.to_json().find("\"rr@30\": 0.5"), std::string::npos);
  EXPECT_NE(r.to_table().find("head"), std::string::npos);
  EXPECT_NE(r.to_table().find("51.250"), std::string::npos);
}

TEST(Rmse, Examples) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_NEAR(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}), std::sqrt(12.5), 1e-15);
  EXPECT_THROW(rmse(a, std::vector<double>{1}), std::invalid_argument);
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 5, 2, 8, 3};
  std::vector<double> rev(x.rbegin(), x.rend());
  EXPECT_NEAR(spearman_rho(x, x), 1.0, 1e-15);
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  EXPECT_NEAR(spearman_rho(x, neg), -1.0, 1e-15);
  EXPECT_THROW(spearman_rho(x, std::vector<double>(5, 1.0)), std::invalid_argument);
  EXPECT_THROW(spearman_rho(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Spearman, TiedFixturesMatchRankThenPearson) {
  std::mt19937_64 rng(7);
  int checked = 0;
  while (checked < 200) {
    std::vector<double> x(8), y(8);
    for (auto& v : x) v = double(rng() % 4);
    for (auto& v : y) v = double(rng() % 5) * 0.5;
    const auto rx = oracle_ranks(x), ry = oracle_ranks(y);
    if (std::adjacent_find(rx.begin(), rx.end(), std::not_equal_to<>()) == rx.end() ||
        std::adjacent_find(ry.begin(), ry.end(), std::not_equal_to<>()) == ry.end())
      continue;
    EXPECT_EQ(average_ranks(x), rx);
    EXPECT_NEAR(spearman_rho(x, y), oracle_pearson(rx, ry), 1e-10);
    ++checked;
  }
}

TEST(Spearman, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(20), y(20), tx(20);
    for (int i = 0; i < 20; ++i) {
      x[i] = g(rng);
      y[i] = x[i] + g(rng);
      tx[i] = std::exp(x[i]) * 3 + 1;
    }
    EXPECT_NEAR(spearman_rho(x, y), spearman_rho(tx, y), 1e-12);
  }
}

TEST(MannWhitney, ExactSmallSample) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = mann_whitney_u(a, b);
  EXPECT_EQ(r.u_a, 0.0);
  EXPECT_EQ(r.u_b, 9.0);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.p_value, 0.1);
  EXPECT_EQ(mann_whitney_u(b, a).p_value, r.p_value);
}

TEST(MannWhitney, IdenticalSamples) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_NEAR(mann_whitney_u(a, a).p_value, 1.0, 1e-12);
}

TEST(MannWhitney, PropertiesOnRandomFixtures) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(1 + rng() % 12), b(1 + rng() % 12);
    for (auto& v : a) v = double(rng() % 6);
    for (auto& v : b) v = double(rng() % 6) + 0.5 * double(rng() % 2);
    const auto ab = mann_whitney_u(a, b), ba = mann_whitney_u(b, a);
    EXPECT_DOUBLE_EQ(ab.u_a + ab.u_b, double(a.size() * b.size()));
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
    // U_a counts pairs with a > b plus half the ties.
    double u = 0;
    for (double x : a)
      for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    EXPECT_DOUBLE_EQ(ab.u_a, u);
  }
}

TEST(MannWhitney, NormalApproximationForLargeSamples) {
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) a.push_back(i), b.push_back(i + 10.5);
  const auto r = mann_whitney_u(a, b);
  EXPECT_FALSE(r.exact);
  // Continuity-corrected normal tail for U = 190 with no ties.
  const double sd = std::sqrt(30.0 * 30 * 61 / 12);
  EXPECT_EQ(r.u_a, 190.0);
  EXPECT_NEAR(r.p_value, std::erfc((450 - 190 - 0.5) / sd / std::sqrt(2.0)), 1e-12);
}
