#include "dupq/timepred.hpp"
#include "test_util.hpp"

#include <numeric>
#include <sstream>

using namespace dupq;
using namespace dupq::testing;

namespace {

std::vector<double> flatten(const TimeMlp<double>& net) {
  std::vector<double> out;
  for (const auto& b : net.blocks()) out.insert(out.end(), b.data(), b.data() + b.size());
  return out;
}

void unflatten(TimeMlp<double>& net, const VectorXd& theta) {
  Eigen::Index at = 0;
  for (auto b : net.blocks()) {
    b = theta.segment(at, b.size());
    at += b.size();
  }
}

TimeGapSample sample(QuestionId anchor, VectorXd q1, VectorXd q2, double target) {
  return {{anchor, anchor + 1000, day(0), false}, std::move(q1), std::move(q2), target};
}

}  // namespace

TEST(Gap, WorkedExamplePair) {
  const auto g = compute_gap(make_timestamp(2012, 11, 7, 13, 35, 45), make_timestamp(2013, 2, 18, 3, 3, 21));
  // 102 days, 13 h 27 min 36 s.
  EXPECT_NEAR(g.hours, 102 * 24 + 13 + 27 / 60.0 + 36 / 3600.0, 1e-9);
  EXPECT_NEAR(g.hours, 2461.46, 0.01);
  EXPECT_NEAR(g.target, std::log10(g.hours), 1e-15);
  EXPECT_NEAR(g.target, 3.3912, 1e-4);
  EXPECT_FALSE(g.clamped);
}

TEST(Gap, HourAndSubHour) {
  const auto t = make_timestamp(2020, 1, 1);
  EXPECT_DOUBLE_EQ(compute_gap(t, t + std::chrono::hours(1)).target, 0.0);
  EXPECT_NEAR(compute_gap(t, t + std::chrono::minutes(6)).target, -1.0, 1e-12);
}

TEST(Gap, NonPositiveGapsClamp) {
  const auto t = make_timestamp(2020, 1, 1);
  for (auto linked : {t, t - std::chrono::hours(5)}) {
    const auto g = compute_gap(t, linked);
    EXPECT_TRUE(g.clamped);
    EXPECT_DOUBLE_EQ(g.target, -3.0);
  }
}

TEST(TimeSamples, SplitByAnchorPostingTime) {
  std::vector<QuestionRecord> recs;
  std::map<QuestionId, std::pair<VectorXd, VectorXd>> vecs;
  std::vector<DuplicatePair> pairs;
  for (int i = 0; i < 12; ++i) {
    const QuestionId m = 2 * i + 1, a = 2 * i + 2;
    const auto anchor_time = make_timestamp(2019, 1, 1) + std::chrono::days(40 * i);
    recs.push_back(make_question(m, {"t"}, anchor_time - std::chrono::days(3)));
    recs.push_back(make_question(a, {"t"}, anchor_time));
    vecs[m] = {VectorXd::Constant(2, double(m)), VectorXd::Zero(2)};
    vecs[a] = {VectorXd::Constant(2, double(a)), VectorXd::Zero(2)};
    pairs.push_back({a, m, anchor_time + std::chrono::hours(10 * (i + 1)), false});
  }
  pairs.push_back({99, 1, day(0), false});  // unknown anchor
  const auto table = table_from_vectors(recs, vecs);
  const QuestionIndex idx(recs);
  const auto s = build_time_samples(pairs, idx, table, make_timestamp(2020, 1, 1));
  // Anchors at 0, 40, ..., 360 days are before 2020 (10 of them); 25% of 10 rounds down to 2.
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  for (const auto& v : s.validation)
    for (const auto& t : s.train) EXPECT_GT(idx.at(v.pair.anchor).created_at, idx.at(t.pair.anchor).created_at);
  const auto& first = s.train.front();
  EXPECT_EQ(first.q1, VectorXd(table.row(first.pair.anchor).transpose()));
  EXPECT_EQ(first.q2, VectorXd(table.row(first.pair.master).transpose()));
  EXPECT_DOUBLE_EQ(first.target, 1.0);
}

TEST(TanhShrink, OddAtTheOutputUnit) {
  EXPECT_EQ(tanhshrink(0.0), 0.0);
  auto net = TimeMlp<double>::initialize(3, 5, 4, 2);
  const VectorXd q1 = VectorXd::LinSpaced(3, -1, 1), q2 = VectorXd::LinSpaced(3, 2, 0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 2);
  for (int i = 0; i < 100; ++i) {
    const double x = g(rng);
    EXPECT_NEAR(tanhshrink(-x), -tanhshrink(x), 1e-12);
    // Flip the sign of the output pre-activation by negating the output layer.
    auto neg = net;
    neg.w_out = -net.w_out;
    neg.b_out = -net.b_out;
    EXPECT_NEAR(neg.predict_one(q1, q2), -net.predict_one(q1, q2), 1e-12);
    net.b_out(0) = x;
  }
}

TEST(TimeMlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 1);
  for (int point = 0; point < 10; ++point) {
    auto net = TimeMlp<double>::initialize(3, 6, 4, rng());
    for (auto b : net.blocks())
      for (auto& v : b) v = g(rng);
    RowMatrix<double> x1(4, 3), x2(4, 3);
    for (Eigen::Index i = 0; i < x1.size(); ++i) x1.data()[i] = g(rng), x2.data()[i] = g(rng);
    VectorXd target(4);
    for (auto& t : target) t = 3 * g(rng);
    TimeMlp<double> grad;
    time_mlp_l1_loss<double>(net, x1, x2, target, &grad);
    const auto flat = flatten(net);
    const VectorXd theta = Eigen::Map<const VectorXd>(flat.data(), Eigen::Index(flat.size()));
    auto f = [&](const VectorXd& t) {
      auto copy = net;
      unflatten(copy, t);
      return time_mlp_l1_loss<double>(copy, x1, x2, target);
    };
    const auto analytic_flat = flatten(grad);
    const VectorXd analytic = Eigen::Map<const VectorXd>(analytic_flat.data(), Eigen::Index(analytic_flat.size()));
    EXPECT_LE(relative_error(analytic, numeric_gradient(f, theta)), 1e-4) << "point " << point;
  }
}

TEST(TimeMlp, HiddenSizesByMode) {
  EXPECT_EQ(default_hidden_sizes(FeatureMode::kText), std::make_pair(256, 64));
  EXPECT_EQ(default_hidden_sizes(FeatureMode::kTextNetwork), std::make_pair(512, 64));
  const auto net = TimeMlp<double>::initialize(10, 256, 64, 1);
  EXPECT_EQ(net.hidden1(), 256);
  EXPECT_EQ(net.hidden2(), 64);
  EXPECT_EQ(net.w_out.size(), 128);
}

TEST(TimeMlp, ArmsAreNotSymmetric) {
  const auto net = TimeMlp<double>::initialize(4, 8, 4, 5);
  const VectorXd a = VectorXd::LinSpaced(4, 0, 3), b = VectorXd::LinSpaced(4, 3, -1);
  EXPECT_NE(net.predict_one(a, b), net.predict_one(b, a));
}

TEST(TimeMlp, TrainingReducesErrorAndIsDeterministic) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 1);
  std::vector<TimeGapSample> train, validation;
  for (int i = 0; i < 240; ++i) {
    VectorXd q1(4), q2(4);
    for (auto& v : q1) v = g(rng);
    for (auto& v : q2) v = g(rng);
    const double t = 1.5 + q1(0) - 0.5 * q2(1);
    (i < 200 ? train : validation).push_back(sample(i, q1, q2, t));
  }
  TimeMlpConfig cfg;
  cfg.hidden1 = 16;
  cfg.hidden2 = 8;
  cfg.batch_size = 16;
  cfg.epochs = 30;
  cfg.optimizer.learning_rate = 5e-3;
  const auto r = train_time_mlp(train, validation, FeatureMode::kText, cfg);
  ASSERT_EQ(r.validation_mae.size(), 30u);
  EXPECT_LT(r.train_mae.back(), 0.5 * r.train_mae.front());
  EXPECT_EQ(r.validation_mae[std::size_t(r.best_epoch)],
            *std::min_element(r.validation_mae.begin(), r.validation_mae.end()));
  const auto again = train_time_mlp(train, validation, FeatureMode::kText, cfg);
  EXPECT_EQ(flatten(again.model.net), flatten(r.model.net));
  EXPECT_ANY_THROW(train_time_mlp({}, validation, FeatureMode::kText, cfg));
}

TEST(TimeMlp, CheckpointRoundTrip) {
  TimeMlpModel m{TimeMlp<double>::initialize(3, 5, 2, 4), FeatureMode::kTextNetwork};
  std::stringstream buf;
  m.save(buf);
  const auto r = TimeMlpModel::load(buf);
  EXPECT_EQ(flatten(r.net), flatten(m.net));
  EXPECT_EQ(r.mode, FeatureMode::kTextNetwork);
  std::stringstream again;
  r.save(again);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(Tree, ConstantTargetsGiveSingleLeaf) {
  RowMatrix<double> x = RowMatrix<double>::Random(30, 3);
  const std::vector<double> y(30, 2.5);
  const auto t = RegressionTree::fit(x, y);
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.depth(), 0);
  EXPECT_EQ(t.predict(VectorXd::Zero(3)), 2.5);
}

TEST(Tree, PerfectSplitMatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + int(rng() % 30);
    RowMatrix<double> x(n, 1);
    std::vector<double> y(n);
    const double cut = 0.3 + 0.4 * double(rng() % 100) / 100.0;
    for (int i = 0; i < n; ++i) {
      x(i, 0) = double(rng() % 1000) / 1000.0;
      if (i == 0) x(i, 0) = cut - 0.2;
      if (i == 1) x(i, 0) = cut + 0.2;
      y[i] = x(i, 0) <= cut ? -1.0 : 4.0;
    }
    const auto t = RegressionTree::fit(x, y);
    EXPECT_EQ(t.depth(), 1);
    // Brute force: the best threshold sits between the largest left value and the smallest right value.
    double lo = -1e9, hi = 1e9;
    for (int i = 0; i < n; ++i) {
      if (y[i] < 0) lo = std::max(lo, x(i, 0));
      else hi = std::min(hi, x(i, 0));
    }
    ASSERT_FALSE(t.nodes()[0].leaf);
    EXPECT_GE(t.nodes()[0].threshold, lo);
    EXPECT_LT(t.nodes()[0].threshold, hi);
    double sse = 0;
    for (int i = 0; i < n; ++i) sse += std::pow(t.predict(VectorXd(x.row(i).transpose())) - y[i], 2);
    EXPECT_EQ(sse, 0.0);
  }
}

TEST(Tree, LeafValuesAreRoutedMeansAndDepthBounded) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 50 + int(rng() % 300), d = 1 + int(rng() % 4);
    RowMatrix<double> x(n, d);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = trial % 3 == 0 ? double(rng() % 5) : g(rng);
      y[i] = std::sin(3 * x(i, 0)) + 0.3 * g(rng);
    }
    TreeConfig cfg;
    cfg.max_depth = 1 + trial % 7;
    const auto t = RegressionTree::fit(x, y, cfg);
    EXPECT_LE(t.depth(), cfg.max_depth);
    std::map<std::size_t, std::vector<int>> routed;
    for (int i = 0; i < n; ++i) routed[t.leaf_of(x.row(i).transpose())].push_back(i);
    for (const auto& [leaf, rows] : routed) {
      double sum = 0;
      for (int i : rows) sum += y[i];
      EXPECT_EQ(t.nodes()[leaf].value, sum / double(rows.size()));
      for (int i : rows) EXPECT_EQ(t.predict(VectorXd(x.row(i).transpose())), sum / double(rows.size()));
    }
  }
}

TEST(Tree, SplitsReduceSquaredError) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0, 1);
  const int n = 200;
  RowMatrix<double> x(n, 2);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = g(rng), x(i, 1) = g(rng);
    y[i] = x(i, 0) * x(i, 1) + 0.1 * g(rng);
  }
  const auto t = RegressionTree::fit(x, y);
  // Every internal node's children have lower total squared error than the node itself.
  std::function<std::vector<int>(int, std::vector<int>)> check = [&](int node, std::vector<int> rows) {
    const auto& nd = t.nodes()[node];
    if (nd.leaf) return rows;
    std::vector<int> l, r;
    for (int i : rows) (x(i, nd.feature) <= nd.threshold ? l : r).push_back(i);
    auto sse = [&](const std::vector<int>& s) {
      double m = 0, e = 0;
      for (int i : s) m += y[i] / double(s.size());
      for (int i : s) e += (y[i] - m) * (y[i] - m);
      return e;
    };
    EXPECT_FALSE(l.empty());
    EXPECT_FALSE(r.empty());
    EXPECT_LT(sse(l) + sse(r), sse(rows));
    check(nd.left, l);
    check(nd.right, r);
    return rows;
  };
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  check(0, all);
}

TEST(Tree, CheckpointRoundTrip) {
  RowMatrix<double> x = RowMatrix<double>::Random(100, 3);
  std::vector<double> y(100);
  for (int i = 0; i < 100; ++i) y[i] = x(i, 0) * 3 - x(i, 2);
  auto t = RegressionTree::fit(x, y);
  t.mode = FeatureMode::kTextNetwork;
  std::stringstream buf;
  t.save(buf);
  const auto r = RegressionTree::load(buf);
  EXPECT_EQ(r.mode, FeatureMode::kTextNetwork);
  EXPECT_EQ(r.depth(), t.depth());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(r.predict(VectorXd(x.row(i).transpose())), t.predict(VectorXd(x.row(i).transpose())));
  std::stringstream again;
  r.save(again);
  EXPECT_EQ(again.str(), buf.str());
}

namespace {

struct FixedModel {
  std::map<QuestionId, double> out;
  double predict(const TimeGapSample& s) const { return out.at(s.pair.anchor); }
};

}  // namespace

TEST(PredictAndRank, LongestPredictedFirst) {
  const std::vector<TimeGapSample> samples{sample(1, VectorXd(), VectorXd(), 0.1), sample(2, VectorXd(), VectorXd(), 0.2),
                                           sample(3, VectorXd(), VectorXd(), 0.3)};
  const auto ranked = predict_and_rank(FixedModel{{{1, 2.0}, {2, 0.5}, {3, 3.1}}}, samples);
  std::vector<QuestionId> order;
  for (const auto& p : ranked) order.push_back(p.pair.anchor);
  EXPECT_EQ(order, (std::vector<QuestionId>{3, 1, 2}));
  EXPECT_EQ(ranked[0].gold, 0.3);
  EXPECT_EQ(predict_and_rank(FixedModel{{{1, 2.0}}}, {samples[0]}).size(), 1u);
  EXPECT_EQ(time_prediction_line(ranked[0]).substr(0, 7), "3\t1003\t");
}

TEST(PredictAndRank, InvariantUnderPowerOfTen) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TimeGapSample> samples;
    FixedModel logs, raw;
    for (QuestionId id = 1; id <= 30; ++id) {
      samples.push_back(sample(id, VectorXd(), VectorXd(), 0));
      logs.out[id] = std::round(g(rng) * 4) / 4;
      raw.out[id] = std::pow(10.0, logs.out[id]);
    }
    const auto a = predict_and_rank(logs, samples), b = predict_and_rank(raw, samples);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].pair.anchor, b[i].pair.anchor);
  }
}
