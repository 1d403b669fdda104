#pragma once

#include "dupq/corpus.hpp"
#include "dupq/features.hpp"
#include "dupq/optim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>

namespace dupq {

inline constexpr double kMinGapHours = 1e-3;

struct GapTarget {
  double hours = 0;   ///< raw (possibly non-positive) gap
  double target = 0;  ///< log10(max(hours, 1e-3))
  bool clamped = false;
};

/// Hours from the anchor's posting to the duplicate link, clamped below at
/// 1e-3 h, then log10.
GapTarget compute_gap(Timestamp anchor_created, Timestamp linked_at);
GapTarget compute_gap(const DuplicatePair& pair, const QuestionIndex& questions);

struct TimeGapSample {
  DuplicatePair pair;
  VectorXd q1;  ///< anchor features
  VectorXd q2;  ///< master features
  double target = 0;
};

struct TimeSamples {
  std::vector<TimeGapSample> train;
  std::vector<TimeGapSample> validation;
  std::vector<TimeGapSample> test;
  std::size_t clamped = 0;
};

/// Pairs whose anchor was posted before `test_start` train (the chronologically
/// latest `validation_fraction` of them validate); the rest test.
TimeSamples build_time_samples(const std::vector<DuplicatePair>& pairs, const QuestionIndex& questions,
                               const FeatureTable& features, Timestamp test_start, double validation_fraction = 0.25);

template <typename Scalar>
Scalar tanhshrink(Scalar x) {
  return x - std::tanh(x);
}

/// Two separately parameterised ReLU arms (in -> h1 -> h2), joined by a
/// linear unit with TanhShrink output.
template <typename Scalar>
struct TimeMlp {
  Matrix<Scalar> w1, w1b, w2, w2b;  ///< first / second layers for q1 and q2
  Vector<Scalar> b1, b1b, b2, b2b;
  Vector<Scalar> w_out;  ///< 2*h2
  Vector<Scalar> b_out;  ///< size 1

  int in_dim() const { return int(w1.cols()); }
  int hidden1() const { return int(w1.rows()); }
  int hidden2() const { return int(w1b.rows()); }

  static TimeMlp initialize(int in_dim, int hidden1, int hidden2, std::uint64_t seed) {
    if (in_dim <= 0 || hidden1 <= 0 || hidden2 <= 0) throw ConfigError("MLP sizes must be positive");
    std::mt19937_64 rng(seed);
    auto fill = [&](auto& m, int fan_in) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(fan_in)), 1.0 / std::sqrt(double(fan_in)));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(u(rng));
    };
    TimeMlp n;
    n.w1.resize(hidden1, in_dim), n.b1.resize(hidden1), n.w2.resize(hidden1, in_dim), n.b2.resize(hidden1);
    n.w1b.resize(hidden2, hidden1), n.b1b.resize(hidden2), n.w2b.resize(hidden2, hidden1), n.b2b.resize(hidden2);
    n.w_out.resize(2 * hidden2), n.b_out.resize(1);
    fill(n.w1, in_dim), fill(n.b1, in_dim), fill(n.w2, in_dim), fill(n.b2, in_dim);
    fill(n.w1b, hidden1), fill(n.b1b, hidden1), fill(n.w2b, hidden1), fill(n.b2b, hidden1);
    fill(n.w_out, 2 * hidden2), fill(n.b_out, 2 * hidden2);
    return n;
  }

  std::vector<ParamBlock<Scalar>> blocks() {
    return {as_block(w1), as_block(b1), as_block(w1b), as_block(b1b), as_block(w2),
            as_block(b2), as_block(w2b), as_block(b2b), as_block(w_out), as_block(b_out)};
  }
  std::vector<ConstParamBlock<Scalar>> blocks() const {
    return {as_block(w1), as_block(b1), as_block(w1b), as_block(b1b), as_block(w2),
            as_block(b2), as_block(w2b), as_block(b2b), as_block(w_out), as_block(b_out)};
  }
  std::vector<Eigen::Index> block_sizes() const {
    std::vector<Eigen::Index> out;
    for (const auto& b : blocks()) out.push_back(b.size());
    return out;
  }

  /// Output before TanhShrink, one per row of (x1, x2).
  Vector<Scalar> pre_activation(const Eigen::Ref<const RowMatrix<Scalar>>& x1,
                                const Eigen::Ref<const RowMatrix<Scalar>>& x2) const {
    RowMatrix<Scalar> joined(x1.rows(), 2 * hidden2());
    joined << arm(x1, w1, b1, w1b, b1b), arm(x2, w2, b2, w2b, b2b);
    return (joined * w_out).array() + b_out(0);
  }

  Vector<Scalar> predict(const Eigen::Ref<const RowMatrix<Scalar>>& x1,
                         const Eigen::Ref<const RowMatrix<Scalar>>& x2) const {
    return pre_activation(x1, x2).unaryExpr([](Scalar v) { return tanhshrink(v); });
  }

  Scalar predict_one(const Eigen::Ref<const Vector<Scalar>>& q1, const Eigen::Ref<const Vector<Scalar>>& q2) const {
    RowMatrix<Scalar> x1 = q1.transpose(), x2 = q2.transpose();
    return predict(x1, x2)(0);
  }

  static RowMatrix<Scalar> arm(const Eigen::Ref<const RowMatrix<Scalar>>& x, const Matrix<Scalar>& wa,
                               const Vector<Scalar>& ba, const Matrix<Scalar>& wb, const Vector<Scalar>& bb) {
    RowMatrix<Scalar> h = x * wa.transpose();
    h.rowwise() += ba.transpose();
    h = h.cwiseMax(Scalar(0));
    RowMatrix<Scalar> o = h * wb.transpose();
    o.rowwise() += bb.transpose();
    return o.cwiseMax(Scalar(0));
  }
};

/// Mean absolute error of the network over a batch; writes the gradient for
/// every parameter block (same layout as TimeMlp::blocks) when `grad` is set.
template <typename Scalar>
Scalar time_mlp_l1_loss(const TimeMlp<Scalar>& net, const Eigen::Ref<const RowMatrix<Scalar>>& x1,
                        const Eigen::Ref<const RowMatrix<Scalar>>& x2, const Eigen::Ref<const Vector<Scalar>>& target,
                        TimeMlp<Scalar>* grad = nullptr) {
  const Eigen::Index n = x1.rows();
  const int h2 = net.hidden2();

  auto forward_arm = [&](const auto& x, const auto& wa, const auto& ba, const auto& wb, const auto& bb,
                         RowMatrix<Scalar>& z1, RowMatrix<Scalar>& a1, RowMatrix<Scalar>& z2, RowMatrix<Scalar>& a2) {
    z1 = x * wa.transpose();
    z1.rowwise() += ba.transpose();
    a1 = z1.cwiseMax(Scalar(0));
    z2 = a1 * wb.transpose();
    z2.rowwise() += bb.transpose();
    a2 = z2.cwiseMax(Scalar(0));
  };
  RowMatrix<Scalar> z1a, a1a, z2a, a2a, z1b, a1b, z2b, a2b;
  forward_arm(x1, net.w1, net.b1, net.w1b, net.b1b, z1a, a1a, z2a, a2a);
  forward_arm(x2, net.w2, net.b2, net.w2b, net.b2b, z1b, a1b, z2b, a2b);
  RowMatrix<Scalar> joined(n, 2 * h2);
  joined << a2a, a2b;
  const Vector<Scalar> pre = (joined * net.w_out).array() + net.b_out(0);
  Vector<Scalar> out = pre.unaryExpr([](Scalar v) { return tanhshrink(v); });
  const Scalar loss = (out - target).cwiseAbs().mean();
  if (!grad) return loss;

  // dL/dy = sign(y - t) / n; TanhShrink' = tanh^2.
  Vector<Scalar> d_pre(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar diff = out(i) - target(i);
    const Scalar t = std::tanh(pre(i));
    d_pre(i) = Scalar((diff > 0) - (diff < 0)) / Scalar(n) * t * t;
  }
  grad->w_out = joined.transpose() * d_pre;
  grad->b_out = Vector<Scalar>::Constant(1, d_pre.sum());
  const RowMatrix<Scalar> d_joined = d_pre * net.w_out.transpose();

  auto backward_arm = [&](const auto& x, const RowMatrix<Scalar>& d_a2, const RowMatrix<Scalar>& z1,
                          const RowMatrix<Scalar>& a1, const RowMatrix<Scalar>& z2, const auto& wb, Matrix<Scalar>& gwa,
                          Vector<Scalar>& gba, Matrix<Scalar>& gwb, Vector<Scalar>& gbb) {
    const RowMatrix<Scalar> d_z2 = d_a2.cwiseProduct((z2.array() > Scalar(0)).template cast<Scalar>().matrix());
    gwb = d_z2.transpose() * a1;
    gbb = d_z2.colwise().sum().transpose();
    const RowMatrix<Scalar> d_a1 = d_z2 * wb;
    const RowMatrix<Scalar> d_z1 = d_a1.cwiseProduct((z1.array() > Scalar(0)).template cast<Scalar>().matrix());
    gwa = d_z1.transpose() * x;
    gba = d_z1.colwise().sum().transpose();
  };
  backward_arm(x1, d_joined.leftCols(h2), z1a, a1a, z2a, net.w1b, grad->w1, grad->b1, grad->w1b, grad->b1b);
  backward_arm(x2, d_joined.rightCols(h2), z1b, a1b, z2b, net.w2b, grad->w2, grad->b2, grad->w2b, grad->b2b);
  return loss;
}

struct TimeMlpModel {
  TimeMlp<double> net;
  FeatureMode mode = FeatureMode::kText;

  double predict(const TimeGapSample& s) const { return net.predict_one(s.q1, s.q2); }

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static TimeMlpModel load(std::istream& in);
  static TimeMlpModel load(const std::filesystem::path& path);
};

struct TimeMlpConfig {
  int hidden1 = 256;  ///< 512 in text+network mode
  int hidden2 = 64;
  int batch_size = 64;
  int epochs = 40;
  OptimizerConfig optimizer{OptimizerKind::kAdam, 2e-5, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 42;
};

/// Hidden sizes for a feature mode: (256, 64) for text, (512, 64) for text+network.
std::pair<int, int> default_hidden_sizes(FeatureMode mode);

struct TimeMlpTrainResult {
  TimeMlpModel model;
  std::vector<double> train_mae;
  std::vector<double> validation_mae;
  int best_epoch = 0;
};

/// L1 regression with mini-batches; keeps the epoch with the lowest
/// validation MAE (the last epoch without validation samples).
TimeMlpTrainResult train_time_mlp(const std::vector<TimeGapSample>& train, const std::vector<TimeGapSample>& validation,
                                  FeatureMode mode, const TimeMlpConfig& cfg);

struct TreeConfig {
  int max_depth = 7;
  int min_samples_split = 2;
};

/// CART regressor on squared error with exhaustive ("best") threshold search.
class RegressionTree {
 public:
  struct Node {
    bool leaf = true;
    int feature = -1;
    double threshold = 0;  ///< go left when x[feature] <= threshold
    double value = 0;      ///< leaf mean
    int left = -1;
    int right = -1;
  };

  static RegressionTree fit(const Eigen::Ref<const RowMatrix<double>>& x, std::span<const double> y,
                            TreeConfig cfg = {});

  double predict(const Eigen::Ref<const VectorXd>& x) const;
  /// Index into nodes() of the leaf `x` reaches.
  std::size_t leaf_of(const Eigen::Ref<const VectorXd>& x) const;
  int depth() const;
  int input_dim() const { return input_dim_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const TreeConfig& config() const { return cfg_; }

  FeatureMode mode = FeatureMode::kText;
  double predict(const TimeGapSample& s) const;

  /// Header line then preorder `split <feature> <threshold>` / `leaf <value>` lines.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static RegressionTree load(std::istream& in);
  static RegressionTree load(const std::filesystem::path& path);

 private:
  int grow(const Eigen::Ref<const RowMatrix<double>>& x, std::span<const double> y, std::vector<std::size_t> rows,
           int depth);
  int node_depth(int node) const;
  void write_preorder(std::ostream& out, int node) const;
  int read_preorder(std::istream& in);

  TreeConfig cfg_;
  int input_dim_ = 0;
  std::vector<Node> nodes_;
};

/// q1 ⊕ q2 rows for the tree.
RowMatrix<double> stack_pair_features(const std::vector<TimeGapSample>& samples);

RegressionTree train_time_tree(const std::vector<TimeGapSample>& samples, FeatureMode mode, TreeConfig cfg = {});

struct TimePrediction {
  DuplicatePair pair;
  double predicted = 0;
  double gold = 0;
};

/// Longest predicted confirmation first; equal predictions keep input order.
template <typename Model>
std::vector<TimePrediction> predict_and_rank(const Model& model, const std::vector<TimeGapSample>& samples) {
  std::vector<TimePrediction> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.pair, model.predict(s), s.target});
  std::stable_sort(out.begin(), out.end(),
                   [](const TimePrediction& a, const TimePrediction& b) { return a.predicted > b.predicted; });
  return out;
}

/// `anchor<TAB>master<TAB>predicted<TAB>gold`.
std::string time_prediction_line(const TimePrediction& p);

}  // namespace dupq
