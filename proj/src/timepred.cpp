#include "dupq/timepred.hpp"

#include "dupq/time.hpp"
#include "checkpoint_io.hpp"

#include <fstream>
#include <numeric>

namespace dupq {

using namespace detail;

GapTarget compute_gap(Timestamp anchor_created, Timestamp linked_at) {
  GapTarget g;
  g.hours = hours_between(anchor_created, linked_at);
  g.clamped = g.hours < kMinGapHours;
  g.target = std::log10(std::max(g.hours, kMinGapHours));
  return g;
}

GapTarget compute_gap(const DuplicatePair& pair, const QuestionIndex& questions) {
  return compute_gap(questions.at(pair.anchor).created_at, pair.linked_at);
}

TimeSamples build_time_samples(const std::vector<DuplicatePair>& pairs, const QuestionIndex& questions,
                               const FeatureTable& features, Timestamp test_start, double validation_fraction) {
  if (validation_fraction < 0 || validation_fraction >= 1) throw ConfigError("validation fraction must be in [0, 1)");
  TimeSamples out;
  std::vector<TimeGapSample> train;
  for (const auto& p : pairs) {
    if (!questions.find(p.anchor) || !features.contains(p.anchor) || !features.contains(p.master)) continue;
    const auto gap = compute_gap(p, questions);
    out.clamped += gap.clamped;
    TimeGapSample s{p, features.row(p.anchor).transpose(), features.row(p.master).transpose(), gap.target};
    (questions.at(p.anchor).created_at < test_start ? train : out.test).push_back(std::move(s));
  }
  std::stable_sort(train.begin(), train.end(), [&](const TimeGapSample& a, const TimeGapSample& b) {
    const auto ta = questions.at(a.pair.anchor).created_at, tb = questions.at(b.pair.anchor).created_at;
    return ta != tb ? ta < tb : a.pair.anchor < b.pair.anchor;
  });
  const auto n_val = std::size_t(std::floor(double(train.size()) * validation_fraction));
  const auto cut = train.size() - n_val;
  out.train.assign(std::make_move_iterator(train.begin()), std::make_move_iterator(train.begin() + long(cut)));
  out.validation.assign(std::make_move_iterator(train.begin() + long(cut)), std::make_move_iterator(train.end()));
  return out;
}

std::pair<int, int> default_hidden_sizes(FeatureMode mode) {
  return mode == FeatureMode::kTextNetwork ? std::pair{512, 64} : std::pair{256, 64};
}

namespace {

struct StackedSamples {
  RowMatrix<double> x1, x2;
  VectorXd y;
};

StackedSamples stack(const std::vector<TimeGapSample>& samples, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end) {
  StackedSamples s;
  const auto n = Eigen::Index(end - begin);
  const auto d = samples[order[begin]].q1.size();
  s.x1.resize(n, d), s.x2.resize(n, d), s.y.resize(n);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& src = samples[order[i]];
    s.x1.row(Eigen::Index(i - begin)) = src.q1.transpose();
    s.x2.row(Eigen::Index(i - begin)) = src.q2.transpose();
    s.y(Eigen::Index(i - begin)) = src.target;
  }
  return s;
}

double mean_abs_error(const TimeMlp<double>& net, const std::vector<TimeGapSample>& samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  auto s = stack(samples, order, 0, samples.size());
  return time_mlp_l1_loss<double>(net, s.x1, s.x2, s.y);
}

}  // namespace

TimeMlpTrainResult train_time_mlp(const std::vector<TimeGapSample>& train, const std::vector<TimeGapSample>& validation,
                                  FeatureMode mode, const TimeMlpConfig& cfg) {
  if (train.empty()) throw ConfigError("no training samples for the time model");
  if (cfg.batch_size <= 0 || cfg.epochs <= 0) throw ConfigError("batch size and epochs must be positive");
  const int in_dim = int(train.front().q1.size());
  for (const auto& s : train)
    if (s.q1.size() != in_dim || s.q2.size() != in_dim) throw ConfigError("inconsistent time-model feature sizes");

  TimeMlpTrainResult result;
  result.model.mode = mode;
  result.model.net = TimeMlp<double>::initialize(in_dim, cfg.hidden1, cfg.hidden2, cfg.seed);
  auto& net = result.model.net;
  Optimizer<double> opt(cfg.optimizer, net.block_sizes());
  TimeMlp<double> grad = net;
  TimeMlp<double> best = net;
  double best_val = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(cfg.seed ^ 0x7100d1e5ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t b = 0; b < order.size(); b += std::size_t(cfg.batch_size)) {
      const auto e = std::min(order.size(), b + std::size_t(cfg.batch_size));
      auto batch = stack(train, order, b, e);
      total += time_mlp_l1_loss<double>(net, batch.x1, batch.x2, batch.y, &grad) * double(e - b);
      const auto& cg = grad;
      opt.step(net.blocks(), cg.blocks());
    }
    result.train_mae.push_back(total / double(train.size()));
    if (!validation.empty()) {
      const double v = mean_abs_error(net, validation);
      result.validation_mae.push_back(v);
      if (v < best_val) {
        best_val = v;
        best = net;
        result.best_epoch = epoch;
      }
    }
  }
  if (!validation.empty()) {
    net = best;
  } else {
    result.best_epoch = cfg.epochs - 1;
  }
  return result;
}

// ---------------------------------------------------------------------------
// MLP checkpoints

void TimeMlpModel::save(std::ostream& out) const {
  out << "time_mlp in_dim=" << net.in_dim() << " hidden1=" << net.hidden1() << " hidden2=" << net.hidden2()
      << " feature_mode=" << to_string(mode) << '\n';
  auto write_matrix = [&](const Matrix<double>& m) {
    const RowMatrix<double> r = m;
    for (Eigen::Index i = 0; i < r.rows(); ++i) write_doubles(out, r.data() + i * r.cols(), r.cols());
  };
  auto write_vector = [&](const VectorXd& v) { write_doubles(out, v.data(), v.size()); };
  write_matrix(net.w1), write_vector(net.b1), write_matrix(net.w1b), write_vector(net.b1b);
  write_matrix(net.w2), write_vector(net.b2), write_matrix(net.w2b), write_vector(net.b2b);
  write_vector(net.w_out), write_vector(net.b_out);
}

void TimeMlpModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  save(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TimeMlpModel TimeMlpModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty time-model checkpoint");
  auto h = parse_header(line, "time_mlp");
  const int in_dim = int(parse_double(header_field(h, "in_dim")));
  const int h1 = int(parse_double(header_field(h, "hidden1")));
  const int h2 = int(parse_double(header_field(h, "hidden2")));
  if (in_dim <= 0 || h1 <= 0 || h2 <= 0) throw FormatError("time-model sizes must be positive");
  TimeMlpModel m;
  m.mode = parse_feature_mode(header_field(h, "feature_mode"));
  auto read_matrix = [&](Matrix<double>& dst, int rows, int cols, const std::string& what) {
    RowMatrix<double> r(rows, cols);
    for (int i = 0; i < rows; ++i) read_doubles(in, r.data() + Eigen::Index(i) * cols, cols, what + " row " + std::to_string(i));
    dst = r;
  };
  auto read_vector = [&](VectorXd& dst, int n, const std::string& what) {
    dst.resize(n);
    read_doubles(in, dst.data(), n, what);
  };
  auto& n = m.net;
  read_matrix(n.w1, h1, in_dim, "W1"), read_vector(n.b1, h1, "b1");
  read_matrix(n.w1b, h2, h1, "W1'"), read_vector(n.b1b, h2, "b1'");
  read_matrix(n.w2, h1, in_dim, "W2"), read_vector(n.b2, h1, "b2");
  read_matrix(n.w2b, h2, h1, "W2'"), read_vector(n.b2b, h2, "b2'");
  read_vector(n.w_out, 2 * h2, "w_out"), read_vector(n.b_out, 1, "b_out");
  return m;
}

TimeMlpModel TimeMlpModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return load(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Regression tree

RegressionTree RegressionTree::fit(const Eigen::Ref<const RowMatrix<double>>& x, std::span<const double> y,
                                   TreeConfig cfg) {
  if (x.rows() == 0 || std::size_t(x.rows()) != y.size()) throw ConfigError("tree needs matching non-empty X and y");
  if (cfg.max_depth < 0 || cfg.min_samples_split < 2) throw ConfigError("invalid tree configuration");
  RegressionTree t;
  t.cfg_ = cfg;
  t.input_dim_ = int(x.cols());
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), 0);
  t.grow(x, y, std::move(rows), 0);
  return t;
}

int RegressionTree::grow(const Eigen::Ref<const RowMatrix<double>>& x, std::span<const double> y,
                         std::vector<std::size_t> rows, int depth) {
  std::sort(rows.begin(), rows.end());
  const int id = int(nodes_.size());
  nodes_.emplace_back();
  double sum = 0, sq = 0;
  for (auto r : rows) sum += y[r], sq += y[r] * y[r];
  const double n = double(rows.size());
  nodes_[std::size_t(id)].value = sum / n;
  const double parent_sse = sq - sum * sum / n;

  if (depth >= cfg_.max_depth || rows.size() < std::size_t(cfg_.min_samples_split) || parent_sse <= 0) return id;

  double best_sse = std::numeric_limits<double>::infinity();
  int best_f = -1;
  double best_t = 0;
  std::vector<std::size_t> sorted = rows;
  for (int f = 0; f < x.cols(); ++f) {
    std::stable_sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return x(Eigen::Index(a), f) < x(Eigen::Index(b), f); });
    double ls = 0, lq = 0;
    for (std::size_t k = 1; k < sorted.size(); ++k) {
      const double yv = y[sorted[k - 1]];
      ls += yv, lq += yv * yv;
      const double lo = x(Eigen::Index(sorted[k - 1]), f), hi = x(Eigen::Index(sorted[k]), f);
      if (!(lo < hi)) continue;
      const double nl = double(k), nr = n - nl;
      const double rs = sum - ls, rq = sq - lq;
      const double sse = (lq - ls * ls / nl) + (rq - rs * rs / nr);
      double thr = lo + (hi - lo) / 2;
      if (!(thr < hi)) thr = lo;
      // Strict improvement keeps the first feature and the smallest threshold on ties.
      if (sse < best_sse) best_sse = sse, best_f = f, best_t = thr;
    }
  }
  if (best_f < 0 || !(best_sse < parent_sse)) return id;

  std::vector<std::size_t> left, right;
  for (auto r : rows) (x(Eigen::Index(r), best_f) <= best_t ? left : right).push_back(r);
  nodes_[std::size_t(id)].leaf = false;
  nodes_[std::size_t(id)].feature = best_f;
  nodes_[std::size_t(id)].threshold = best_t;
  const int l = grow(x, y, std::move(left), depth + 1);
  nodes_[std::size_t(id)].left = l;
  const int r = grow(x, y, std::move(right), depth + 1);
  nodes_[std::size_t(id)].right = r;
  return id;
}

std::size_t RegressionTree::leaf_of(const Eigen::Ref<const VectorXd>& x) const {
  if (nodes_.empty()) throw std::logic_error("empty regression tree");
  if (x.size() != input_dim_) throw std::invalid_argument("tree input has wrong dimension");
  std::size_t i = 0;
  while (!nodes_[i].leaf) i = std::size_t(x(nodes_[i].feature) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right);
  return i;
}

double RegressionTree::predict(const Eigen::Ref<const VectorXd>& x) const { return nodes_[leaf_of(x)].value; }

double RegressionTree::predict(const TimeGapSample& s) const {
  VectorXd joined(s.q1.size() + s.q2.size());
  joined << s.q1, s.q2;
  return predict(joined);
}

int RegressionTree::node_depth(int node) const {
  const auto& n = nodes_[std::size_t(node)];
  if (n.leaf) return 0;
  return 1 + std::max(node_depth(n.left), node_depth(n.right));
}

int RegressionTree::depth() const { return nodes_.empty() ? 0 : node_depth(0); }

void RegressionTree::write_preorder(std::ostream& out, int node) const {
  const auto& n = nodes_[std::size_t(node)];
  if (n.leaf) {
    out << "leaf " << fmt(n.value) << '\n';
    return;
  }
  out << "split " << n.feature << ' ' << fmt(n.threshold) << ' ' << fmt(n.value) << '\n';
  write_preorder(out, n.left);
  write_preorder(out, n.right);
}

void RegressionTree::save(std::ostream& out) const {
  out << "time_tree in_dim=" << input_dim_ << " max_depth=" << cfg_.max_depth
      << " min_samples_split=" << cfg_.min_samples_split << " nodes=" << nodes_.size()
      << " feature_mode=" << to_string(mode) << '\n';
  if (!nodes_.empty()) write_preorder(out, 0);
}

void RegressionTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  save(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

int RegressionTree::read_preorder(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("truncated tree at node " + std::to_string(nodes_.size()));
  std::istringstream fields(line);
  std::string kind;
  fields >> kind;
  const int id = int(nodes_.size());
  nodes_.emplace_back();
  if (kind == "leaf") {
    std::string v;
    if (!(fields >> v)) throw FormatError("leaf without a value");
    nodes_.back().value = parse_double(v);
    return id;
  }
  if (kind != "split") throw FormatError("unknown tree node '" + kind + "'");
  std::string f, t, v;
  if (!(fields >> f >> t)) throw FormatError("split needs a feature and a threshold");
  const int feature = int(parse_double(f));
  if (feature < 0 || feature >= input_dim_) throw FormatError("split feature out of range");
  nodes_[std::size_t(id)].leaf = false;
  nodes_[std::size_t(id)].feature = feature;
  nodes_[std::size_t(id)].threshold = parse_double(t);
  if (fields >> v) nodes_[std::size_t(id)].value = parse_double(v);
  const int l = read_preorder(in);
  nodes_[std::size_t(id)].left = l;
  const int r = read_preorder(in);
  nodes_[std::size_t(id)].right = r;
  return id;
}

RegressionTree RegressionTree::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty tree checkpoint");
  auto h = parse_header(line, "time_tree");
  RegressionTree t;
  t.input_dim_ = int(parse_double(header_field(h, "in_dim")));
  t.cfg_.max_depth = int(parse_double(header_field(h, "max_depth")));
  t.cfg_.min_samples_split = int(parse_double(header_field(h, "min_samples_split")));
  t.mode = parse_feature_mode(header_field(h, "feature_mode"));
  const auto expected = std::size_t(parse_double(header_field(h, "nodes")));
  if (t.input_dim_ <= 0) throw FormatError("tree input dimension must be positive");
  if (expected) t.read_preorder(in);
  if (t.nodes_.size() != expected) throw FormatError("tree node count does not match header");
  return t;
}

RegressionTree RegressionTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return load(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

RowMatrix<double> stack_pair_features(const std::vector<TimeGapSample>& samples) {
  if (samples.empty()) return {};
  const auto d = samples.front().q1.size();
  RowMatrix<double> x(Eigen::Index(samples.size()), 2 * d);
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(Eigen::Index(i)) << samples[i].q1.transpose(), samples[i].q2.transpose();
  return x;
}

RegressionTree train_time_tree(const std::vector<TimeGapSample>& samples, FeatureMode mode, TreeConfig cfg) {
  if (samples.empty()) throw ConfigError("no training samples for the time model");
  const auto x = stack_pair_features(samples);
  std::vector<double> y;
  for (const auto& s : samples) y.push_back(s.target);
  auto tree = RegressionTree::fit(x, y, cfg);
  tree.mode = mode;
  return tree;
}

std::string time_prediction_line(const TimePrediction& p) {
  return std::to_string(p.pair.anchor) + '\t' + std::to_string(p.pair.master) + '\t' + fmt(p.predicted) + '\t' +
         fmt(p.gold);
}

}  // namespace dupq
