#pragma once

#include "dupq/corpus.hpp"
#include "dupq/embed.hpp"
#include "dupq/features.hpp"
#include "dupq/optim.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>

namespace dupq {

// ---------------------------------------------------------------------------
// Siamese head

/// sigma(W x + b), shared by every arm.
template <typename Scalar>
struct SiameseHead {
  Matrix<Scalar> weight;  ///< out_dim x in_dim
  Vector<Scalar> bias;

  int in_dim() const { return int(weight.cols()); }
  int out_dim() const { return int(weight.rows()); }

  /// U(-1/sqrt(in), 1/sqrt(in)) for every parameter.
  static SiameseHead initialize(int in_dim, int out_dim, std::uint64_t seed) {
    if (in_dim <= 0 || out_dim <= 0) throw ConfigError("head dimensions must be positive");
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(double(in_dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    SiameseHead h;
    h.weight.resize(out_dim, in_dim);
    for (Eigen::Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = Scalar(u(rng));
    h.bias.resize(out_dim);
    for (Eigen::Index i = 0; i < h.bias.size(); ++i) h.bias(i) = Scalar(u(rng));
    return h;
  }

  template <typename Derived>
  Vector<Scalar> forward(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != weight.cols())
      throw ConfigError("head expects " + std::to_string(weight.cols()) + " inputs, got " +
                        std::to_string(x.size()));
    Vector<Scalar> z = weight * x + bias;
    return z.unaryExpr([](Scalar v) { return sigmoid(v); });
  }

  /// One output row per input row.
  RowMatrix<Scalar> forward_rows(const Eigen::Ref<const RowMatrix<Scalar>>& x) const {
    if (x.cols() != weight.cols()) throw ConfigError("head input dimension mismatch");
    RowMatrix<Scalar> z = x * weight.transpose();
    z.rowwise() += bias.transpose();
    return z.unaryExpr([](Scalar v) { return sigmoid(v); });
  }

  std::vector<ParamBlock<Scalar>> blocks() { return {as_block(weight), as_block(bias)}; }
  std::vector<Eigen::Index> block_sizes() const { return {weight.size(), bias.size()}; }
};

template <typename Scalar>
struct HeadGradient {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;

  static HeadGradient zeros_like(const SiameseHead<Scalar>& h) {
    return {Matrix<Scalar>::Zero(h.weight.rows(), h.weight.cols()), Vector<Scalar>::Zero(h.bias.size())};
  }
  std::vector<ConstParamBlock<Scalar>> blocks() const { return {as_block(weight), as_block(bias)}; }
};

/// ||a - b||_p.
template <typename Scalar, typename A, typename B>
Scalar pnorm_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, double degree) {
  if (degree == 2.0) return (a - b).norm();
  if (degree == 1.0) return (a - b).cwiseAbs().sum();
  return std::pow((a - b).cwiseAbs().array().pow(Scalar(degree)).sum(), Scalar(1.0 / degree));
}

/// d ||a - b||_p / d a; zero where the distance is zero.
template <typename Scalar, typename A, typename B>
Vector<Scalar> pnorm_distance_gradient(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                                       double degree) {
  Vector<Scalar> diff = a - b;
  const Scalar d = pnorm_distance<Scalar>(a, b, degree);
  if (d == Scalar(0)) return Vector<Scalar>::Zero(diff.size());
  if (degree == 1.0) return diff.unaryExpr([](Scalar v) { return Scalar((v > 0) - (v < 0)); });
  return diff.unaryExpr([&](Scalar v) {
    return Scalar((v > 0) - (v < 0)) * std::pow(std::abs(v), Scalar(degree - 1.0));
  }) / std::pow(d, Scalar(degree - 1.0));
}

/// max(d(a, p) - d(a, n) + margin, 0) with the p-norm distance of `degree`.
template <typename Scalar, typename A, typename P, typename N>
Scalar triplet_loss(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<N>& n,
                    double margin, double degree) {
  const Scalar v = pnorm_distance<Scalar>(a, p, degree) - pnorm_distance<Scalar>(a, n, degree) + Scalar(margin);
  return v > Scalar(0) ? v : Scalar(0);
}

/// Triplet loss of the head outputs for raw inputs (x_a, x_p, x_n). Adds
/// `scale` times the parameter gradient into `grad` when given.
template <typename Scalar>
Scalar head_triplet_loss(const SiameseHead<Scalar>& head, const Eigen::Ref<const Vector<Scalar>>& xa,
                         const Eigen::Ref<const Vector<Scalar>>& xp, const Eigen::Ref<const Vector<Scalar>>& xn,
                         double margin, double degree, HeadGradient<Scalar>* grad = nullptr,
                         Scalar scale = Scalar(1)) {
  const Vector<Scalar> ha = head.forward(xa), hp = head.forward(xp), hn = head.forward(xn);
  const Scalar loss = triplet_loss<Scalar>(ha, hp, hn, margin, degree);
  if (!grad || loss <= Scalar(0)) return loss;

  const Vector<Scalar> g_ap = pnorm_distance_gradient<Scalar>(ha, hp, degree);
  const Vector<Scalar> g_an = pnorm_distance_gradient<Scalar>(ha, hn, degree);
  // dL/dh for each arm, then through sigma' = h (1 - h).
  const Vector<Scalar> da = (g_ap - g_an).cwiseProduct(ha.cwiseProduct((Scalar(1) - ha.array()).matrix()));
  const Vector<Scalar> dp = (-g_ap).cwiseProduct(hp.cwiseProduct((Scalar(1) - hp.array()).matrix()));
  const Vector<Scalar> dn = g_an.cwiseProduct(hn.cwiseProduct((Scalar(1) - hn.array()).matrix()));
  grad->weight.noalias() += scale * (da * xa.transpose() + dp * xp.transpose() + dn * xn.transpose());
  grad->bias += scale * (da + dp + dn);
  return loss;
}

enum class ScoreFunction { kNegativeDistance, kCosine };
ScoreFunction parse_score_function(const std::string& name);
std::string to_string(ScoreFunction s);

/// A trained head with the settings needed to score with it.
struct HeadModel {
  SiameseHead<double> head;
  double norm_degree = 2.0;
  double margin = 1.0;
  FeatureMode mode = FeatureMode::kText;
  ScoreFunction score = ScoreFunction::kNegativeDistance;

  /// Higher is more likely a duplicate.
  double similarity(const Eigen::Ref<const VectorXd>& anchor_out, const Eigen::Ref<const VectorXd>& cand_out) const;

  /// Header line `siamese_head in_dim=.. out_dim=.. norm_degree=.. margin=..
  /// feature_mode=.. score=..`, then W row by row, then b on one line.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static HeadModel load(std::istream& in);
  static HeadModel load(const std::filesystem::path& path);
};

/// head_forward: sigma(W [title ⊕ body (⊕ tag)] + b) for one feature row.
VectorXd head_forward(const Eigen::Ref<const VectorXd>& features, const HeadModel& model);

// ---------------------------------------------------------------------------
// Buckets and hard negatives

struct Bucket {
  std::size_t id = 0;
  std::vector<QuestionId> members;  ///< ascending
  VectorXd centroid;                ///< mean of members' title ⊕ body rows
};

/// Connected components of the pair graph, numbered by smallest member.
/// Centroids are filled when `features` is given.
std::vector<Bucket> build_buckets(const std::vector<DuplicatePair>& pairs, const FeatureTable* features = nullptr);

/// Cosine similarity of bucket centroids; the diagonal is 1 and a zero
/// centroid has similarity 0 against every other bucket.
MatrixXd bucket_similarity(const std::vector<Bucket>& buckets);

struct Triplet {
  QuestionId anchor = 0;
  QuestionId positive = 0;
  QuestionId negative = 0;
};

struct NegativeSample {
  QuestionId id = 0;
  bool fallback = false;
};

/// Hard-negative sampling over buckets. For an anchor in bucket b_a, scans
/// every other bucket with similarity above alpha (highest first), collects
/// answered members with their tag Jaccard against the anchor, and returns
/// the maximum (ties: higher bucket similarity, then smaller id). Falls back
/// to a uniform draw from `fallback_pool` minus b_a.
class NegativeSampler {
 public:
  NegativeSampler(std::vector<Bucket> buckets, const QuestionIndex& questions, std::vector<QuestionId> fallback_pool,
                  double alpha);

  const std::vector<Bucket>& buckets() const { return buckets_; }
  std::optional<std::size_t> bucket_of(QuestionId id) const;
  /// Row of the bucket similarity matrix, computed on demand.
  VectorXd similarity_row(std::size_t bucket) const;
  MatrixXd similarity_matrix() const;

  /// Throws std::invalid_argument if the anchor is in no bucket and
  /// std::runtime_error if no negative exists at all.
  NegativeSample sample(QuestionId anchor, std::mt19937_64& rng) const;
  std::size_t fallback_count() const { return fallbacks_; }

 private:
  struct Member {
    QuestionId id;
    bool answered;
    std::vector<std::string> tags;
  };
  std::vector<Bucket> buckets_;
  std::vector<std::vector<Member>> members_;
  std::unordered_map<QuestionId, std::size_t> bucket_of_;
  RowMatrix<double> unit_centroids_;
  const QuestionIndex* questions_;
  std::vector<QuestionId> fallback_pool_;
  double alpha_;
  mutable std::size_t fallbacks_ = 0;
};

/// One triplet per pair: (anchor, master, sampled negative).
std::vector<Triplet> make_triplets(const std::vector<DuplicatePair>& pairs, const NegativeSampler& sampler,
                                   std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Candidates and ranking

struct CandidateFilter {
  double min_tag_jaccard = 0.15;   ///< strict
  double min_title_cosine = 0.27;  ///< inclusive
};

struct Candidate {
  QuestionId id = 0;
  double tag_jaccard = 0;
  double title_cosine = 0;
};

struct CandidateSet {
  QuestionId anchor = 0;
  std::vector<Candidate> candidates;  ///< ascending id

  bool contains(QuestionId id) const;
  std::vector<QuestionId> ids() const;
};

double cosine_similarity(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b);

/// Older questions sharing a tag with the anchor, kept when tag Jaccard >
/// 0.15, answered, and title cosine >= 0.27.
class CandidateGenerator {
 public:
  CandidateGenerator(const std::vector<QuestionRecord>& pool, const FeatureTable& features,
                     CandidateFilter filter = {});

  CandidateSet generate(const QuestionRecord& anchor, const Eigen::Ref<const VectorXd>& anchor_title) const;
  /// Anchor taken from the pool's feature table.
  CandidateSet generate(const QuestionRecord& anchor) const;

 private:
  const std::vector<QuestionRecord>* pool_;
  const FeatureTable* features_;
  CandidateFilter filter_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_tag_;
  std::vector<std::vector<std::string>> tag_sets_;
  RowMatrix<double> unit_titles_;
};

struct RankedCandidate {
  QuestionId id = 0;
  double score = 0;
};

struct RankedList {
  QuestionId anchor = 0;
  std::vector<RankedCandidate> entries;
  std::optional<std::size_t> gold_rank;  ///< 1-based
};

/// Sorts by descending score; ties go to the older question, then the
/// smaller id. Records the gold's rank when present.
RankedList rank_by_score(QuestionId anchor, std::vector<RankedCandidate> scored, const QuestionIndex& questions,
                         std::optional<QuestionId> gold);

/// Scores every candidate against the anchor through the head.
RankedList rank_candidates(QuestionId anchor, const Eigen::Ref<const VectorXd>& anchor_features,
                           const CandidateSet& set, const FeatureTable& features, const HeadModel& model,
                           const QuestionIndex& questions, std::optional<QuestionId> gold);

/// `anchor<TAB>gold_rank_or_-1<TAB>id,id,...` (top k).
std::string ranked_line(const RankedList& list, std::size_t top_k);

// ---------------------------------------------------------------------------
// Training

struct HeadTrainConfig {
  int out_dim = 512;
  int epochs = 40;
  int batch_size = 64;
  OptimizerConfig optimizer{};
  double margin = 1.0;
  double norm_degree = 2.0;
  ScoreFunction score = ScoreFunction::kNegativeDistance;
  std::uint64_t seed = 42;
  unsigned threads = 1;
};

/// A validation anchor with its gold duplicate and candidate ids.
struct ValidationQuery {
  QuestionId anchor = 0;
  QuestionId gold = 0;
  std::vector<QuestionId> candidates;
};

using TripletProvider = std::function<std::vector<Triplet>(int epoch)>;

struct HeadTrainResult {
  HeadModel model;
  std::vector<double> epoch_loss;
  std::vector<double> validation_mrr;  ///< per epoch; empty without validation queries
  int best_epoch = 0;                  ///< 1-based
};

/// Minimises mean triplet loss over mini-batches; triplets are requested
/// afresh every epoch and shuffled. Keeps the epoch with the best validation
/// MRR (the last epoch when there are no validation queries).
HeadTrainResult train_head(const TripletProvider& triplets, const FeatureTable& features,
                           const std::vector<ValidationQuery>& validation, const QuestionIndex& questions,
                           const HeadTrainConfig& cfg);

/// Mean triplet loss over stacked (anchor, positive, negative) rows; writes
/// the gradient of that mean into `grad`.
double batch_triplet_loss(const SiameseHead<double>& head, const RowMatrix<double>& xa, const RowMatrix<double>& xp,
                          const RowMatrix<double>& xn, double margin, double degree, HeadGradient<double>& grad);

/// MRR of `model` over the queries (gold outside the candidates counts 0).
double evaluate_head_mrr(const HeadModel& model, const FeatureTable& features,
                         const std::vector<ValidationQuery>& queries, const QuestionIndex& questions,
                         unsigned threads = 1);

}  // namespace dupq
