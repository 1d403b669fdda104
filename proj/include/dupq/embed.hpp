#pragma once

#include "dupq/corpus.hpp"
#include "dupq/types.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dupq {

/// id -> dense vector of a fixed dimension. Text format: a `<count> <dim>`
/// header, then `<id> <v1> ... <vD>` per line.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(int dimension);

  int dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  /// Throws FormatError on a repeated id, bad id, wrong length or non-finite value.
  void insert(const std::string& id, const Eigen::Ref<const VectorXd>& v);
  std::optional<Eigen::Map<const VectorXd>> find(const std::string& id) const;
  Eigen::Map<const VectorXd> at(const std::string& id) const;
  Eigen::Map<const VectorXd> row(std::size_t i) const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(std::istream& in, const std::string& source = "<stream>");
  static EmbeddingStore load(const std::filesystem::path& path);

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dimension_ == b.dimension_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  int dimension_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

/// Item -> index with exact unigram counts, ordered by descending count then
/// lexicographically.
struct Vocabulary {
  std::vector<std::string> items;
  std::vector<std::uint64_t> counts;
  std::unordered_map<std::string, std::uint32_t> index;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::optional<std::uint32_t> find(const std::string& item) const;
};

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sequences, int min_count);

struct SgnsConfig {
  int dimension = 64;
  int window = 10;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  int min_count = 3;
  /// Accepted for parity with gensim-style settings; has no effect on training.
  int batch_words = 5;
  std::uint64_t seed = 42;
  /// Lock-free parallel updates when threads > 1; output is then not reproducible.
  unsigned threads = 1;

  void validate() const;
};

/// log sigma(x) without overflow.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  return x >= Scalar(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
struct SgnsGradient {
  Vector<Scalar> center;
  Vector<Scalar> context;
  Matrix<Scalar> negatives;  ///< one row per negative
};

/// Per-pair skip-gram objective log sigma(u.v) + sum_k log sigma(-n_k.v), with
/// v the centre (input) vector, u the context (output) vector and n_k the rows
/// of `negatives`. Fills the ascent gradient when `grad` is non-null.
template <typename Scalar>
Scalar sgns_pair_objective(const Eigen::Ref<const Vector<Scalar>>& center,
                           const Eigen::Ref<const Vector<Scalar>>& context,
                           const Eigen::Ref<const Matrix<Scalar>>& negatives,
                           SgnsGradient<Scalar>* grad = nullptr) {
  const Scalar pos = context.dot(center);
  Scalar objective = log_sigmoid(pos);
  const Vector<Scalar> neg_scores = negatives * center;
  for (Eigen::Index k = 0; k < neg_scores.size(); ++k) objective += log_sigmoid(-neg_scores(k));
  if (grad) {
    const Scalar g_pos = Scalar(1) - sigmoid(pos);
    Vector<Scalar> g_neg(neg_scores.size());
    for (Eigen::Index k = 0; k < neg_scores.size(); ++k) g_neg(k) = -sigmoid(neg_scores(k));
    grad->center = g_pos * context + negatives.transpose() * g_neg;
    grad->context = g_pos * center;
    grad->negatives = g_neg * center.transpose();
  }
  return objective;
}

/// Both embedding matrices plus the per-epoch mean pair objective.
struct SgnsModel {
  Vocabulary vocab;
  RowMatrix<double> input;   ///< centre vectors
  RowMatrix<double> output;  ///< context vectors
  std::vector<double> epoch_objective;

  EmbeddingStore to_store() const;
};

/// Skip-gram with negative sampling over arbitrary item sequences (tokens or
/// graph walks). Negatives follow unigram^0.75; the learning rate decays
/// linearly to 1e-4 of its initial value. Single-threaded runs are
/// reproducible for a given seed.
SgnsModel train_sgns(const std::vector<std::vector<std::string>>& sequences, const SgnsConfig& cfg);

/// Mean of the in-vocabulary token vectors; zeros when none are known.
VectorXd encode_field(const TokenSequence& tokens, const EmbeddingStore& token_store);

struct FieldVectors {
  VectorXd title;
  VectorXd body;
};

/// Produces (title, body) vectors for a question.
class QuestionEncoder {
 public:
  virtual ~QuestionEncoder() = default;
  virtual int title_dim() const = 0;
  virtual int body_dim() const = 0;
  virtual FieldVectors encode(const QuestionRecord& record) const = 0;
  virtual std::string name() const = 0;
};

/// Mean-pooled corpus-trained token vectors.
class Word2VecEncoder final : public QuestionEncoder {
 public:
  explicit Word2VecEncoder(std::shared_ptr<const EmbeddingStore> tokens);
  int title_dim() const override { return tokens_->dimension(); }
  int body_dim() const override { return tokens_->dimension(); }
  FieldVectors encode(const QuestionRecord& record) const override;
  std::string name() const override { return "word2vec"; }

 private:
  std::shared_ptr<const EmbeddingStore> tokens_;
};

/// Externally computed field vectors keyed `<id>#title` and `<id>#body`.
class PrecomputedEncoder final : public QuestionEncoder {
 public:
  explicit PrecomputedEncoder(std::shared_ptr<const EmbeddingStore> fields);
  int title_dim() const override { return fields_->dimension(); }
  int body_dim() const override { return fields_->dimension(); }
  /// Throws std::out_of_range when the question has no stored vectors.
  FieldVectors encode(const QuestionRecord& record) const override;
  std::string name() const override { return "precomputed"; }

 private:
  std::shared_ptr<const EmbeddingStore> fields_;
};

std::string title_key(QuestionId id);
std::string body_key(QuestionId id);

}  // namespace dupq
