#include "dupq/embed.hpp"

#include "dupq/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace dupq {

EmbeddingStore::EmbeddingStore(int dimension) : dimension_(dimension) {
  if (dimension <= 0) throw ConfigError("embedding dimension must be positive");
}

void EmbeddingStore::insert(const std::string& id, const Eigen::Ref<const VectorXd>& v) {
  if (id.empty() || std::any_of(id.begin(), id.end(), [](unsigned char c) { return std::isspace(c); }))
    throw FormatError("embedding id must be non-empty without whitespace: '" + id + "'");
  if (v.size() != dimension_)
    throw FormatError("vector for '" + id + "' has " + std::to_string(v.size()) +
                      " components, store dimension is " + std::to_string(dimension_));
  if (!v.allFinite()) throw FormatError("vector for '" + id + "' has non-finite components");
  if (!index_.emplace(id, ids_.size()).second) throw FormatError("repeated embedding id '" + id + "'");
  ids_.push_back(id);
  data_.insert(data_.end(), v.data(), v.data() + v.size());
}

std::optional<Eigen::Map<const VectorXd>> EmbeddingStore::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

Eigen::Map<const VectorXd> EmbeddingStore::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("no embedding for '" + id + "'");
  return row(it->second);
}

Eigen::Map<const VectorXd> EmbeddingStore::row(std::size_t i) const {
  return Eigen::Map<const VectorXd>(data_.data() + i * std::size_t(dimension_), dimension_);
}

void EmbeddingStore::save(std::ostream& out) const {
  out << ids_.size() << ' ' << dimension_ << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    out << ids_[i];
    const double* v = data_.data() + i * std::size_t(dimension_);
    for (int d = 0; d < dimension_; ++d) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v[d]);
      out << ' ' << std::string_view(buf, std::size_t(ptr - buf));
    }
    out << '\n';
  }
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  save(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

EmbeddingStore EmbeddingStore::load(std::istream& in, const std::string& source) {
  auto fail = [&](std::size_t line, const std::string& what) {
    return FormatError(source + ": line " + std::to_string(line) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing `<count> <dimension>` header");
  std::istringstream header(line);
  long long count = -1, dim = -1;
  std::string extra;
  if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim <= 0)
    throw fail(1, "malformed header, expected `<count> <dimension>`");

  EmbeddingStore store{int(dim)};
  VectorXd v(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (store.size() == std::size_t(count)) throw fail(lineno, "more vectors than declared in header");
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ') ++pos;
      if (pos > start) fields.emplace_back(line.data() + start, pos - start);
    }
    if ((long long)fields.size() - 1 != dim)
      throw fail(lineno, "expected " + std::to_string(dim) + " components, got " +
                             std::to_string(long(fields.size()) - 1));
    for (long long d = 0; d < dim; ++d) {
      auto f = fields[std::size_t(d + 1)];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v(d));
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v(d)))
        throw fail(lineno, "bad component '" + std::string(f) + "'");
    }
    try {
      store.insert(std::string(fields[0]), v);
    } catch (const FormatError& e) {
      throw fail(lineno, e.what());
    }
  }
  if (store.size() != std::size_t(count))
    throw fail(lineno, "header declares " + std::to_string(count) + " vectors, found " +
                           std::to_string(store.size()));
  return store;
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return load(in, path.string());
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& item) const {
  auto it = index.find(item);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sequences, int min_count) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& seq : sequences)
    for (const auto& item : seq) ++counts[item];
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [item, n] : counts)
    if (n >= std::uint64_t(std::max(min_count, 0))) kept.emplace_back(item, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [item, n] : kept) {
    v.index.emplace(item, std::uint32_t(v.items.size()));
    v.items.push_back(item);
    v.counts.push_back(n);
  }
  return v;
}

void SgnsConfig::validate() const {
  if (dimension <= 0) throw ConfigError("sgns dimension must be positive");
  if (window <= 0 || negatives <= 0 || epochs <= 0 || min_count <= 0 || batch_words <= 0)
    throw ConfigError("sgns window, negatives, epochs, min_count and batch_words must be positive");
  if (!(learning_rate > 0)) throw ConfigError("sgns learning_rate must be positive");
}

EmbeddingStore SgnsModel::to_store() const {
  EmbeddingStore store(int(input.cols()));
  for (std::size_t i = 0; i < vocab.size(); ++i) store.insert(vocab.items[i], input.row(Eigen::Index(i)).transpose());
  return store;
}

namespace {

// Walker alias table: O(1) draws from a fixed discrete distribution.
// std::discrete_distribution does a binary search per draw, which dominates
// SGNS run time with large vocabularies.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& weights) : prob_(weights.size()), alias_(weights.size()) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const std::size_t n = weights.size();
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * double(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(std::uint32_t(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) prob_[i] = 1.0, alias_[i] = i;
    for (auto i : small) prob_[i] = 1.0, alias_[i] = i;
  }

  std::uint32_t operator()(std::mt19937_64& rng) const {
    const auto column = std::uint32_t((static_cast<unsigned __int128>(rng()) * prob_.size()) >> 64);
    const double u = double(rng() >> 11) * 0x1.0p-53;
    return u < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

struct EpochTally {
  double objective = 0;
  std::uint64_t pairs = 0;
};

// One pass over `ids` (already mapped to the vocabulary). Updates both
// matrices in place; `processed` drives the learning-rate schedule.
void train_sequence(const std::vector<std::uint32_t>& ids, const SgnsConfig& cfg, SgnsModel& model,
                    const AliasTable& noise, std::mt19937_64& rng,
                    std::uint64_t& processed, std::uint64_t total, EpochTally& tally) {
  const int dim = cfg.dimension;
  const double floor_lr = cfg.learning_rate * 1e-4;
  std::uniform_int_distribution<int> shrink(0, cfg.window - 1);
  std::vector<std::uint32_t> targets(std::size_t(cfg.negatives) + 1);
  std::vector<double> coef(targets.size());
  VectorXd v(dim), center_grad(dim);

  for (std::size_t pos = 0; pos < ids.size(); ++pos, ++processed) {
    const double lr = std::max(floor_lr, cfg.learning_rate * (1.0 - double(processed) / double(total)));
    const int span = cfg.window - shrink(rng);
    const std::uint32_t center = ids[pos];
    const std::size_t lo = pos >= std::size_t(span) ? pos - std::size_t(span) : 0;
    const std::size_t hi = std::min(ids.size() - 1, pos + std::size_t(span));
    for (std::size_t c = lo; c <= hi; ++c) {
      if (c == pos) continue;
      // targets[0] is the true context, the rest are noise draws.
      targets[0] = ids[c];
      for (std::size_t k = 1; k < targets.size();) {
        auto n = noise(rng);
        if (n == targets[0]) continue;
        targets[k++] = n;
      }
      v = model.input.row(center).transpose();
      center_grad.setZero();
      for (std::size_t k = 0; k < targets.size(); ++k) {
        // Target label t: objective log sigma(+-x), coefficient t - sigma(x).
        const double x = model.output.row(targets[k]).dot(v);
        const double e = std::exp(-std::abs(x));
        const double sig = x >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        const double signed_x = k == 0 ? x : -x;
        tally.objective += (signed_x >= 0 ? 0.0 : signed_x) - std::log1p(e);
        coef[k] = (k == 0 ? 1.0 : 0.0) - sig;
        center_grad += coef[k] * model.output.row(targets[k]).transpose();
      }
      ++tally.pairs;
      for (std::size_t k = 0; k < targets.size(); ++k) model.output.row(targets[k]) += (lr * coef[k]) * v.transpose();
      model.input.row(center) += lr * center_grad.transpose();
    }
  }
}

}  // namespace

SgnsModel train_sgns(const std::vector<std::vector<std::string>>& sequences, const SgnsConfig& cfg) {
  cfg.validate();
  SgnsModel model;
  model.vocab = build_vocab(sequences, cfg.min_count);
  if (model.vocab.empty()) throw ConfigError("sgns vocabulary is empty (min_count too high?)");

  const auto vocab_size = Eigen::Index(model.vocab.size());
  std::mt19937_64 init_rng(derive_seed(cfg.seed, 0x1417));
  std::uniform_real_distribution<double> init(-0.5 / cfg.dimension, 0.5 / cfg.dimension);
  model.input.resize(vocab_size, cfg.dimension);
  for (Eigen::Index i = 0; i < model.input.size(); ++i) model.input.data()[i] = init(init_rng);
  model.output = RowMatrix<double>::Zero(vocab_size, cfg.dimension);

  std::vector<double> noise_weights(model.vocab.size());
  for (std::size_t i = 0; i < noise_weights.size(); ++i) noise_weights[i] = std::pow(double(model.vocab.counts[i]), 0.75);

  const AliasTable noise(noise_weights);

  std::vector<std::vector<std::uint32_t>> mapped;
  mapped.reserve(sequences.size());
  std::uint64_t tokens = 0;
  for (const auto& seq : sequences) {
    std::vector<std::uint32_t> ids;
    ids.reserve(seq.size());
    for (const auto& item : seq)
      if (auto i = model.vocab.find(item)) ids.push_back(*i);
    tokens += ids.size();
    if (ids.size() >= 2) mapped.push_back(std::move(ids));
  }
  const std::uint64_t total = std::max<std::uint64_t>(1, tokens * std::uint64_t(cfg.epochs));
  const unsigned threads = std::max(1u, cfg.threads);

  std::uint64_t processed = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (threads == 1) {
      std::mt19937_64 rng(derive_seed(cfg.seed, 0xE90C, std::uint64_t(epoch)));
      EpochTally tally;
      for (const auto& ids : mapped) train_sequence(ids, cfg, model, noise, rng, processed, total, tally);
      model.epoch_objective.push_back(tally.pairs ? tally.objective / double(tally.pairs) : 0.0);
      continue;
    }
    // Hogwild: workers update the shared matrices without locking.
    std::vector<EpochTally> tallies(threads);
    std::atomic<std::uint64_t> shared{processed};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0xE90C + w, std::uint64_t(epoch)));
          for (std::size_t s = w; s < mapped.size(); s += threads) {
          // The learning-rate schedule follows the combined progress of all workers.
          std::uint64_t local = shared.load(std::memory_order_relaxed);
          train_sequence(mapped[s], cfg, model, noise, rng, local, total, tallies[w]);
          shared.fetch_add(mapped[s].size(), std::memory_order_relaxed);
        }
      });
    }
    for (auto& t : pool) t.join();
    processed += tokens;
    EpochTally sum;
    for (const auto& t : tallies) {
      sum.objective += t.objective;
      sum.pairs += t.pairs;
    }
    model.epoch_objective.push_back(sum.pairs ? sum.objective / double(sum.pairs) : 0.0);
  }
  return model;
}

VectorXd encode_field(const TokenSequence& tokens, const EmbeddingStore& token_store) {
  VectorXd sum = VectorXd::Zero(token_store.dimension());
  std::size_t known = 0;
  for (const auto& t : tokens) {
    if (auto v = token_store.find(t)) {
      sum += *v;
      ++known;
    }
  }
  if (known) sum /= double(known);
  return sum;
}

Word2VecEncoder::Word2VecEncoder(std::shared_ptr<const EmbeddingStore> tokens) : tokens_(std::move(tokens)) {
  if (!tokens_) throw ConfigError("word2vec encoder needs a token store");
}

FieldVectors Word2VecEncoder::encode(const QuestionRecord& record) const {
  return {encode_field(record.title_tokens, *tokens_), encode_field(record.body_tokens, *tokens_)};
}

PrecomputedEncoder::PrecomputedEncoder(std::shared_ptr<const EmbeddingStore> fields) : fields_(std::move(fields)) {
  if (!fields_) throw ConfigError("precomputed encoder needs a field store");
}

FieldVectors PrecomputedEncoder::encode(const QuestionRecord& record) const {
  return {fields_->at(title_key(record.id)), fields_->at(body_key(record.id))};
}

std::string title_key(QuestionId id) { return std::to_string(id) + "#title"; }
std::string body_key(QuestionId id) { return std::to_string(id) + "#body"; }

}  // namespace dupq
