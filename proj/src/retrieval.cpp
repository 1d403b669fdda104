#include "dupq/retrieval.hpp"

#include "dupq/eval.hpp"
#include "dupq/parallel.hpp"
#include "checkpoint_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace dupq {

using namespace detail;

ScoreFunction parse_score_function(const std::string& name) {
  if (name == "distance") return ScoreFunction::kNegativeDistance;
  if (name == "cosine") return ScoreFunction::kCosine;
  throw ConfigError("unknown score function '" + name + "' (expected distance or cosine)");
}

std::string to_string(ScoreFunction s) { return s == ScoreFunction::kCosine ? "cosine" : "distance"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

double cosine_similarity(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Head model

double HeadModel::similarity(const Eigen::Ref<const VectorXd>& anchor_out,
                             const Eigen::Ref<const VectorXd>& cand_out) const {
  if (score == ScoreFunction::kCosine) return cosine_similarity(anchor_out, cand_out);
  return -pnorm_distance<double>(anchor_out, cand_out, norm_degree);
}

VectorXd head_forward(const Eigen::Ref<const VectorXd>& features, const HeadModel& model) {
  return model.head.forward(features);
}


void HeadModel::save(std::ostream& out) const {
  out << "siamese_head in_dim=" << head.in_dim() << " out_dim=" << head.out_dim()
      << " norm_degree=" << fmt(norm_degree) << " margin=" << fmt(margin) << " feature_mode=" << to_string(mode)
      << " score=" << to_string(score) << '\n';
  const RowMatrix<double> w = head.weight;
  for (Eigen::Index r = 0; r < w.rows(); ++r) write_doubles(out, w.data() + r * w.cols(), w.cols());
  write_doubles(out, head.bias.data(), head.bias.size());
}

void HeadModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  save(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

HeadModel HeadModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty head checkpoint");
  auto h = parse_header(line, "siamese_head");
  HeadModel m;
  const int in_dim = int(parse_double(header_field(h, "in_dim")));
  const int out_dim = int(parse_double(header_field(h, "out_dim")));
  if (in_dim <= 0 || out_dim <= 0) throw FormatError("head dimensions must be positive");
  m.norm_degree = parse_double(header_field(h, "norm_degree"));
  m.margin = parse_double(header_field(h, "margin"));
  m.mode = parse_feature_mode(header_field(h, "feature_mode"));
  if (h.count("score")) m.score = parse_score_function(h.at("score"));
  RowMatrix<double> w(out_dim, in_dim);
  for (int r = 0; r < out_dim; ++r) read_doubles(in, w.data() + Eigen::Index(r) * in_dim, in_dim, "W row " + std::to_string(r));
  m.head.weight = w;
  m.head.bias.resize(out_dim);
  read_doubles(in, m.head.bias.data(), out_dim, "b");
  return m;
}

HeadModel HeadModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return load(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Buckets

std::vector<Bucket> build_buckets(const std::vector<DuplicatePair>& pairs, const FeatureTable* features) {
  std::map<QuestionId, QuestionId> parent;
  std::function<QuestionId(QuestionId)> find = [&](QuestionId x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second == x) return x;
    QuestionId root = find(it->second);
    parent[x] = root;
    return root;
  };
  for (const auto& p : pairs) {
    QuestionId a = find(p.anchor), b = find(p.master);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<QuestionId, std::vector<QuestionId>> groups;
  for (const auto& [id, _] : parent) groups[find(id)].push_back(id);

  std::vector<std::vector<QuestionId>> ordered;
  for (auto& [_, members] : groups) ordered.push_back(std::move(members));
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

  std::vector<Bucket> buckets;
  buckets.reserve(ordered.size());
  for (auto& members : ordered) {
    Bucket b;
    b.id = buckets.size();
    b.members = std::move(members);
    if (features) {
      b.centroid = VectorXd::Zero(features->text_dim());
      for (auto id : b.members) b.centroid += features->text(id).transpose();
      b.centroid /= double(b.members.size());
    }
    buckets.push_back(std::move(b));
  }
  return buckets;
}

namespace {

RowMatrix<double> unit_rows(const std::vector<Bucket>& buckets) {
  const Eigen::Index dim = buckets.empty() ? 0 : buckets.front().centroid.size();
  RowMatrix<double> u(Eigen::Index(buckets.size()), dim);
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i].centroid.size() != dim) throw ConfigError("bucket centroids have inconsistent sizes");
    const double n = buckets[i].centroid.norm();
    if (n > 0) u.row(Eigen::Index(i)) = buckets[i].centroid.transpose() / n;
    else u.row(Eigen::Index(i)).setZero();
  }
  return u;
}

}  // namespace

MatrixXd bucket_similarity(const std::vector<Bucket>& buckets) {
  const RowMatrix<double> u = unit_rows(buckets);
  MatrixXd s = u * u.transpose();
  s.diagonal().setOnes();
  return s;
}

NegativeSampler::NegativeSampler(std::vector<Bucket> buckets, const QuestionIndex& questions,
                                 std::vector<QuestionId> fallback_pool, double alpha)
    : buckets_(std::move(buckets)), questions_(&questions), fallback_pool_(std::move(fallback_pool)), alpha_(alpha) {
  unit_centroids_ = unit_rows(buckets_);
  members_.resize(buckets_.size());
  for (std::size_t k = 0; k < buckets_.size(); ++k) {
    for (auto id : buckets_[k].members) {
      bucket_of_[id] = k;
      const auto& rec = questions.at(id);
      members_[k].push_back({id, rec.answered(), tag_set(rec.tags)});
    }
  }
  std::sort(fallback_pool_.begin(), fallback_pool_.end());
  fallback_pool_.erase(std::unique(fallback_pool_.begin(), fallback_pool_.end()), fallback_pool_.end());
}

std::optional<std::size_t> NegativeSampler::bucket_of(QuestionId id) const {
  auto it = bucket_of_.find(id);
  if (it == bucket_of_.end()) return std::nullopt;
  return it->second;
}

VectorXd NegativeSampler::similarity_row(std::size_t bucket) const {
  VectorXd row = unit_centroids_ * unit_centroids_.row(Eigen::Index(bucket)).transpose();
  row(Eigen::Index(bucket)) = 1.0;
  return row;
}

MatrixXd NegativeSampler::similarity_matrix() const { return bucket_similarity(buckets_); }

namespace {

double sorted_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] == b[j]) {
      ++common;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return double(common) / double(a.size() + b.size() - common);
}

}  // namespace

NegativeSample NegativeSampler::sample(QuestionId anchor, std::mt19937_64& rng) const {
  auto home = bucket_of(anchor);
  if (!home) throw std::invalid_argument("question " + std::to_string(anchor) + " is in no bucket");
  const VectorXd sim = similarity_row(*home);

  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < buckets_.size(); ++k)
    if (k != *home && sim(Eigen::Index(k)) > alpha_) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim(Eigen::Index(a)) > sim(Eigen::Index(b)); });

  const auto anchor_tags = tag_set(questions_->at(anchor).tags);
  bool found = false;
  QuestionId best_id = 0;
  double best_overlap = -1, best_sim = -2;
  for (auto k : order) {
    const double s = sim(Eigen::Index(k));
    // A perfect overlap can only be beaten by an equally similar bucket.
    if (found && best_overlap >= 1.0 && s < best_sim) break;
    for (const auto& m : members_[k]) {
      if (!m.answered) continue;
      const double overlap = sorted_jaccard(anchor_tags, m.tags);
      const bool better = !found || overlap > best_overlap ||
                          (overlap == best_overlap && (s > best_sim || (s == best_sim && m.id < best_id)));
      if (better) {
        found = true;
        best_id = m.id;
        best_overlap = overlap;
        best_sim = s;
      }
    }
  }
  if (found) return {best_id, false};

  std::vector<QuestionId> pool;
  for (auto id : fallback_pool_) {
    auto b = bucket_of(id);
    if (b && *b == *home) continue;
    if (id == anchor) continue;
    pool.push_back(id);
  }
  if (pool.empty()) throw std::runtime_error("no negative available for question " + std::to_string(anchor));
  ++fallbacks_;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return {pool[pick(rng)], true};
}

std::vector<Triplet> make_triplets(const std::vector<DuplicatePair>& pairs, const NegativeSampler& sampler,
                                   std::mt19937_64& rng) {
  std::vector<Triplet> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.anchor, p.master, sampler.sample(p.anchor, rng).id});
  return out;
}

// ---------------------------------------------------------------------------
// Candidates

bool CandidateSet::contains(QuestionId id) const {
  return std::binary_search(candidates.begin(), candidates.end(), Candidate{id, 0, 0},
                            [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
}

std::vector<QuestionId> CandidateSet::ids() const {
  std::vector<QuestionId> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.id);
  return out;
}

CandidateGenerator::CandidateGenerator(const std::vector<QuestionRecord>& pool, const FeatureTable& features,
                                       CandidateFilter filter)
    : pool_(&pool), features_(&features), filter_(filter) {
  tag_sets_.reserve(pool.size());
  unit_titles_.resize(Eigen::Index(pool.size()), features.title_dim());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    tag_sets_.push_back(tag_set(pool[i].tags));
    for (const auto& t : tag_sets_.back()) by_tag_[t].push_back(i);
    VectorXd title = features.title(pool[i].id).transpose();
    const double n = title.norm();
    if (n > 0) unit_titles_.row(Eigen::Index(i)) = title.transpose() / n;
    else unit_titles_.row(Eigen::Index(i)).setZero();
  }
}

CandidateSet CandidateGenerator::generate(const QuestionRecord& anchor,
                                          const Eigen::Ref<const VectorXd>& anchor_title) const {
  CandidateSet set;
  set.anchor = anchor.id;
  const auto anchor_tags = tag_set(anchor.tags);
  std::vector<std::size_t> shared;
  for (const auto& t : anchor_tags) {
    auto it = by_tag_.find(t);
    if (it != by_tag_.end()) shared.insert(shared.end(), it->second.begin(), it->second.end());
  }
  std::sort(shared.begin(), shared.end());
  shared.erase(std::unique(shared.begin(), shared.end()), shared.end());

  const double norm = anchor_title.norm();
  const VectorXd unit = norm > 0 ? VectorXd(anchor_title / norm) : VectorXd::Zero(anchor_title.size());
  for (auto i : shared) {
    const auto& rec = (*pool_)[i];
    if (!(rec.created_at < anchor.created_at) || rec.id == anchor.id) continue;
    const double j = sorted_jaccard(anchor_tags, tag_sets_[i]);
    if (!(j > filter_.min_tag_jaccard)) continue;
    if (!rec.answered()) continue;
    const double cos = unit_titles_.row(Eigen::Index(i)).dot(unit.transpose());
    if (!(cos >= filter_.min_title_cosine)) continue;
    set.candidates.push_back({rec.id, j, cos});
  }
  std::sort(set.candidates.begin(), set.candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
  return set;
}

CandidateSet CandidateGenerator::generate(const QuestionRecord& anchor) const {
  return generate(anchor, features_->title(anchor.id).transpose());
}

// ---------------------------------------------------------------------------
// Ranking

RankedList rank_by_score(QuestionId anchor, std::vector<RankedCandidate> scored, const QuestionIndex& questions,
                         std::optional<QuestionId> gold) {
  std::vector<Timestamp> created(scored.size());
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    created[i] = questions.at(scored[i].id).created_at;
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].score != scored[b].score) return scored[a].score > scored[b].score;
    if (created[a] != created[b]) return created[a] < created[b];
    return scored[a].id < scored[b].id;
  });
  RankedList list;
  list.anchor = anchor;
  list.entries.reserve(scored.size());
  for (auto i : order) {
    list.entries.push_back(scored[i]);
    if (gold && scored[i].id == *gold) list.gold_rank = list.entries.size();
  }
  return list;
}

RankedList rank_candidates(QuestionId anchor, const Eigen::Ref<const VectorXd>& anchor_features,
                           const CandidateSet& set, const FeatureTable& features, const HeadModel& model,
                           const QuestionIndex& questions, std::optional<QuestionId> gold) {
  const VectorXd anchor_out = head_forward(anchor_features, model);
  std::vector<RankedCandidate> scored;
  scored.reserve(set.candidates.size());
  for (const auto& c : set.candidates) {
    const VectorXd out = head_forward(features.row(c.id).transpose(), model);
    scored.push_back({c.id, model.similarity(anchor_out, out)});
  }
  return rank_by_score(anchor, std::move(scored), questions, gold);
}

std::string ranked_line(const RankedList& list, std::size_t top_k) {
  std::string line = std::to_string(list.anchor) + '\t' +
                     (list.gold_rank ? std::to_string(*list.gold_rank) : std::string("-1")) + '\t';
  for (std::size_t i = 0; i < std::min(top_k, list.entries.size()); ++i) {
    if (i) line += ',';
    line += std::to_string(list.entries[i].id);
  }
  return line;
}

// ---------------------------------------------------------------------------
// Training

double batch_triplet_loss(const SiameseHead<double>& head, const RowMatrix<double>& xa, const RowMatrix<double>& xp,
                          const RowMatrix<double>& xn, double margin, double degree, HeadGradient<double>& grad) {
  const Eigen::Index batch = xa.rows();
  const RowMatrix<double> ha = head.forward_rows(xa), hp = head.forward_rows(xp), hn = head.forward_rows(xn);
  RowMatrix<double> da = RowMatrix<double>::Zero(batch, head.out_dim());
  RowMatrix<double> dp = da, dn = da;
  double total = 0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const VectorXd a = ha.row(i).transpose(), p = hp.row(i).transpose(), n = hn.row(i).transpose();
    const double loss = triplet_loss<double>(a, p, n, margin, degree);
    total += loss;
    if (loss <= 0) continue;
    const VectorXd g_ap = pnorm_distance_gradient<double>(a, p, degree);
    const VectorXd g_an = pnorm_distance_gradient<double>(a, n, degree);
    da.row(i) = (g_ap - g_an).transpose();
    dp.row(i) = -g_ap.transpose();
    dn.row(i) = g_an.transpose();
  }
  const double inv = 1.0 / double(batch);
  da = da.cwiseProduct(ha.cwiseProduct((1.0 - ha.array()).matrix())) * inv;
  dp = dp.cwiseProduct(hp.cwiseProduct((1.0 - hp.array()).matrix())) * inv;
  dn = dn.cwiseProduct(hn.cwiseProduct((1.0 - hn.array()).matrix())) * inv;
  grad.weight.noalias() = da.transpose() * xa;
  grad.weight.noalias() += dp.transpose() * xp;
  grad.weight.noalias() += dn.transpose() * xn;
  grad.bias = (da.colwise().sum() + dp.colwise().sum() + dn.colwise().sum()).transpose();
  return total * inv;
}


double evaluate_head_mrr(const HeadModel& model, const FeatureTable& features,
                         const std::vector<ValidationQuery>& queries, const QuestionIndex& questions,
                         unsigned threads) {
  if (queries.empty()) throw std::invalid_argument("no queries to evaluate");
  std::vector<std::optional<std::size_t>> ranks(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t qi) {
    const auto& q = queries[qi];
    const VectorXd anchor_out = model.head.forward(features.row(q.anchor).transpose());
    std::vector<RankedCandidate> scored;
    scored.reserve(q.candidates.size());
    if (!q.candidates.empty()) {
      RowMatrix<double> x(Eigen::Index(q.candidates.size()), features.input_dim());
      for (std::size_t i = 0; i < q.candidates.size(); ++i) x.row(Eigen::Index(i)) = features.row(q.candidates[i]);
      const RowMatrix<double> out = model.head.forward_rows(x);
      for (std::size_t i = 0; i < q.candidates.size(); ++i)
        scored.push_back({q.candidates[i], model.similarity(anchor_out, out.row(Eigen::Index(i)).transpose())});
    }
    ranks[qi] = rank_by_score(q.anchor, std::move(scored), questions, q.gold).gold_rank;
  });
  return mrr(ranks);
}

HeadTrainResult train_head(const TripletProvider& triplets, const FeatureTable& features,
                           const std::vector<ValidationQuery>& validation, const QuestionIndex& questions,
                           const HeadTrainConfig& cfg) {
  if (cfg.epochs <= 0 || cfg.batch_size <= 0) throw ConfigError("head epochs and batch_size must be positive");
  if (!(cfg.norm_degree > 0)) throw ConfigError("norm_degree must be positive");
  HeadTrainResult result;
  HeadModel model;
  model.head = SiameseHead<double>::initialize(features.input_dim(), cfg.out_dim, derive_seed(cfg.seed, 0x4EAD));
  model.norm_degree = cfg.norm_degree;
  model.margin = cfg.margin;
  model.mode = features.mode();
  model.score = cfg.score;

  Optimizer<double> optimizer(cfg.optimizer, model.head.block_sizes());
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0x5AFF));
  HeadGradient<double> grad = HeadGradient<double>::zeros_like(model.head);
  double best_mrr = -1;
  result.model = model;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto batch_triplets = triplets(epoch - 1);
    if (batch_triplets.empty()) throw std::invalid_argument("train_head: empty triplet set");
    std::shuffle(batch_triplets.begin(), batch_triplets.end(), shuffle_rng);

    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < batch_triplets.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(batch_triplets.size(), start + std::size_t(cfg.batch_size));
      const auto n = Eigen::Index(end - start);
      RowMatrix<double> xa(n, features.input_dim()), xp(n, features.input_dim()), xn(n, features.input_dim());
      for (std::size_t i = start; i < end; ++i) {
        const auto r = Eigen::Index(i - start);
        xa.row(r) = features.row(batch_triplets[i].anchor);
        xp.row(r) = features.row(batch_triplets[i].positive);
        xn.row(r) = features.row(batch_triplets[i].negative);
      }
      loss_sum += batch_triplet_loss(model.head, xa, xp, xn, cfg.margin, cfg.norm_degree, grad);
      ++batches;
      optimizer.step(model.head.blocks(), grad.blocks());
    }
    result.epoch_loss.push_back(loss_sum / double(batches));

    if (!validation.empty()) {
      const double m = evaluate_head_mrr(model, features, validation, questions, cfg.threads);
      result.validation_mrr.push_back(m);
      if (m > best_mrr) {
        best_mrr = m;
        result.model = model;
        result.best_epoch = epoch;
      }
    }
  }
  if (validation.empty()) {
    result.model = model;
    result.best_epoch = cfg.epochs;
  }
  return result;
}

}  // namespace dupq
