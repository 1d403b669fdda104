#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dupq {

using GoldRank = std::optional<std::size_t>;  ///< 1-based; nullopt when the gold is absent

/// Mean of 1/rank, absent golds contributing 0. Throws on empty input.
double mrr(std::span<const GoldRank> ranks);
/// Fraction of anchors whose gold rank is <= k.
double recall_at(std::span<const GoldRank> ranks, std::size_t k);
/// Fraction of anchors whose gold survived candidate filtering.
double upper_bound(std::span<const bool> gold_in_candidates);

double rmse(std::span<const double> gold, std::span<const double> predicted);
/// Pearson correlation of average ranks. Throws when either input has
/// constant ranks.
double spearman_rho(std::span<const double> x, std::span<const double> y);

/// Average (1-based) ranks with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

struct MannWhitneyResult {
  double u_a = 0;  ///< U statistic of sample a
  double u_b = 0;
  double p_value = 1;  ///< two-sided
  bool exact = false;
};

/// Exact enumeration for n_a + n_b <= 12, otherwise the tie-corrected normal
/// approximation with continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

inline const std::vector<std::size_t> kReportCutoffs{10, 20, 30, 50, 100, 500};

struct RetrievalReport {
  std::string method;
  double mrr = 0;
  std::map<std::size_t, double> rr_at;
  double upper_bound = 0;
  std::size_t anchors = 0;
  double mean_candidates = 0;

  static RetrievalReport compute(std::string method, std::span<const GoldRank> ranks,
                                 std::span<const bool> gold_in_candidates, double mean_candidates);
  std::string to_json() const;
  /// Percentages laid out as MRR, RR@10 ... RR@500.
  std::string to_table() const;
};

struct TimeReport {
  std::string method;
  double rmse = 0;
  double spearman = 0;
  std::size_t pairs = 0;

  std::string to_json() const;
  std::string to_table() const;
};

}  // namespace dupq
