#include "dupq/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace dupq {

double mrr(std::span<const GoldRank> ranks) {
  if (ranks.empty()) throw std::invalid_argument("mrr of an empty ranking set");
  double sum = 0;
  for (const auto& r : ranks)
    if (r) sum += 1.0 / double(*r);
  return sum / double(ranks.size());
}

double recall_at(std::span<const GoldRank> ranks, std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall_at needs k >= 1");
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : ranks)
    if (r && *r <= k) ++hits;
  return double(hits) / double(ranks.size());
}

double upper_bound(std::span<const bool> gold_in_candidates) {
  if (gold_in_candidates.empty()) return 0.0;
  return double(std::count(gold_in_candidates.begin(), gold_in_candidates.end(), true)) /
         double(gold_in_candidates.size());
}

double rmse(std::span<const double> gold, std::span<const double> predicted) {
  if (gold.size() != predicted.size()) throw std::invalid_argument("rmse: length mismatch");
  if (gold.empty()) throw std::invalid_argument("rmse: empty input");
  double sum = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) sum += (gold[i] - predicted[i]) * (gold[i] - predicted[i]);
  return std::sqrt(sum / double(gold.size()));
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman_rho: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman_rho needs at least two points");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw std::invalid_argument("spearman_rho undefined: constant ranks");
  return sxy / std::sqrt(sxx * syy);
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u needs non-empty samples");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = average_ranks(pooled);

  auto u_of = [&](const std::vector<char>& in_a) {
    double r = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (in_a[i]) r += ranks[i];
    return r - double(na) * double(na + 1) / 2.0;
  };
  std::vector<char> observed(n, 0);
  std::fill(observed.begin(), observed.begin() + long(na), char(1));

  MannWhitneyResult res;
  res.u_a = u_of(observed);
  res.u_b = double(na) * double(nb) - res.u_a;
  const double mean = double(na) * double(nb) / 2.0;
  const double dev = std::abs(res.u_a - mean);

  if (n <= 12) {
    // Every way of choosing which pooled positions belong to sample a.
    std::vector<char> mask(n, 0);
    std::fill(mask.begin(), mask.begin() + long(na), char(1));
    std::size_t total = 0, extreme = 0;
    std::sort(mask.begin(), mask.end());
    do {
      ++total;
      if (std::abs(u_of(mask) - mean) >= dev - 1e-9) ++extreme;
    } while (std::next_permutation(mask.begin(), mask.end()));
    res.p_value = double(extreme) / double(total);
    res.exact = true;
    return res;
  }

  double tie_term = 0;
  {
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = double(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double nn = double(n);
  const double var = double(na) * double(nb) / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, dev - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

RetrievalReport RetrievalReport::compute(std::string method, std::span<const GoldRank> ranks,
                                         std::span<const bool> gold_in_candidates, double mean_candidates) {
  RetrievalReport r;
  r.method = std::move(method);
  r.anchors = ranks.size();
  r.mrr = dupq::mrr(ranks);
  for (auto k : kReportCutoffs) r.rr_at[k] = recall_at(ranks, k);
  r.upper_bound = dupq::upper_bound(gold_in_candidates);
  r.mean_candidates = mean_candidates;
  return r;
}

std::string RetrievalReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["anchors"] = anchors;
  j["mean_candidates"] = mean_candidates;
  j["mrr"] = mrr;
  for (const auto& [k, v] : rr_at) j["rr@" + std::to_string(k)] = v;
  j["upper_bound"] = upper_bound;
  return j.dump(2) + "\n";
}

std::string RetrievalReport::to_table() const {
  std::string out = "Method               MRR      ";
  for (const auto& [k, _] : rr_at) {
    char h[16];
    std::snprintf(h, sizeof h, "RR@%-6zu", k);
    out += h;
  }
  out += "Upper\n";
  char row[64];
  std::snprintf(row, sizeof row, "%-20s %-8.3f ", method.c_str(), 100.0 * mrr);
  out += row;
  for (const auto& [_, v] : rr_at) {
    std::snprintf(row, sizeof row, "%-8.3f ", 100.0 * v);
    out += row;
  }
  std::snprintf(row, sizeof row, "%.3f\n", 100.0 * upper_bound);
  out += row;
  std::snprintf(row, sizeof row, "(%zu anchors, mean candidate set %.1f; values in %%)\n", anchors, mean_candidates);
  out += row;
  return out;
}

std::string TimeReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["pairs"] = pairs;
  j["rmse"] = rmse;
  j["spearman_rho"] = spearman;
  return j.dump(2) + "\n";
}

std::string TimeReport::to_table() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "Method                 RMSE    rho\n%-22s %-7.3f %.3f\n(%zu test pairs)\n",
                method.c_str(), rmse, spearman, pairs);
  return buf;
}

}  // namespace dupq
