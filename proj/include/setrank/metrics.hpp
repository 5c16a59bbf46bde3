#ifndef SETRANK_METRICS_HPP
#define SETRANK_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "setrank/error.hpp"
#include "setrank/letor.hpp"
#include "setrank/model.hpp"

namespace setrank {

namespace detail {

inline double dcg(std::span<const int> labels, std::size_t k) {
  double total = 0.0;
  const std::size_t n = std::min(k, labels.size());
  for (std::size_t i = 0; i < n; ++i)
    total += (std::exp2(static_cast<double>(labels[i])) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return total;
}

}  // namespace detail

/// NDCG@k of labels listed in predicted order: gain 2^y - 1, discount
/// log2(i + 1). Empty when the ideal DCG is zero.
inline std::optional<double> ndcg_at_k(std::span<const int> ranked_labels, std::size_t k) {
  if (k == 0) throw ContractError("ndcg_at_k: k must be >= 1");
  std::vector<int> ideal(ranked_labels.begin(), ranked_labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = detail::dcg(ideal, k);
  if (idcg <= 0.0) return std::nullopt;
  return detail::dcg(ranked_labels, k) / idcg;
}

struct QueryMetrics {
  std::string qid;
  std::vector<double> ndcg;  // aligned with MetricReport::ks
};

struct MetricReport {
  std::vector<std::size_t> ks;
  std::vector<double> means;
  std::vector<QueryMetrics> queries;  // counted queries only
  std::vector<std::string> excluded;  // ideal DCG of zero

  std::size_t query_count() const { return queries.size(); }

  double mean(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (ks[i] == k) return means[i];
    throw ContractError("metric report has no NDCG@" + std::to_string(k));
  }
};

using Scorer = std::function<std::vector<double>(const QueryGroup&)>;

inline std::vector<std::size_t> default_ks() { return {1, 3, 5, 10}; }

/// Scores each query, sorts stably by descending score and averages NDCG@k over
/// queries with at least one relevant document.
inline MetricReport evaluate(const Scorer& scorer, const Dataset& ds,
                             std::vector<std::size_t> ks = default_ks()) {
  MetricReport report;
  report.ks = ks;
  report.means.assign(ks.size(), 0.0);
  for (const auto& group : ds.groups) {
    if (!group.has_relevant()) {
      report.excluded.push_back(group.qid);
      continue;
    }
    const auto scores = scorer(group);
    if (scores.size() != group.size()) {
      throw DimensionError("evaluate: scorer returned " + std::to_string(scores.size()) +
                           " scores for " + std::to_string(group.size()) + " documents");
    }
    std::vector<int> ranked;
    ranked.reserve(group.size());
    for (std::size_t id : rank(scores)) ranked.push_back(group.labels[id - 1]);
    QueryMetrics qm{group.qid, {}};
    for (std::size_t k : ks) qm.ndcg.push_back(*ndcg_at_k(ranked, k));
    report.queries.push_back(std::move(qm));
  }
  if (!report.queries.empty()) {
    for (std::size_t j = 0; j < ks.size(); ++j) {
      double total = 0.0;
      for (const auto& q : report.queries) total += q.ndcg[j];
      report.means[j] = total / static_cast<double>(report.queries.size());
    }
  }
  return report;
}

inline MetricReport evaluate(const Model& model, const Dataset& ds,
                             std::vector<std::size_t> ks = default_ks()) {
  return evaluate([&](const QueryGroup& g) { return score(g, model); }, ds, std::move(ks));
}

/// Scores every document by its label: the perfect ranker.
inline std::vector<double> label_scores(const QueryGroup& g) {
  return {g.labels.begin(), g.labels.end()};
}

/// Univariate scorer that reads a single raw feature.
inline Scorer feature_scorer(std::size_t feature) {
  return [feature](const QueryGroup& g) {
    if (feature >= g.feature_count) throw DimensionError("feature_scorer: feature out of range");
    std::vector<double> s(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s[i] = g.feature(i, feature);
    return s;
  };
}

}  // namespace setrank

#endif  // SETRANK_METRICS_HPP
