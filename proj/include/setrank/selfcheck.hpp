#ifndef SETRANK_SELFCHECK_HPP
#define SETRANK_SELFCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "setrank/gradcheck.hpp"
#include "setrank/letor.hpp"
#include "setrank/model.hpp"
#include "setrank/random.hpp"
#include "setrank/training.hpp"

namespace setrank {

struct PropertyResult {
  std::string name;
  double value = 0.0;      // worst deviation / relative error observed
  double tolerance = 0.0;
  std::size_t trials = 0;
  bool passed() const { return value <= tolerance; }
};

/// Random query of n documents with `sources` random initial rankings.
inline QueryGroup random_query(std::size_t n, std::size_t features, std::size_t sources, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, kMaxLabel);
  QueryGroup g;
  g.qid = "random";
  g.feature_count = features;
  for (std::size_t i = 0; i < n * features; ++i) g.features.push_back(normal(rng));
  for (std::size_t i = 0; i < n; ++i) g.labels.push_back(label(rng));
  for (std::size_t r = 0; r < sources; ++r) {
    std::vector<std::size_t> ranks(n);
    std::iota(ranks.begin(), ranks.end(), 1);
    std::shuffle(ranks.begin(), ranks.end(), rng);
    g.initial_ranks.push_back(std::move(ranks));
  }
  g.lines.resize(n);
  std::iota(g.lines.begin(), g.lines.end(), 0);
  return g;
}

/**
 * Max |F(pi D)_i - F(D)_{pi(i)}| over `trials` fresh (model, query,
 * permutation) triples with N drawn from 1..max_docs.
 */
inline PropertyResult equivariance_check(ModelConfig config, std::size_t trials, std::size_t max_docs,
                                         std::uint64_t seed, double tolerance = 1e-9) {
  Rng rng = substream(seed, "selfcheck/equivariance");
  std::uniform_int_distribution<std::size_t> size(1, max_docs);
  if (config.use_ordinal) config.n_max = std::max(config.n_max, max_docs);
  PropertyResult r{"equivariance " + to_string(config.block_kind) +
                       (config.use_ordinal ? " ordinal" : ""),
                   0.0, tolerance, trials};
  for (std::size_t t = 0; t < trials; ++t) {
    const Model m = make_model(config, rng);
    const QueryGroup g = random_query(size(rng), config.input_dim, config.ranking_sources, rng);
    std::vector<std::size_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto base = score(g, m);
    const auto moved = score(permute_group(g, perm), m);
    for (std::size_t i = 0; i < perm.size(); ++i)
      r.value = std::max(r.value, std::abs(moved[i] - base[perm[i]]));
  }
  return r;
}

/// Worst relative error of the attention-rank loss gradient through the full
/// model against central differences, `coordinates` sampled per trial.
inline PropertyResult gradient_check(ModelConfig config, std::size_t trials, std::size_t docs,
                                     std::size_t coordinates, std::uint64_t seed,
                                     double tolerance = 1e-4) {
  Rng rng = substream(seed, "selfcheck/gradient");
  if (config.use_ordinal) config.n_max = std::max(config.n_max, docs + 2);
  PropertyResult r{"gradient " + to_string(config.block_kind), 0.0, tolerance, trials};
  for (std::size_t t = 0; t < trials; ++t) {
    Model m = make_model(config, rng);
    QueryGroup g = random_query(docs, config.input_dim, config.ranking_sources, rng);
    g.labels[0] = std::max(g.labels[0], 1);
    const auto target = *attention_targets(g.labels);
    const std::size_t start = config.use_ordinal ? sample_ordinal_offset(docs, config.n_max, rng) : 1;
    auto res = finite_diff_check(
        [&](Graph& graph) { return attention_rank_loss(graph, forward_scores(graph, g, m, start), target); },
        m.parameters(), {1e-5, coordinates, rng()});
    r.value = std::max(r.value, res.max_relative_error);
  }
  return r;
}

}  // namespace setrank

#endif  // SETRANK_SELFCHECK_HPP
