#ifndef SETRANK_EXPERIMENTS_HPP
#define SETRANK_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "setrank/error.hpp"
#include "setrank/letor.hpp"
#include "setrank/metrics.hpp"
#include "setrank/model.hpp"
#include "setrank/random.hpp"
#include "setrank/training.hpp"

namespace setrank {

// ---------------------------------------------------------------------------
// Synthetic cross-document task
// ---------------------------------------------------------------------------

/**
 * Generator settings. Per group a hidden orientation sign and magnitude are
 * drawn; feature 0 is sign * magnitude * z for a latent z ~ N(0,1), features
 * 1..cue_features carry sign + N(0, cue_noise^2), the rest is N(0,1) noise.
 * The document with the largest z gets label 4; the others are binned into
 * 0..3 by the quartile of z among them. A single document cannot tell the
 * orientation reliably, the set can.
 */
struct SynthOptions {
  std::size_t queries = 100;
  std::size_t docs_per_query = 20;
  std::size_t features = 10;
  std::size_t cue_features = 4;
  double cue_noise = 3.0;
  double min_scale = 0.5;
  double max_scale = 2.0;
  /// One initial ranking per entry: scores z + N(0, noise^2).
  std::vector<double> ranking_noise;
  std::string qid_prefix = "q";
};

struct SynthData {
  Dataset dataset;
  /// Initial-ranking scores per source, aligned with document line order.
  std::vector<std::vector<double>> initial_scores;
};

inline SynthData synth_generate(const SynthOptions& o, Rng& rng) {
  if (o.queries < 1 || o.docs_per_query < 1 || o.features < 1) {
    throw ContractError("synth_generate: sizes must be >= 1");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(o.min_scale, o.max_scale);
  std::bernoulli_distribution coin(0.5);
  const std::size_t cues = std::min(o.cue_features, o.features - 1);
  const std::size_t n = o.docs_per_query;

  SynthData out;
  out.dataset.feature_count = o.features;
  out.initial_scores.resize(o.ranking_noise.size());
  std::size_t line = 0;
  for (std::size_t q = 0; q < o.queries; ++q) {
    QueryGroup g;
    g.qid = o.qid_prefix + std::to_string(q + 1);
    g.feature_count = o.features;
    const double sign = coin(rng) ? 1.0 : -1.0;
    const double scale = sign * magnitude(rng);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = normal(rng);
      g.features.push_back(scale * z[i]);
      for (std::size_t f = 0; f < cues; ++f) g.features.push_back(sign + o.cue_noise * normal(rng));
      for (std::size_t f = 1 + cues; f < o.features; ++f) g.features.push_back(normal(rng));
      g.lines.push_back(line++);
    }
    // Labels: argmax -> 4, others by quartile of z among the rest.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
    g.labels.assign(n, 0);
    g.labels[order.back()] = kMaxLabel;
    for (std::size_t j = 0; j + 1 < n; ++j)
      g.labels[order[j]] = static_cast<int>((4 * j) / (n - 1));
    for (std::size_t r = 0; r < o.ranking_noise.size(); ++r) {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = z[i] + o.ranking_noise[r] * normal(rng);
      g.initial_ranks.push_back(ranks_from_scores(s));
      out.initial_scores[r].insert(out.initial_scores[r].end(), s.begin(), s.end());
    }
    out.dataset.groups.push_back(std::move(g));
  }
  return out;
}

inline SynthData synth_generate(const SynthOptions& o, std::uint64_t seed) {
  Rng rng = substream(seed, "synth");
  return synth_generate(o, rng);
}

// ---------------------------------------------------------------------------
// Reversed-pair perturbation
// ---------------------------------------------------------------------------

/// Swaps the documents at `count` distinct, uniformly sampled pairs of rank
/// positions, one pair after another. `ranks[i]` is the 1-based rank of doc i.
inline std::vector<std::size_t> perturb_reverse_pairs(const std::vector<std::size_t>& ranks,
                                                      std::size_t count, Rng& rng) {
  const std::size_t n = ranks.size();
  const std::size_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  if (count > pairs) {
    throw ContractError("perturb_reverse_pairs: " + std::to_string(count) +
                        " pairs requested, only " + std::to_string(pairs) + " exist");
  }
  if (!is_rank_permutation(ranks)) throw DataError("perturb_reverse_pairs: not a permutation");
  std::vector<std::size_t> doc_at(n);
  for (std::size_t i = 0; i < n; ++i) doc_at[ranks[i] - 1] = i;

  // Floyd's sampling of distinct pair indices, applied in draw order.
  std::unordered_set<std::size_t> taken;
  std::vector<std::size_t> picks;
  for (std::size_t j = pairs - count; j < pairs; ++j) {
    std::uniform_int_distribution<std::size_t> u(0, j);
    std::size_t t = u(rng);
    if (!taken.insert(t).second) {
      t = j;
      taken.insert(t);
    }
    picks.push_back(t);
  }
  for (std::size_t t : picks) {
    // Map index t to the pair (a, b), a < b, in row-major upper-triangle order.
    std::size_t a = 0, remaining = t;
    while (remaining >= n - 1 - a) {
      remaining -= n - 1 - a;
      ++a;
    }
    const std::size_t b = a + 1 + remaining;
    std::swap(doc_at[a], doc_at[b]);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t pos = 0; pos < n; ++pos) out[doc_at[pos]] = pos + 1;
  return out;
}

struct PerturbationSpec {
  std::vector<std::size_t> pair_counts{0, 5, 10, 20};
  std::uint64_t seed = 1;
  /// Independent perturbation draws averaged per count.
  std::size_t repeats = 1;
};

struct SweepRow {
  std::size_t pairs = 0;
  std::string model;
  double ndcg10 = 0.0;
};

/// Applies the same perturbation to every initial ranking of every group.
/// Counts larger than a group's number of pairs are capped for that group.
inline Dataset perturb_dataset(const Dataset& ds, std::size_t count, Rng& rng) {
  Dataset out = ds;
  for (auto& g : out.groups) {
    const std::size_t n = g.size();
    const std::size_t cap = n < 2 ? 0 : n * (n - 1) / 2;
    for (auto& r : g.initial_ranks) r = perturb_reverse_pairs(r, std::min(count, cap), rng);
  }
  return out;
}

/**
 * NDCG@10 of each model when the test-time initial rankings carry `count`
 * reversed pairs. Documents keep their positions; only the rankings fed to the
 * ordinal embeddings change.
 */
inline std::vector<SweepRow> robustness_sweep(
    const std::vector<std::pair<std::string, const Model*>>& models, const Dataset& test,
    const PerturbationSpec& spec) {
  std::vector<SweepRow> rows;
  for (std::size_t count : spec.pair_counts) {
    std::vector<double> totals(models.size(), 0.0);
    const std::size_t repeats = std::max<std::size_t>(1, spec.repeats);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      Rng rng = substream(spec.seed, "perturb/" + std::to_string(count) + "/" + std::to_string(rep));
      const Dataset noisy = count == 0 ? test : perturb_dataset(test, count, rng);
      for (std::size_t m = 0; m < models.size(); ++m)
        totals[m] += evaluate(*models[m].second, noisy, {10}).mean(10);
    }
    for (std::size_t m = 0; m < models.size(); ++m)
      rows.push_back({count, models[m].first, totals[m] / static_cast<double>(repeats)});
  }
  return rows;
}

inline std::vector<SweepRow> robustness_sweep(const Model& with_ordinal,
                                              const Model& without_ordinal, const Dataset& test,
                                              const PerturbationSpec& spec) {
  return robustness_sweep({{"ordinal", &with_ordinal}, {"plain", &without_ordinal}}, test, spec);
}

// ---------------------------------------------------------------------------
// Set-size adaptation grid
// ---------------------------------------------------------------------------

enum class Split { train, valid, test };

/// Supplies the data for one grid cell: split, documents per query, seed.
using SizedData = std::function<Dataset(Split, std::size_t, std::uint64_t)>;

struct SizeGridSpec {
  std::vector<BlockKind> kinds{BlockKind::msab, BlockKind::imsab};
  std::vector<std::size_t> train_sizes{10};
  std::vector<std::size_t> test_sizes{40};
  std::vector<std::uint64_t> seeds{1};
};

struct SizeGridRow {
  BlockKind kind = BlockKind::msab;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double ndcg10 = 0.0;  // mean over seeds
  double stddev = 0.0;
  double delta = 0.0;   // against the same models tested at train_size
  std::vector<double> per_seed;
};

/**
 * Trains one model per (kind, train size, seed) and evaluates it at its own
 * size and at every test size. `delta` of a row is the drop of the same
 * trained models from test size == train size to the row's test size,
 * averaged over seeds.
 */
inline std::vector<SizeGridRow> size_adaptation_experiment(const SizeGridSpec& spec,
                                                           const ModelConfig& base,
                                                           const TrainConfig& train_config,
                                                           const SizedData& data) {
  std::vector<SizeGridRow> rows;
  for (BlockKind kind : spec.kinds) {
    for (std::size_t n0 : spec.train_sizes) {
      std::vector<std::size_t> sizes{n0};
      for (std::size_t n1 : spec.test_sizes)
        if (n1 != n0) sizes.push_back(n1);
      std::vector<std::vector<double>> cell(sizes.size());
      for (std::uint64_t seed : spec.seeds) {
        ModelConfig mc = base;
        mc.block_kind = kind;
        TrainConfig tc = train_config;
        tc.seed = seed;
        const Dataset train = data(Split::train, n0, seed);
        const Dataset valid = data(Split::valid, n0, seed);
        if (mc.use_ordinal) mc.n_max = std::max(mc.n_max, train.max_group_size());
        const auto trained = train_loop(train, valid, tc, mc);
        for (std::size_t t = 0; t < sizes.size(); ++t)
          cell[t].push_back(evaluate(trained.model, data(Split::test, sizes[t], seed), {10}).mean(10));
      }
      const std::size_t first = rows.size();
      for (std::size_t t = 0; t < sizes.size(); ++t) {
        SizeGridRow row;
        row.kind = kind;
        row.train_size = n0;
        row.test_size = sizes[t];
        row.per_seed = cell[t];
        const double k = static_cast<double>(row.per_seed.size());
        row.ndcg10 = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / k;
        double ss = 0.0;
        for (double v : row.per_seed) ss += (v - row.ndcg10) * (v - row.ndcg10);
        row.stddev = row.per_seed.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        row.delta = row.ndcg10 - (t == 0 ? row.ndcg10 : rows[first].ndcg10);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Zero / one / many initial rankings
// ---------------------------------------------------------------------------

struct RankingSourceRow {
  std::size_t sources = 0;
  MetricReport report;
};

/// Trains the same configuration with 0, 1, ..., all initial rankings of the
/// data (each variant uses the first `sources` rankings) and reports test NDCG.
inline std::vector<RankingSourceRow> multi_ranking_comparison(const Dataset& train,
                                                              const Dataset& valid,
                                                              const Dataset& test,
                                                              const ModelConfig& base,
                                                              const TrainConfig& tc,
                                                              std::vector<std::size_t> variants) {
  std::vector<RankingSourceRow> rows;
  for (std::size_t sources : variants) {
    ModelConfig mc = base;
    mc.use_ordinal = sources > 0;
    mc.ranking_sources = sources;
    if (mc.use_ordinal) {
      mc.n_max = std::max({mc.n_max, train.max_group_size(), valid.max_group_size(),
                           test.max_group_size()});
    }
    auto trained = train_loop(train, valid, tc, mc);
    rows.push_back({sources, evaluate(trained.model, test)});
  }
  return rows;
}

}  // namespace setrank

#endif  // SETRANK_EXPERIMENTS_HPP
