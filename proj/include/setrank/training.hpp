#ifndef SETRANK_TRAINING_HPP
#define SETRANK_TRAINING_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "setrank/adam.hpp"
#include "setrank/error.hpp"
#include "setrank/letor.hpp"
#include "setrank/metrics.hpp"
#include "setrank/model.hpp"
#include "setrank/random.hpp"
#include "setrank/tensor.hpp"

namespace setrank {

inline constexpr double kProbabilityClamp = 1e-12;

/// Target attention a_i = tau(y_i) / sum_k tau(y_k), tau(y) = exp(y) for y > 0
/// and 0 otherwise. Empty when no label is positive (the query is skipped).
inline std::optional<std::vector<double>> attention_targets(std::span<const int> labels) {
  std::vector<double> a(labels.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0) {
      a[i] = std::exp(static_cast<double>(labels[i]));
      total += a[i];
    }
  }
  if (total == 0.0) return std::nullopt;
  for (double& v : a) v /= total;
  return a;
}

inline std::vector<double> predicted_attention(std::span<const double> scores) {
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("predicted_attention: non-finite score");
  std::vector<double> a(scores.size());
  if (scores.empty()) return a;
  const double mx = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    a[i] = std::exp(scores[i] - mx);
    total += a[i];
  }
  for (double& v : a) v /= total;
  return a;
}

/// L = -sum_i [ay_i log as_i + (1 - ay_i) log(1 - as_i)], as clamped to
/// [1e-12, 1 - 1e-12].
inline double listwise_loss(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) {
    throw DimensionError("listwise_loss: " + std::to_string(target.size()) + " targets for " +
                         std::to_string(predicted.size()) + " predictions");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double p = std::clamp(predicted[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
  }
  return loss;
}

/// Graph version of listwise_loss over a row of probabilities (1 x N).
inline Tensor cross_entropy_loss(Graph& g, Tensor probs, std::vector<double> target) {
  if (probs.rows() != 1 || probs.cols() != target.size()) {
    throw DimensionError("cross_entropy_loss: probabilities " + detail::shape_str(probs) +
                         " for " + std::to_string(target.size()) + " targets");
  }
  Tensor out(1, 1);
  out(0, 0) = listwise_loss(target, probs.values());
  if (!out.all_finite()) throw NumericError("cross_entropy_loss: non-finite loss");
  if (g.track({probs}, out)) {
    g.record(out, [probs, out, target = std::move(target)]() mutable {
      const double go = out.grad()[0];
      auto p = probs.values();
      auto gp = probs.grad();
      for (std::size_t i = 0; i < target.size(); ++i) {
        if (p[i] < kProbabilityClamp || p[i] > 1.0 - kProbabilityClamp) continue;
        gp[i] += go * (-target[i] / p[i] + (1.0 - target[i]) / (1.0 - p[i]));
      }
    });
  }
  return out;
}

/// Attention-rank loss of an N x 1 score column against target attention.
inline Tensor attention_rank_loss(Graph& g, Tensor scores, std::vector<double> target) {
  return cross_entropy_loss(g, row_softmax(g, transpose(g, scores)), std::move(target));
}

/// Start s of the shifted ordinal positions [s, s+N-1], uniform on
/// {1, ..., n_max - n + 1}.
inline std::size_t sample_ordinal_offset(std::size_t n, std::size_t n_max, Rng& rng) {
  if (n == 0 || n > n_max) {
    throw ContractError("sample_ordinal_offset: list of " + std::to_string(n) +
                        " documents does not fit n_max " + std::to_string(n_max));
  }
  std::uniform_int_distribution<std::size_t> u(1, n_max - n + 1);
  return u(rng);
}

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  /// Epochs without validation improvement before stopping; 0 stops at the
  /// first non-improving epoch.
  std::size_t patience = 20;
  /// Sample relative ordinal offsets during training.
  bool sample_offsets = true;
  std::size_t validation_k = 10;

  void validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double valid_ndcg = 0.0;
  double seconds = 0.0;
};

struct LossReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 when nothing was trained
  double best_valid_ndcg = -1.0;
  std::size_t skipped_queries = 0;
};

struct TrainResult {
  Model model;
  LossReport report;
};

/// One optimization step on one query. Returns the loss before the update.
inline double train_step(const QueryGroup& group, Model& model, AdamState& adam, Rng& offsets,
                         bool sample_offsets = true) {
  auto target = attention_targets(group.labels);
  if (!target) throw ContractError("train_step: query " + group.qid + " has no positive label");
  std::size_t start = 1;
  if (model.config.use_ordinal && sample_offsets) {
    start = sample_ordinal_offset(group.size(), model.config.n_max, offsets);
  }
  auto params = model.parameters();
  for (auto& p : params) p.zero_grad();

  Graph g;
  Tensor scores = forward_scores(g, group, model, start);
  Tensor loss = attention_rank_loss(g, scores, std::move(*target));
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("train_step: non-finite loss on " + group.qid);
  g.backward(loss);
  adam_step(params, adam);
  return value;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/**
 * Trains a fresh model: one query per Adam step, query order reshuffled every
 * epoch, validation NDCG@k after each epoch. Returns the parameters of the best
 * validation epoch (first one on ties).
 */
inline TrainResult train_loop(const Dataset& train, const Dataset& valid, const TrainConfig& tc,
                              const ModelConfig& mc, const EpochCallback& on_epoch = {}) {
  tc.validate();
  mc.validate();
  if (train.groups.empty() || valid.groups.empty()) {
    throw DataError("train_loop: train and validation splits must be non-empty");
  }
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < train.groups.size(); ++i)
    if (train.groups[i].has_relevant()) trainable.push_back(i);
  if (trainable.empty()) throw DataError("train_loop: no training query has a positive label");
  if (mc.use_ordinal && train.max_group_size() > mc.n_max) {
    throw ConfigError("train_loop: n_max " + std::to_string(mc.n_max) +
                      " is smaller than the largest training list (" +
                      std::to_string(train.max_group_size()) + ")");
  }

  Rng shuffle_rng = substream(tc.seed, "shuffle");
  Rng offset_rng = substream(tc.seed, "offsets");
  Model model = make_model(mc, tc.seed);
  auto params = model.parameters();
  AdamState adam(params, AdamOptions{tc.learning_rate});

  TrainResult result{model.clone(), {}};
  result.report.skipped_queries = train.groups.size() - trainable.size();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(trainable.begin(), trainable.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t idx : trainable)
      total += train_step(train.groups[idx], model, adam, offset_rng, tc.sample_offsets);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = total / static_cast<double>(trainable.size());
    rec.valid_ndcg = evaluate(model, valid, {tc.validation_k}).mean(tc.validation_k);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.valid_ndcg > result.report.best_valid_ndcg) {
      result.report.best_valid_ndcg = rec.valid_ndcg;
      result.report.best_epoch = epoch;
      result.model = model.clone();
      since_best = 0;
    } else if (++since_best > tc.patience) {
      break;
    }
  }
  return result;
}

}  // namespace setrank

#endif  // SETRANK_TRAINING_HPP
